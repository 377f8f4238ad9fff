//! Minimization of `g(ρ) = S(G(ρ) ‖ Z(G(ρ)))` over the feasible set.

mod cgd;
mod comb;
mod feasible;
mod lmo;
mod spgd;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::fmt::format_g10;
use crate::linalg::{
    hermitian_eig, matrix_log2_from, relative_entropy_from, DensityOperator, HermitianOperator,
    DEFAULT_REG,
};
use crate::protocol::ProtocolSpec;

pub use cgd::cgd_minimize;
pub use comb::comb_minimize;
pub use feasible::{FeasibleSet, DEFAULT_FEAS_TOL};
pub use lmo::{linear_subproblem, linear_subproblem_from};
pub use spgd::spgd_minimize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spgd,
    Cgd,
    #[default]
    Comb,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Spgd => "spgd",
            Method::Cgd => "cgd",
            Method::Comb => "comb",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CapError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spgd" => Ok(Method::Spgd),
            "cgd" => Ok(Method::Cgd),
            "comb" => Ok(Method::Comb),
            other => Err(CapError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Step-size policy. `Constant` uses `zeta0` every iteration (clipped to 1
/// for the conditional-gradient mixing weight).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    #[default]
    LineSearch,
    Constant,
}

/// Linear minimization oracle used by the conditional-gradient method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LmoKind {
    /// Fixed-step projected gradient (500 steps at most).
    #[default]
    ProjectedGradient,
    /// Log-barrier path following on the dual; accurate to a duality gap of ~1e-9.
    Barrier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub mu: f64,
    pub zeta0: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub reg: f64,
    pub cgd_stall_window: usize,
    pub cgd_stall_rel: f64,
    pub step_rule: StepRule,
    pub lmo: LmoKind,
    pub feas_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Comb,
            mu: 0.9,
            zeta0: 1.0,
            max_iter: 5000,
            tol: 1e-10,
            reg: DEFAULT_REG,
            cgd_stall_window: 3,
            cgd_stall_rel: 1e-6,
            step_rule: StepRule::LineSearch,
            lmo: LmoKind::ProjectedGradient,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }
}

impl OptimizerConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CapError::Config(m));
        if !(0.0..1.0).contains(&self.mu) {
            return bad(format!("mu = {} must lie in [0, 1)", self.mu));
        }
        if !(self.zeta0 > 0.0 && self.zeta0.is_finite()) {
            return bad(format!("zeta0 = {} must be positive", self.zeta0));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if !(0.0..=1e-6).contains(&self.reg) {
            return bad(format!("reg = {} must lie in [0, 1e-6]", self.reg));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.cgd_stall_window == 0 || !(self.cgd_stall_rel >= 0.0) {
            return bad("CGD stall window must be ≥ 1 and stall ratio ≥ 0".into());
        }
        if !(self.feas_tol > 0.0 && self.feas_tol <= 1e-6) {
            return bad(format!(
                "feas_tol = {} must lie in (0, 1e-6]",
                self.feas_tol
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub g_bits: f64,
    pub residual: f64,
    pub step: f64,
    pub elapsed_ms: f64,
}

/// Per-iteration log. Record 0 is the starting point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn g_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.g_bits).collect()
    }

    /// First iteration whose value is within `gap` of `g_min`, with its wall time.
    pub fn time_to_gap(&self, g_min: f64, gap: f64) -> Option<(usize, f64)> {
        self.records
            .iter()
            .find(|r| r.g_bits - g_min <= gap)
            .map(|r| (r.iter, r.elapsed_ms))
    }

    /// CSV `iter,g_bits,residual,step,elapsed_ms`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iter", "g_bits", "residual", "step", "elapsed_ms"])?;
        for r in &self.records {
            wr.write_record([
                r.iter.to_string(),
                format_g10(r.g_bits),
                format_g10(r.residual),
                format_g10(r.step),
                format_g10(r.elapsed_ms),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub(crate) fn push(
        &mut self,
        iter: usize,
        g_bits: f64,
        residual: f64,
        step: f64,
        clock: &Instant,
    ) {
        self.records.push(TraceRecord {
            iter,
            g_bits,
            residual,
            step,
            elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub rho_star: DensityOperator,
    pub g_star: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Iteration after which COMB hands over from CGD to SPGD.
    pub switch_iter: Option<usize>,
    pub trace: IterationTrace,
}

fn check_dims(spec: &ProtocolSpec, rho: &HermitianOperator) -> Result<()> {
    if rho.dim() != spec.dim() {
        return Err(CapError::Shape(format!(
            "state is {}-dim, protocol {} expects {}",
            rho.dim(),
            spec.name(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Objective value and gradient from one pair of eigendecompositions.
pub fn evaluate(
    spec: &ProtocolSpec,
    rho: &HermitianOperator,
    reg: f64,
) -> Result<(f64, HermitianOperator)> {
    eval_inner(spec, rho, reg, true).map(|(v, g)| (v, g.expect("gradient requested")))
}

fn eval_inner(
    spec: &ProtocolSpec,
    rho: &HermitianOperator,
    reg: f64,
    want_grad: bool,
) -> Result<(f64, Option<HermitianOperator>)> {
    check_dims(spec, rho)?;
    if !(0.0..=1e-6).contains(&reg) {
        return Err(CapError::Domain(format!(
            "spectral floor {reg} outside [0, 1e-6]"
        )));
    }
    let x = spec.post_selection().apply(rho)?;
    let zx = spec.pinching().apply(&x);
    let ex = hermitian_eig(&x)?;
    let ez = hermitian_eig(&zx)?;
    let value = relative_entropy_from(&ex, &x, &ez, reg)?;
    if !want_grad {
        return Ok((value, None));
    }
    let diff = &matrix_log2_from(&ex, reg)? - &matrix_log2_from(&ez, reg)?;
    Ok((value, Some(spec.post_selection().adjoint(&diff)?)))
}

/// `g(ρ) = S(G(ρ) ‖ Z(G(ρ)))` in bits.
pub fn objective(spec: &ProtocolSpec, rho: &DensityOperator, reg: f64) -> Result<f64> {
    objective_of(spec, rho, reg)
}

/// [`objective`] for any PSD operator (used along line searches).
pub fn objective_of(spec: &ProtocolSpec, rho: &HermitianOperator, reg: f64) -> Result<f64> {
    eval_inner(spec, rho, reg, false).map(|(v, _)| v)
}

/// `G†(log₂ G(ρ) − log₂ Z(G(ρ)))`.
pub fn gradient(spec: &ProtocolSpec, rho: &DensityOperator, reg: f64) -> Result<HermitianOperator> {
    evaluate(spec, rho, reg).map(|(_, g)| g)
}

/// Runs the configured method.
pub fn minimize(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    match cfg.method {
        Method::Spgd => spgd_minimize(spec, fs, cfg),
        Method::Cgd => cgd_minimize(spec, fs, cfg),
        Method::Comb => comb_minimize(spec, fs, cfg),
    }
}

fn check_inputs(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
    method: Method,
) -> Result<()> {
    cfg.validate()?;
    if cfg.method != method {
        return Err(CapError::Config(format!(
            "{method} solver called with method = {}",
            cfg.method
        )));
    }
    if fs.dim() != spec.dim() {
        return Err(CapError::Shape(format!(
            "feasible set is {}-dim, protocol {}",
            fs.dim(),
            spec.dim()
        )));
    }
    Ok(())
}
