//! Secure and reliable capacities, single-point runs and zero-capacity boundaries.

use serde::{Deserialize, Serialize};

use crate::capopt::{minimize, FeasibleSet, IterationTrace, Method, OptimizerConfig};
use crate::channel::{
    apply_channel, bell_state, extract_qber, simulate_observations, ChannelKind, ChannelModel,
    ObservationTable, QberMode, QberReport,
};
use crate::error::{CapError, Result};
use crate::linalg::binary_entropy;
use crate::protocol::{constraints_from_observations, ProtocolKind, ProtocolSpec};

/// Slack allowed on `g ≥ 0` for optimizer round-off.
const G_NEG_SLACK: f64 = 1e-9;
const HALF_SLACK: f64 = 1e-9;
const BOUNDARY_EDGE: f64 = 1e-6;

fn check_qber(name: &str, q: f64) -> Result<f64> {
    if !(-1e-12..=0.5 + HALF_SLACK).contains(&q) || q.is_nan() {
        return Err(CapError::Domain(format!("{name} = {q} outside [0, 1/2]")));
    }
    Ok(q.clamp(0.0, 0.5))
}

fn check_g_gamma(g: f64, gamma: f64) -> Result<()> {
    if !(g >= -G_NEG_SLACK) || !g.is_finite() {
        return Err(CapError::Domain(format!("g = {g} must be nonnegative")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(CapError::Domain(format!("gamma = {gamma} outside (0, 1]")));
    }
    Ok(())
}

/// `g − γ·h(q_f)`.
pub fn secure_capacity(g: f64, q_f: f64, gamma: f64) -> Result<f64> {
    check_g_gamma(g, gamma)?;
    let q_f = check_qber("q_f", q_f)?;
    Ok(g - gamma * binary_entropy(q_f)?)
}

/// `g − γ·h(q_f) − γ·h(q_b)`.
pub fn reliable_capacity(g: f64, q_f: f64, q_b: f64, gamma: f64) -> Result<f64> {
    check_g_gamma(g, gamma)?;
    let q_f = check_qber("q_f", q_f)?;
    let q_b = check_qber("q_b", q_b)?;
    Ok(g - gamma * binary_entropy(q_f)? - gamma * binary_entropy(q_b)?)
}

/// Where the joint statistics of a point come from.
#[derive(Clone, Debug)]
pub enum PointInput {
    Channel(ChannelModel),
    Table(ObservationTable),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointOptions {
    /// Backward-channel error rate; `None` means "same as q_f".
    pub q_b: Option<f64>,
    pub gamma: f64,
    pub qber_mode: QberMode,
}

impl Default for PointOptions {
    fn default() -> Self {
        Self {
            q_b: None,
            gamma: 1.0,
            qber_mode: QberMode::Max,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityResult {
    pub protocol: ProtocolKind,
    pub method: Method,
    pub eps: Option<f64>,
    pub q_f: f64,
    pub q_b: f64,
    pub gamma: f64,
    pub qber: QberReport,
    pub eta: Option<f64>,
    pub eta_big: Option<f64>,
    pub p_z: f64,
    pub g_bits: f64,
    pub cs_secure: f64,
    pub cs_reliable: f64,
    pub iterations: usize,
    pub elapsed_ms: f64,
    pub converged: bool,
    #[serde(skip)]
    pub trace: IterationTrace,
}

impl CapacityResult {
    /// The same optimized `g` charged with a different backward error rate.
    pub fn with_q_b(&self, q_b: f64) -> Result<Self> {
        let mut out = self.clone();
        out.q_b = check_qber("q_b", q_b)?;
        out.cs_reliable = reliable_capacity(self.g_bits, self.q_f, out.q_b, self.gamma)?;
        Ok(out)
    }
}

/// Builds constraints from the input, minimizes `g`, and charges error correction.
pub fn run_point(
    spec: &ProtocolSpec,
    input: &PointInput,
    opts: &PointOptions,
    cfg: &OptimizerConfig,
) -> Result<CapacityResult> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let (table, hint, eps) = match input {
        PointInput::Channel(ch) => {
            let tau = apply_channel(ch, &bell_state(spec.dim_a())?, [spec.dim_a(), spec.dim_b()])?;
            (
                simulate_observations(spec, ch)?,
                Some(tau),
                Some(ch.epsilon),
            )
        }
        PointInput::Table(t) => (t.clone(), None, None),
    };
    let qber = extract_qber(spec, &table, opts.qber_mode)?;
    let constraints = constraints_from_observations(spec, &table)?;
    let fs = match &hint {
        Some(tau) => FeasibleSet::with_hint(constraints, cfg.feas_tol, tau)?,
        None => FeasibleSet::new(constraints, cfg.feas_tol)?,
    };
    let res = minimize(spec, &fs, cfg)?;
    let g = if res.g_star < 0.0 && res.g_star >= -G_NEG_SLACK {
        0.0
    } else {
        res.g_star
    };
    let q_f = qber.q_f.min(0.5);
    let q_b = match opts.q_b {
        Some(q) => check_qber("q_b", q)?,
        None => q_f,
    };
    let is_mismatch = spec.kind() == ProtocolKind::Dl04Mismatch;
    Ok(CapacityResult {
        protocol: spec.kind(),
        method: cfg.method,
        eps,
        q_f,
        q_b,
        gamma: opts.gamma,
        qber,
        eta: is_mismatch.then(|| spec.param("eta")).flatten(),
        eta_big: is_mismatch.then(|| spec.param("eta_big")).flatten(),
        p_z: spec.param("p_z").unwrap_or(f64::NAN),
        g_bits: g,
        cs_secure: secure_capacity(g, q_f, opts.gamma)?,
        cs_reliable: reliable_capacity(g, q_f, q_b, opts.gamma)?,
        iterations: res.iterations,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        converged: res.converged,
        trace: res.trace,
    })
}

/// Depolarizing strength whose simulated aggregate QBER equals `q_f`.
pub fn epsilon_for_qber(
    spec: &ProtocolSpec,
    kind: ChannelKind,
    q_f: f64,
    mode: QberMode,
) -> Result<f64> {
    let q_f = check_qber("q_f", q_f)?;
    let qber_at = |eps: f64| -> Result<f64> {
        let t = simulate_observations(spec, &ChannelModel::new(kind, eps)?)?;
        Ok(extract_qber(spec, &t, mode)?.q_f)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if qber_at(hi)? < q_f - 1e-12 {
        return Err(CapError::Domain(format!(
            "q_f = {q_f} is not reachable by {kind:?} noise"
        )));
    }
    if q_f <= qber_at(lo)? {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if qber_at(mid)? < q_f {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `g − γh(q_f) − γh(q_b) = 0` for `q_b ∈ [0, 1/2]` by bisection.
pub fn boundary_from_g(g: f64, q_f: f64, gamma: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(CapError::Config(format!(
            "boundary tolerance {tol} must be positive"
        )));
    }
    let cs = |q_b: f64| reliable_capacity(g, q_f, q_b, gamma);
    let at0 = cs(0.0)?;
    if at0 <= 0.0 {
        return Err(CapError::NoBoundary(format!(
            "capacity at q_b = 0 is {at0:.6} for q_f = {q_f}"
        )));
    }
    let at_half = cs(0.5)?;
    if at_half >= 0.0 {
        if at_half <= BOUNDARY_EDGE {
            return Ok(0.5);
        }
        return Err(CapError::NoBoundary(format!(
            "capacity stays positive ({at_half:.6}) up to q_b = 1/2"
        )));
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if cs(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Optimizes `g` at forward error rate `q_f` (noise strength found by
/// inverting the simulated QBER) and returns the `q_b` where the reliable
/// capacity vanishes.
pub fn find_zero_boundary(
    spec: &ProtocolSpec,
    q_f: f64,
    cfg: &OptimizerConfig,
    tol: f64,
) -> Result<f64> {
    let (g, q_f_actual) = g_at_qber(spec, q_f, cfg, QberMode::Max)?;
    boundary_from_g(g, q_f_actual, 1.0, tol)
}

/// Optimized `g` at the noise level producing forward QBER `q_f`.
pub fn g_at_qber(
    spec: &ProtocolSpec,
    q_f: f64,
    cfg: &OptimizerConfig,
    mode: QberMode,
) -> Result<(f64, f64)> {
    let kind = ChannelModel::for_protocol(spec.kind(), 0.0)?.kind;
    let eps = epsilon_for_qber(spec, kind, q_f, mode)?;
    let res = run_point(
        spec,
        &PointInput::Channel(ChannelModel::new(kind, eps)?),
        &PointOptions {
            qber_mode: mode,
            ..PointOptions::default()
        },
        cfg,
    )?;
    Ok((res.g_bits, res.q_f))
}
