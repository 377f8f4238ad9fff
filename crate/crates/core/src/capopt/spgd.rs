//! Projected gradient descent with heavy-ball momentum.
//!
//! `χ ← μχ − ζ∇g(ρ)`, `ρ ← P_D(ρ + χ)`. The step is accepted when
//! `g(ρ⁺) ≤ g(ρ) + c·⟨∇g, ρ⁺ − ρ⟩` with `⟨∇g, ρ⁺ − ρ⟩ < 0`; otherwise `ζ` is
//! halved, and after 30 halvings the momentum is dropped and the search retried.

use std::time::Instant;

use log::debug;

use super::feasible::FeasibleSet;
use super::{
    check_inputs, evaluate, IterationTrace, Method, OptimizationResult, OptimizerConfig, StepRule,
};
use crate::error::Result;
use crate::linalg::{hs_inner_unchecked, DensityOperator, HermitianOperator};
use crate::protocol::ProtocolSpec;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;
const STALL_COUNT: usize = 5;

pub fn spgd_minimize(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    check_inputs(spec, fs, cfg, Method::Spgd)?;
    let clock = Instant::now();
    let start = fs.initial_point()?;
    let mut trace = IterationTrace::default();
    let out = spgd_run(spec, fs, cfg, start, &mut trace, &clock, 0, true)?;
    Ok(OptimizationResult {
        rho_star: out.rho,
        g_star: out.g,
        converged: out.converged,
        iterations: out.iterations,
        switch_iter: None,
        trace,
    })
}

pub(crate) struct RunOutcome {
    pub rho: DensityOperator,
    pub g: f64,
    pub converged: bool,
    /// Iterations performed by this run (excluding the start record).
    pub iterations: usize,
}

struct Step {
    rho: DensityOperator,
    g: f64,
    chi: HermitianOperator,
    zeta: f64,
}

/// Runs SPGD from `start`, appending to `trace` with indices after `iter_offset`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn spgd_run(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
    start: DensityOperator,
    trace: &mut IterationTrace,
    clock: &Instant,
    iter_offset: usize,
    record_start: bool,
) -> Result<RunOutcome> {
    let mut rho = start;
    let (mut g, mut grad) = evaluate(spec, &rho, cfg.reg)?;
    if record_start {
        trace.push(iter_offset, g, fs.residual(&rho)?, 0.0, clock);
    }
    let mut chi = HermitianOperator::zeros(rho.dim());
    let mut zeta_prev = cfg.zeta0;
    let mut quiet = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    for s in 1..=cfg.max_iter {
        iterations = s;
        let step = match cfg.step_rule {
            StepRule::Constant => Some(constant_step(fs, cfg, &rho, &chi, &grad, spec)?),
            StepRule::LineSearch => {
                let zeta_start = (2.0 * zeta_prev).min(cfg.zeta0);
                match backtrack(spec, fs, cfg, &rho, g, &grad, &chi, cfg.mu, zeta_start)? {
                    Some(st) => Some(st),
                    None => backtrack(spec, fs, cfg, &rho, g, &grad, &chi, 0.0, cfg.zeta0)?,
                }
            }
        };
        let Some(step) = step else {
            // No descent direction survives projection: numerically stationary.
            debug!("spgd: no admissible step at iteration {s}");
            trace.push(iter_offset + s, g, fs.residual(&rho)?, 0.0, clock);
            converged = true;
            break;
        };
        let dg = g - step.g;
        rho = step.rho;
        chi = step.chi;
        zeta_prev = step.zeta;
        let (g_new, grad_new) = evaluate(spec, &rho, cfg.reg)?;
        g = g_new;
        grad = grad_new;
        trace.push(iter_offset + s, g, fs.residual(&rho)?, step.zeta, clock);

        quiet = if dg.abs() < cfg.tol { quiet + 1 } else { 0 };
        if quiet >= STALL_COUNT {
            converged = true;
            break;
        }
    }
    Ok(RunOutcome {
        rho,
        g,
        converged,
        iterations,
    })
}

fn constant_step(
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
    rho: &DensityOperator,
    chi: &HermitianOperator,
    grad: &HermitianOperator,
    spec: &ProtocolSpec,
) -> Result<Step> {
    let chi_new = &chi.scale(cfg.mu) - &grad.scale(cfg.zeta0);
    let cand = fs.project(&(&**rho + &chi_new))?;
    let g = super::objective_of(spec, &cand, cfg.reg)?;
    Ok(Step {
        rho: cand,
        g,
        chi: chi_new,
        zeta: cfg.zeta0,
    })
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
    rho: &DensityOperator,
    g: f64,
    grad: &HermitianOperator,
    chi: &HermitianOperator,
    mu: f64,
    zeta_start: f64,
) -> Result<Option<Step>> {
    let mut zeta = zeta_start;
    let carried = chi.scale(mu);
    for _ in 0..=MAX_HALVINGS {
        let chi_new = &carried - &grad.scale(zeta);
        let cand = fs.project(&(&**rho + &chi_new))?;
        let d = &*cand - &**rho;
        let slope = hs_inner_unchecked(grad.matrix(), d.matrix());
        if slope < 0.0 {
            let g_new = super::objective_of(spec, &cand, cfg.reg)?;
            if g_new <= g + ARMIJO_C * slope {
                return Ok(Some(Step {
                    rho: cand,
                    g: g_new,
                    chi: chi_new,
                    zeta,
                }));
            }
        }
        zeta *= 0.5;
    }
    Ok(None)
}
