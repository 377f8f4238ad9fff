//! Conditional gradient (Frank–Wolfe): `ω = argmin_{σ∈D} ⟨∇g(ρ), σ⟩`,
//! then `ρ ← ζω + (1 − ζ)ρ` with `ζ` from a golden-section search.

use std::time::Instant;

use super::feasible::FeasibleSet;
use super::lmo::linear_subproblem_from;
use super::spgd::RunOutcome;
use super::{
    check_inputs, evaluate, objective_of, IterationTrace, Method, OptimizationResult,
    OptimizerConfig, StepRule,
};
use crate::error::Result;
use crate::linalg::DensityOperator;
use crate::protocol::ProtocolSpec;

const GOLDEN_TOL: f64 = 1e-9;

pub fn cgd_minimize(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    check_inputs(spec, fs, cfg, Method::Cgd)?;
    let clock = Instant::now();
    let start = fs.initial_point()?;
    let mut trace = IterationTrace::default();
    let out = cgd_run(spec, fs, cfg, start, &mut trace, &clock)?;
    Ok(OptimizationResult {
        rho_star: out.rho,
        g_star: out.g,
        converged: out.converged,
        iterations: out.iterations,
        switch_iter: None,
        trace,
    })
}

/// Minimizes a convex `f` on `[0, 1]`, returning the best of the golden
/// section estimate and the two endpoints.
fn golden_section(f: impl Fn(f64) -> Result<f64>, f0: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    let f1 = f(1.0)?;
    if f1 < best.1 {
        best = (1.0, f1);
    }
    if f0 <= best.1 {
        best = (0.0, f0);
    }
    Ok(best)
}

pub(crate) fn cgd_run(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
    start: DensityOperator,
    trace: &mut IterationTrace,
    clock: &Instant,
) -> Result<RunOutcome> {
    let mut rho = start;
    let (mut g, mut grad) = evaluate(spec, &rho, cfg.reg)?;
    trace.push(0, g, fs.residual(&rho)?, 0.0, clock);
    let mut history = vec![g];
    let mut converged = false;
    let mut iterations = 0;
    let w = cfg.cgd_stall_window;

    for s in 1..=cfg.max_iter {
        iterations = s;
        let omega = linear_subproblem_from(fs, &grad, &rho, cfg.lmo)?;
        let (zeta, _) = match cfg.step_rule {
            StepRule::Constant => (cfg.zeta0.min(1.0), f64::NAN),
            StepRule::LineSearch => {
                golden_section(|z| objective_of(spec, &omega.lerp(&rho, z), cfg.reg), g)?
            }
        };
        rho = DensityOperator::new_unchecked(omega.lerp(&rho, zeta));
        let (gn, gradn) = evaluate(spec, &rho, cfg.reg)?;
        g = gn;
        grad = gradn;
        trace.push(s, g, fs.residual(&rho)?, zeta, clock);
        history.push(g);
        if s >= w {
            let past = history[s - w];
            if past - g <= cfg.cgd_stall_rel * past.abs() {
                converged = true;
                break;
            }
        }
    }
    Ok(RunOutcome {
        rho,
        g,
        converged,
        iterations,
    })
}
