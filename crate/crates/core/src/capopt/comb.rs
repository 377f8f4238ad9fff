//! Conditional gradient until it stalls, then momentum SPGD from its iterate.

use std::time::Instant;

use super::cgd::cgd_run;
use super::feasible::FeasibleSet;
use super::spgd::spgd_run;
use super::{check_inputs, IterationTrace, Method, OptimizationResult, OptimizerConfig};
use crate::error::Result;
use crate::protocol::ProtocolSpec;

pub fn comb_minimize(
    spec: &ProtocolSpec,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    check_inputs(spec, fs, cfg, Method::Comb)?;
    let clock = Instant::now();
    let start = fs.initial_point()?;
    let mut trace = IterationTrace::default();
    let first = cgd_run(spec, fs, cfg, start, &mut trace, &clock)?;
    let switch = first.iterations;
    let remaining = cfg.max_iter.saturating_sub(switch).max(1);
    let second_cfg = OptimizerConfig {
        max_iter: remaining,
        ..cfg.clone()
    };
    let second = spgd_run(
        spec,
        fs,
        &second_cfg,
        first.rho,
        &mut trace,
        &clock,
        switch,
        false,
    )?;
    Ok(OptimizationResult {
        rho_star: second.rho,
        g_star: second.g,
        converged: second.converged,
        iterations: switch + second.iterations,
        switch_iter: Some(switch),
        trace,
    })
}
