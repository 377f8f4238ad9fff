//! Fixtures shared by the benchmarks.

use qsdc_core::{
    build_dl04, build_dl04_mismatch, constraints_from_observations, simulate_observations,
    ChannelModel, FeasibleSet, PovmMode, ProtocolSpec,
};

/// Ideal DL04 with `p_z = 0.999` and its feasible set at noise `eps`.
pub fn dl04_fixture(eps: f64) -> (ProtocolSpec, FeasibleSet) {
    fixture(build_dl04(0.999).expect("valid p_z"), eps)
}

/// Mismatch model at `η_big = 0.75`, `η = 0.6`.
pub fn mismatch_fixture(eps: f64) -> (ProtocolSpec, FeasibleSet) {
    fixture(
        build_dl04_mismatch(0.999, 0.75, 0.6, PovmMode::Corrected).expect("valid parameters"),
        eps,
    )
}

fn fixture(spec: ProtocolSpec, eps: f64) -> (ProtocolSpec, FeasibleSet) {
    let ch = ChannelModel::for_protocol(spec.kind(), eps).expect("valid epsilon");
    let table = simulate_observations(&spec, &ch).expect("simulation");
    let cons = constraints_from_observations(&spec, &table).expect("constraints");
    let fs = FeasibleSet::new(cons, 1e-9).expect("feasible");
    (spec, fs)
}
