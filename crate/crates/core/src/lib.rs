//! Secrecy-capacity engine for entanglement-based QSDC protocols.
//!
//! The capacity is `g − γh(Q_f) − γh(Q_b)`, where `g` is the minimum of
//! `S(G(ρ) ‖ Z(G(ρ)))` over all two-party states `ρ` reproducing the observed
//! joint statistics. The crate provides the matrix algebra, the protocol and
//! channel models, three minimizers for `g`, and sweep orchestration.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod affine;
pub mod capacity;
pub mod capopt;
pub mod channel;
pub mod error;
pub mod fmt;
pub mod linalg;
pub mod protocol;
pub mod sweep;

pub use capacity::{
    boundary_from_g, find_zero_boundary, reliable_capacity, run_point, secure_capacity,
    CapacityResult, PointInput,
};
pub use capopt::{
    cgd_minimize, comb_minimize, gradient, linear_subproblem, minimize, objective, spgd_minimize,
    FeasibleSet, IterationTrace, LmoKind, Method, OptimizationResult, OptimizerConfig, StepRule,
    TraceRecord,
};
pub use channel::{
    apply_channel, bell_state, extract_qber, simulate_observations, ChannelKind, ChannelModel,
    ObservationTable, QberMode, QberReport,
};
pub use error::{CapError, Result};
pub use linalg::{DensityOperator, HermitianOperator, SpectralDecomposition};
pub use protocol::{
    build_dl04, build_dl04_mismatch, build_dl04_six_state, constraints_from_observations,
    ConstraintSet, KrausMap, PinchingSet, PovmMode, PovmSet, ProtocolConfig, ProtocolKind,
    ProtocolSpec,
};
pub use sweep::{run_sweep, SweepResult, SweepRow, SweepSpec};

/// Crate version recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
