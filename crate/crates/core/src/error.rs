use thiserror::Error;

/// Errors raised by the capacity engine.
#[derive(Debug, Error)]
pub enum CapError {
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NumericalFailure { sweeps: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("support violation: {weight:.3e} of the state lies in the kernel of the reference")]
    Support { weight: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("inconsistent observations: {0}")]
    InconsistentObservations(String),

    #[error("constraints admit no density operator (residual {residual:.3e} after {iterations} alternations)")]
    ConstraintInfeasible { residual: f64, iterations: usize },

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("no zero-capacity boundary: {0}")]
    NoBoundary(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CapError {
    /// True for the errors meaning "these statistics admit no quantum state".
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            CapError::ConstraintInfeasible { .. } | CapError::InconsistentObservations(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CapError>;
