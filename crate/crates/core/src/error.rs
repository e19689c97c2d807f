use thiserror::Error;

/// Errors produced by trajectory handling, synthesis, gate construction and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("state norm drifted by {drift:.3e} during propagation")]
    NonNormalizedState { drift: f64 },

    #[error("trajectory is not closed")]
    NotClosed,

    #[error("latitude segment sits on a pole (chi = {chi})")]
    DegenerateSegment { chi: f64 },

    #[error("segment has zero arc length")]
    ZeroDuration,

    #[error("intermediate latitudes are degenerate (|cos chi1 - cos chi2| = {gap:.3e})")]
    DegenerateLatitudes { gap: f64 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("no parameter choice satisfies the constraint: {0}")]
    Unsolvable(String),

    #[error("solver failed to reach the target (best infidelity {best_infidelity:.3e})")]
    SolverFailed { best_infidelity: f64 },

    #[error("integration step too large (trace drift {drift:.3e}); refine the time grid")]
    StepTooLarge { drift: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("requested effective coupling {requested:.6} exceeds the reachable maximum {max:.6}")]
    Unreachable { requested: f64, max: f64 },

    #[error("Bessel series truncated at |k| <= {kmax} keeps only {retained:.12} of the modulation weight")]
    Truncation { kmax: usize, retained: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a solver or of the physics (as opposed to bad input).
    pub fn is_physics_failure(&self) -> bool {
        matches!(
            self,
            Error::SolverFailed { .. }
                | Error::DegenerateLatitudes { .. }
                | Error::DegenerateSegment { .. }
                | Error::Unsolvable(_)
                | Error::Unreachable { .. }
                | Error::StepTooLarge { .. }
                | Error::NonNormalizedState { .. }
                | Error::ZeroDuration
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
