use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("network has no buses")]
    EmptyNetwork,

    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),

    #[error("{what} references unknown bus {bus}")]
    DanglingReference { what: String, bus: usize },

    #[error("invalid {what}: {reason}")]
    InvalidData { what: String, reason: String },

    #[error("network graph is not connected")]
    Disconnected,

    #[error("branch {from}-{to} has a zero tap ratio")]
    ZeroTap { from: usize, to: usize },

    #[error("generator {gen} subproblem is not strictly convex (curvature {curvature})")]
    NonconvexQuadratic { gen: usize, curvature: f64 },

    #[error(
        "bus {bus} subproblem is not coercive (voltage curvature {curvature}); \
         the consensus/proximal weights are too small for the shunt multipliers"
    )]
    NonCoerciveBus { bus: usize, curvature: f64 },

    #[error("solver diverged: {0}")]
    SolverDiverged(String),

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("unknown parameter setting {0:?} (expected a letter A..T)")]
    UnknownSetting(String),

    #[error("gap is undefined for a zero centralized objective")]
    DivisionByZero,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
