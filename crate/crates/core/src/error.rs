use thiserror::Error;

/// Errors produced by the planning, oracle, and optimization layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid reward specification: {0}")]
    InvalidRewardSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The consistent reward polytope has no point (for example two experts that
    /// contradict each other with a zero tolerance).
    #[error("reward polytope is empty")]
    EmptyPolytope,

    /// The ellipsoid shape matrix stopped being positive definite.
    #[error("ellipsoid shape matrix lost positive-definiteness at iteration {iteration}")]
    EllipsoidBreakdown { iteration: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("target lies outside the convex hull of the candidate points; use occupancy-based recovery")]
    HullInfeasible,

    #[error("occupancy measure violates the flow constraints (residual {residual:e})")]
    FlowResidual { residual: f64 },

    #[error("instance too large for brute force: {0}")]
    SizeGuard(String),

    /// Multiplicative consistency only makes sense when the optimal value is nonnegative.
    #[error("multiplicative expert bound needs a nonnegative optimal value, got {value}; use the additive form")]
    NegativeOptimum { value: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Strips iteration wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
