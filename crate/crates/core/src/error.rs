use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time scale: {0}")]
    InvalidScale(String),

    #[error("{t} is not a member of the time scale")]
    NotMember { t: f64 },

    #[error("{t} is not in T^kappa (maximum is left-scattered)")]
    NotInKappa { t: f64 },

    #[error("dense segment around {t} is too short for a difference quotient")]
    DegenerateSegment { t: f64 },

    #[error("quadrature on [{lo}, {hi}] did not reach tolerance: estimate {estimate}, last change {change}")]
    QuadratureTolerance {
        lo: f64,
        hi: f64,
        estimate: f64,
        change: f64,
    },

    #[error("degenerate interval: a = b = {0}")]
    DegenerateInterval(f64),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("transformation is inconsistent: {0}")]
    InconsistentTransformation(String),

    #[error("lagrangian is not of the form (x^Δ)² + x^σ + t·x^Δ")]
    NotLinearShiftFamily,

    #[error("control problem is not the shipped exp-dynamics family")]
    NotShippedControlFamily,

    #[error("no invariant solution: x1 endpoint gives s = {s_from_x1}, x2 endpoint gives s = {s_from_x2}")]
    NoInvariantSolution { s_from_x1: f64, s_from_x2: f64 },

    #[error("wrong oracle: {0}")]
    WrongOracle(String),

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
