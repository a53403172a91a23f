use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario ({n_settings},{n_outcomes}): need n_s >= 1 and n_o >= 2")]
    InvalidScenario { n_settings: usize, n_outcomes: usize },

    #[error("cannot parse scenario from {0:?}; expected \"n_s,n_o\"")]
    ScenarioSyntax(String),

    #[error("distribution violates nonsignaling by {residual:.3e}")]
    SignalingInput { residual: f64 },

    #[error("distribution is not normalized for (x,y)=({x},{y}): sum = {sum}")]
    NotNormalized { x: usize, y: usize, sum: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("scenario mismatch: {left} vs {right}")]
    ScenarioMismatch { left: String, right: String },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("polytope is empty or not full-dimensional")]
    Infeasible,

    #[error("feasible interval on coordinate {coord} collapsed (width {width:.3e})")]
    DegenerateInterval { coord: usize, width: f64 },

    #[error("{count} local vertices exceed the configured cap of {cap}")]
    TooManyVertices { count: u128, cap: usize },

    #[error("unsupported hierarchy level {0}")]
    UnsupportedLevel(String),

    #[error("cannot parse target set {0:?}")]
    TargetSyntax(String),

    #[error("problem too large: total PSD dimension {total} exceeds cap {cap}")]
    ProblemTooLarge { total: usize, cap: usize },

    #[error("malformed exchange file, line {line}: {msg}")]
    Exchange { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
