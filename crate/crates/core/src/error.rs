use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dressed basis undefined; use bare basis (drive amplitude is zero)")]
    DressedUndefined,

    #[error("resonance condition unsatisfiable: {0}")]
    NoResonance(String),

    #[error("effective model singular: {0}")]
    Singular(String),

    #[error("step size too coarse: norm drift {drift:e} exceeds 1e-5")]
    StepTooCoarse { drift: f64 },

    #[error("integration tolerance violated: {0}")]
    ToleranceViolation(String),

    #[error("degenerate steady state (reciprocal condition number {rcond:e})")]
    DegenerateSteadyState { rcond: f64 },

    #[error("truncation too small: population of top Fock level {n_max} is {tail:e} (limit 1e-8)")]
    Truncation { tail: f64, n_max: usize },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("jump resolution lost at t = {time}: no-jump probability of one coarse step fell below one half")]
    JumpResolutionLost { time: f64 },

    #[error("correlation undefined: {0}")]
    CorrelationUndefined(String),

    #[error("bundle occupation too small: <a^N+ a^N> = {value:e}")]
    BundleOccupationTooSmall { value: f64 },

    #[error("sample grids of trajectory records do not match")]
    GridMismatch,

    #[error("config error: {0}")]
    Config(String),

    #[error("linear algebra: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used as the failure flag in datasets.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDims(_) => "invalid_dims",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DressedUndefined => "dressed_undefined",
            Error::NoResonance(_) => "no_resonance",
            Error::Singular(_) => "singular",
            Error::StepTooCoarse { .. } => "step_too_coarse",
            Error::ToleranceViolation(_) => "tolerance_violation",
            Error::DegenerateSteadyState { .. } => "degenerate_steady_state",
            Error::Truncation { .. } => "truncation",
            Error::SolverFailure(_) => "solver_failure",
            Error::JumpResolutionLost { .. } => "jump_resolution_lost",
            Error::CorrelationUndefined(_) => "correlation_undefined",
            Error::BundleOccupationTooSmall { .. } => "bundle_occupation_too_small",
            Error::GridMismatch => "grid_mismatch",
            Error::Config(_) => "config",
            Error::Linalg(_) => "linalg",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
