use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain parameter: {0}")]
    InvalidDomain(String),

    #[error("sublevel set {{φ < {level}}} is empty")]
    EmptySublevel { level: f64 },

    #[error("point {index} lies outside domain `{domain}`")]
    PointOutsideDomain { domain: String, index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("weight field does not live on the grid's assembly nodes: {0}")]
    NodeMismatch(String),

    #[error("weight twist {weight} incompatible with basis twist {basis} (expected basis - 1)")]
    TwistMismatch { weight: u32, basis: u32 },

    #[error("Gram matrix is not positive definite (log10 condition estimate {log10_condition:.2})")]
    GramIndefinite { log10_condition: f64 },

    #[error("Gram condition number 10^{log10_condition:.2} exceeds the guard 10^{limit_log10:.0}")]
    GramIllConditioned { log10_condition: f64, limit_log10: f64 },

    #[error("kernel quadratic form underflowed at evaluation point {index}")]
    KernelUnderflow { index: usize },

    #[error("section has zero Gram norm")]
    ZeroSection,

    #[error("degree schedule exhausted at step {step}")]
    ScheduleExhausted { step: u32 },

    #[error("field is empty or not finite: {0}")]
    InvalidField(String),

    #[error("empty report")]
    EmptyReport,

    #[error("model metric breaks down at node {index}: det(φ_ij̄)(-φ + |dφ|²) = {value:e}")]
    ModelMetricBreakdown { index: usize, value: f64 },

    #[error("no closed-form Kähler-Einstein reference for domain `{0}`")]
    NoReference(String),

    #[error("exhaustion levels are not strictly ascending at position {index}")]
    LevelsNotAscending { index: usize },

    #[error("exhaustion densities increase at level {level}: {previous:e} -> {current:e}")]
    NonMonotone { level: f64, previous: f64, current: f64 },

    #[error("Yau-Schwarz comparison violated at node {index} (excess {excess:e})")]
    YauSchwarzViolation { index: usize, excess: f64 },

    #[error("kernel is not increasing toward the boundary at path point {index} (under-resolved)")]
    UnderResolvedPath { index: usize },

    #[error("finite-difference stencil leaves the domain at point {index} (step {step})")]
    InsufficientMargin { index: usize, step: f64 },

    #[error("fiber at s = {s} failed: {source}")]
    Fiber {
        s: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
