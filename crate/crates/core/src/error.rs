use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Total risk `R + zeta^2/2` is zero, so the clipping factors are undefined.
    #[error("clipping factors undefined for zero total risk")]
    DegenerateRisk,

    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The schedule increases somewhere, which would need a negative noise variance.
    #[error("learning-rate schedule increases between steps {step} and {next} (negative noise variance)")]
    NegativeVariance { step: usize, next: usize },

    /// A step with positive learning rate is followed by zero total noise.
    #[error("step {step} has positive learning rate but no protecting noise (infinite privacy loss)")]
    InfinitePrivacyLoss { step: usize },

    #[error("invalid spectrum exponent phi = {0} (must be < 1)")]
    InvalidExponent(f64),

    #[error("invalid alignment exponent psi = {psi} (must be < 1 - phi = {bound})")]
    AlignmentExponent { psi: f64, bound: f64 },

    #[error("integration produced a negative mode energy at t = {t}; use a smaller step")]
    Instability { t: f64 },

    #[error("iterate diverged (non-finite parameters) at step {step}")]
    Divergence { step: usize },

    #[error("parameters outside the admissible range of the scaling-law exponents: {0}")]
    OutOfTheory(String),

    #[error("optimization failed: every candidate diverged")]
    OptimizationFailed,

    #[error("log-log fit needs positive values, got {0}")]
    Fit(String),

    #[error("ingestion error at row {row}: {msg}")]
    Ingestion { row: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("compute budget exceeded: estimated {estimate:.3e} scalar ops > budget {budget:.3e} (use --force)")]
    Budget { estimate: f64, budget: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Domain(_)
            | Error::InvalidExponent(_)
            | Error::AlignmentExponent { .. }
            | Error::OutOfTheory(_)
            | Error::Budget { .. }
            | Error::Ingestion { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::DegenerateRisk
            | Error::NegativeVariance { .. }
            | Error::InfinitePrivacyLoss { .. }
            | Error::Instability { .. }
            | Error::Divergence { .. }
            | Error::OptimizationFailed
            | Error::Fit(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
