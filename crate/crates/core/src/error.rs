use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor `{name}`: {reason}")]
    InvalidTensor { name: String, reason: String },

    #[error("duplicate tensor name `{0}`")]
    DuplicateTensor(String),

    #[error("tensor `{name}`: gradient has {got} elements, expected {expected}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("got {got} gradients for {expected} tensors")]
    TensorCountMismatch { expected: usize, got: usize },

    #[error("tensor `{name}`: non-finite gradient at index {index}")]
    NonFiniteGradient { name: String, index: usize },

    #[error("switching exponent {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("step {t} outside [1, {total}]")]
    StepOutOfRange { t: u64, total: u64 },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParam(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("SNR undefined for zero total gradient noise")]
    ZeroNoise,

    #[error("update norms must be positive (got {norm1}, {norm2})")]
    NonPositiveNorm { norm1: f64, norm2: f64 },

    #[error("probe run diverged at step {step}")]
    ProbeDiverged { step: u64 },

    #[error("Monte Carlo chain {chain} (master seed {seed}) produced a non-finite value")]
    NonFiniteChain { chain: u64, seed: u64 },

    #[error("need at least {min} chains, got {got}")]
    TooFewChains { min: u64, got: u64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
