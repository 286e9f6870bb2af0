use thiserror::Error;

/// Errors raised by the planning toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to parse configuration: {0}")]
    ConfigParse(String),

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("AP {ap} has {strong} strong UEs with {antennas} antennas; at most {max} allowed")]
    StrongSetTooLarge {
        ap: usize,
        strong: usize,
        antennas: usize,
        max: usize,
    },

    #[error("full zero-forcing needs more antennas than UEs (N = {antennas}, K = {ues})")]
    ZeroForcingInfeasible { antennas: usize, ues: usize },

    #[error("singular Gram matrix at AP {ap} after {attempts} draws")]
    SingularGram { ap: usize, attempts: usize },

    #[error("population of {size} is too small for this strategy (needs {needed})")]
    PopulationTooSmall { size: usize, needed: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
