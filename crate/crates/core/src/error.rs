use thiserror::Error;

/// Errors raised by the sampler, the schedule and the reference machinery.
#[derive(Debug, Error)]
pub enum SabcError {
    #[error("at least 2 prior samples are required to build an energy table, got {0}")]
    TooFewSamples(usize),

    #[error("non-finite distance {value} for statistic {stat} in sample {sample}")]
    NonFiniteDistance {
        stat: usize,
        sample: usize,
        value: f64,
    },

    #[error("negative distance {value} for statistic {stat} in sample {sample}")]
    NegativeDistance {
        stat: usize,
        sample: usize,
        value: f64,
    },

    #[error("statistic index {index} out of range for {n_stats} statistics")]
    StatIndex { index: usize, n_stats: usize },

    #[error("distance is NaN")]
    NanDistance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inverse temperature must be finite and non-negative, got {0}")]
    InvalidBeta(f64),

    #[error("energy density {0} lies above the prior mean 1/2")]
    EnergyAboveHalf(f64),

    #[error("temperature overflow on statistic {stat}: energy density {u:e} at or below floor")]
    TemperatureOverflow { stat: usize, u: f64 },

    #[error("simulation failed for particle {particle}: {reason}")]
    Simulation { particle: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("{0}")]
    Oracle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SabcError>;
