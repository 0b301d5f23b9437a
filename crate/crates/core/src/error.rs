use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("world is already terminal ({0:?}); reset before stepping")]
    TerminalWorld(crate::sim::Terminal),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid config `{path}`: {reason}")]
    InvalidConfig { path: String, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("action index {0} out of range (0..8)")]
    ActionOutOfRange(usize),

    #[error("tournament size {t} exceeds population size {k}")]
    TournamentTooLarge { t: usize, k: usize },

    #[error("population has unevaluated individual at index {0}")]
    Unevaluated(usize),

    #[error("trajectories do not overlap in arc length")]
    EmptyOverlap,

    #[error("format error: {0}")]
    Format(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidConfig {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
