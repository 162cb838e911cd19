use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game spec: {0}")]
    InvalidSpec(String),

    #[error("illegal action {action} in state {state}")]
    IllegalAction { state: String, action: usize },

    #[error("operation requires a non-terminal state")]
    TerminalState,

    #[error("regularization weights must be non-negative with alpha + beta > 0 (alpha={alpha}, beta={beta})")]
    InvalidWeights { alpha: f64, beta: f64 },

    #[error("legal masks of the operands differ")]
    MaskMismatch,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("reference distribution has zero mass on legal action {action} where the candidate is positive")]
    ZeroReference { action: usize },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("{name} out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("state key not present in tabular parameters")]
    UnknownState,

    #[error("episode exceeded {0} plies")]
    EpisodeTooLong(usize),

    #[error("need at least 2 rollouts, got {0}")]
    InsufficientRollouts(usize),

    #[error("win rate {0} maps to an unbounded rating")]
    UnboundedRating(f64),

    #[error("agent {agent} chose illegal action {action}; transcript: {transcript:?}")]
    IllegalAgentMove {
        agent: String,
        action: usize,
        transcript: Vec<usize>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
