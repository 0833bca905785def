use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CpgError {
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid oscillator parameters: {0}")]
    InvalidParams(String),
    #[error("composition weights ({w1}, {w2}) are not on the simplex")]
    InvalidWeights { w1: f64, w2: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step {dt} exceeds the stability bound {max}")]
    UnstableStep { dt: f64, max: f64 },
    #[error("insufficient cycles: {0} upward crossings")]
    InsufficientCycles(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid robot configuration: {0}")]
    InvalidConfig(String),
    #[error("obstacle {index} overlaps the robot at spawn")]
    SpawnOverlap { index: usize },
    #[error("non-finite robot state")]
    NonFinite,
    #[error("negative sensor reading {value} on body {body}")]
    NegativeReading { body: usize, value: f64 },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cpg(#[from] CpgError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("singular repulsion: robot coincides with obstacle {index}")]
    SingularRepulsion { index: usize },
    #[error("invalid field parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("input width {got} does not match network width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Cpg(#[from] CpgError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("no collision-free spawn after {0} attempts")]
    SpawnExhausted(usize),
    #[error("no episodes to aggregate")]
    NoEpisodes,
}
