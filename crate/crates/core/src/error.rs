use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("site index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid interval ({t1}, {t2}]")]
    InvalidInterval { t1: f64, t2: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("horizon {horizon} too short; need at least {needed}")]
    HorizonTooShort { needed: f64, horizon: f64 },

    #[error("horizon must be positive, got {0}")]
    NonpositiveHorizon(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model generator: {0}")]
    Generator(String),

    #[error("n = {n} exceeds cap {max} for exact computation")]
    TooLarge { n: usize, max: usize },

    #[error("no occupancy samples for site {site}, local configuration {key:#b}")]
    NoOccupancy { site: usize, key: u64 },

    #[error(
        "no subcube for edge ({i},{j}) reaches min_samples = {min_samples} (best achieved {best})"
    )]
    NoSubcube {
        i: usize,
        j: usize,
        min_samples: u64,
        best: u64,
    },

    #[error("zero flip rate in coupling ratio for edge ({i},{j})")]
    ZeroRate { i: usize, j: usize },

    #[error("no local configuration of site {site} has both orientations adequately sampled")]
    NoFieldCandidate { site: usize },

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("parse error at {at}: {msg}")]
    Parse { at: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
