use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("could not parse config: {0}")]
    ConfigSyntax(#[from] toml::de::Error),

    #[error("{what} references unknown video id {id}")]
    DanglingVideo { what: String, id: u32 },

    #[error("{what} out of range: {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("model selection must be one-hot, got {0:?}")]
    Selection(Vec<f64>),

    #[error("DT processing ({xi_s:.3} s) overruns the reservation window ({window_s} s)")]
    Overrun { xi_s: f64, window_s: f64 },

    #[error("multicast rate is zero for group {group}")]
    ZeroRate { group: usize },

    #[error("expected segment count is zero")]
    ZeroSegments,

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("design matrix is rank deficient (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("series too short: need at least 2 samples, got {0}")]
    SeriesTooShort(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("gradient tape was recorded against an older parameter version")]
    StaleTape,

    #[error("non-finite gradient at parameter {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("network architectures differ: {0:?} vs {1:?}")]
    Architecture(Vec<usize>, Vec<usize>),

    #[error("replay buffer holds {len} transitions, batch needs {batch}")]
    BufferUnderflow { len: usize, batch: usize },

    #[error("brute-force guard: {0}")]
    Guard(String),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::ConfigSyntax(_)
                | Error::DanglingVideo { .. }
                | Error::Plan(_)
        )
    }
}
