//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector must be non-empty")]
    EmptyVector,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix: pivot {pivot:.3e} below threshold {threshold:.3e} at step {step}")]
    SingularMatrix {
        pivot: f64,
        threshold: f64,
        step: usize,
    },

    #[error("singular channel: DFT bin {bin} has magnitude {magnitude:.3e}")]
    SingularChannel { bin: usize, magnitude: f64 },

    #[error("channel has {taps} taps but the block length is {n}")]
    ChannelTooLong { taps: usize, n: usize },

    #[error("cyclic prefix length {ncp} exceeds block length {len}")]
    CpTooLong { ncp: usize, len: usize },

    #[error("roll-off factor {0} outside [0, 1]")]
    InvalidRolloff(f64),

    #[error("modulation matrix ill-conditioned (K={k}, M={m}, a={rolloff}): cond {cond:.3e}")]
    IllConditioned {
        k: usize,
        m: usize,
        rolloff: f64,
        cond: f64,
    },

    #[error("invalid waveform spec: {0}")]
    InvalidWaveform(String),

    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error("corrupt dataset file: {0}")]
    DatasetFile(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidWaveform(_)
            | Error::InvalidProfile(_)
            | Error::UnknownModel(_)
            | Error::InvalidRolloff(_) => 2,
            Error::Io(_) | Error::Checkpoint(_) | Error::DatasetFile(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
