//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the clearsky pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("segment must be non-empty")]
    EmptySegment,

    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("segment longer than signal (length {length}, signal {signal_len})")]
    SegmentLongerThanSignal { length: usize, signal_len: usize },

    #[error("hop must be at least 1")]
    ZeroHop,

    #[error("segment length must be at least 1")]
    ZeroLength,

    #[error("nfft {nfft} exceeds signal length {signal_len}")]
    NfftExceedsSignal { nfft: usize, signal_len: usize },

    #[error("overlap fraction must be in [0, 1), got {0}")]
    InvalidOverlap(f64),

    #[error("malformed IQ file: {0}")]
    MalformedIqFile(String),

    #[error("missing metadata: {0}")]
    MissingMetadata(String),

    #[error("invalid waveform spec: {0}")]
    InvalidSpec(String),

    #[error("mismatched inputs: {0}")]
    MismatchedInputs(String),

    #[error("wrong segment length: expected {expected}, got {got}")]
    WrongSegmentLength { expected: usize, got: usize },

    #[error("need at least {min} segments, got {got}")]
    TooFewSegments { min: usize, got: usize },

    #[error("degenerate distribution: zero variance, skewness and kurtosis undefined")]
    DegenerateDistribution,

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("non-finite activation at time step {step}")]
    NonFiniteActivation { step: usize },

    #[error("class {0} absent from training split")]
    MissingClass(String),

    #[error("unknown label {0}")]
    UnknownLabel(String),

    #[error("unsupported model format: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
