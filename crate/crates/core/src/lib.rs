//! Interference management for satellite downlink IQ baseband.
//!
//! Two cooperating subsystems over 512-sample complex baseband segments:
//!
//! * **Detection** ([`autodetect`]): a sparse single-hidden-layer autoencoder
//!   is trained on interference-free segments with scaled conjugate gradient.
//!   Reconstruction-error statistics (mean, variance, skewness, kurtosis of
//!   the per-segment MSE vector) shift when interference is present; the
//!   detector thresholds the relative increase of variance and skewness
//!   against a clean-signal calibration baseline.
//! * **Classification** ([`lstmclass`]): a single-layer LSTM with 128 hidden
//!   units consumes four per-sample feature channels (time magnitude/phase,
//!   spectral magnitude/phase) and assigns one of three terrestrial
//!   interferer classes (LTE, UMTS, GSM) through a dense + softmax head,
//!   trained with Adam.
//!
//! Supporting modules provide sample containers and spectral analysis
//! ([`iq`], [`spectrum`], [`iqfile`]) and deterministic surrogate waveform
//! synthesis plus the SNR/SIR mixing model ([`wavegen`]).

pub mod autodetect;
pub mod error;
pub mod iq;
pub mod iqfile;
pub mod lstmclass;
pub mod numfmt;
pub mod spectrum;
pub mod wavegen;

pub use error::{Error, Result};
pub use iq::IqSegment;

/// Canonical processing segment length in complex samples.
pub const SEGMENT_LEN: usize = 512;
