//! Complex baseband sample containers, segmentation and power measurement.
//!
//! An [`IqSegment`] is the unit every stage of the pipeline operates on: a
//! non-empty vector of finite complex samples plus the rate they were captured
//! at. All operations here are pure; segments are immutable once built and
//! safe to share across threads.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A block of complex baseband samples at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSegment {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl IqSegment {
    /// Builds a segment, validating that samples are non-empty and finite and
    /// the sample rate is positive.
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySegment);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate_hz));
        }
        if let Some(idx) = samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::NonFiniteSample(idx));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // enforced non-empty at construction
    }
}

/// Mean squared magnitude of a segment (linear, dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMeasurement {
    pub mean_power: f64,
}

/// Mean of |x_n|^2 over all samples.
pub fn measure_power(segment: &IqSegment) -> PowerMeasurement {
    let sum: f64 = segment.samples.iter().map(|s| s.norm_sqr()).sum();
    PowerMeasurement {
        mean_power: sum / segment.len() as f64,
    }
}

/// Splits `signal` into `floor((N - length) / hop) + 1` segments of `length`
/// samples spaced `hop` apart. The trailing remainder is discarded; partial
/// segments would bias downstream error statistics.
pub fn segment(signal: &IqSegment, length: usize, hop: usize) -> Result<Vec<IqSegment>> {
    if length == 0 {
        return Err(Error::ZeroLength);
    }
    if hop == 0 {
        return Err(Error::ZeroHop);
    }
    let n = signal.len();
    if length > n {
        return Err(Error::SegmentLongerThanSignal {
            length,
            signal_len: n,
        });
    }
    let count = (n - length) / hop + 1;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * hop;
        out.push(IqSegment {
            samples: signal.samples[start..start + length].to_vec(),
            sample_rate_hz: signal.sample_rate_hz,
        });
    }
    Ok(out)
}
