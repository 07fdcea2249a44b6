//! Spectral transforms: forward DFT and Welch power spectral density.
//!
//! The DFT uses the plain forward convention `X_k = sum_n x_n exp(-j2πkn/N)`
//! with no normalization, so Parseval reads `sum |x|^2 = (1/N) sum |X|^2`.
//! PSD estimates are two-sided (complex baseband) with frequencies ordered
//! from -fs/2 upward.

use std::cell::RefCell;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::iq::IqSegment;
use crate::numfmt::format_g12;

/// dB floor substituted for zero or denormal power bins.
pub const DB_FLOOR: f64 = -300.0;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

/// Length-preserving forward DFT of a segment.
pub fn dft(segment: &IqSegment) -> Vec<Complex64> {
    let mut buf = segment.samples().to_vec();
    plan_forward(buf.len()).process(&mut buf);
    buf
}

/// Two-sided power spectral density estimate in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub frequencies_hz: Vec<f64>,
    pub power_db: Vec<f64>,
}

impl PsdEstimate {
    /// Writes the estimate as CSV with header `frequency_hz,power_db`, one
    /// row per bin, values formatted `%.12g`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "frequency_hz,power_db")?;
        for (f, p) in self.frequencies_hz.iter().zip(&self.power_db) {
            writeln!(out, "{},{}", format_g12(*f), format_g12(*p))?;
        }
        Ok(())
    }
}

/// Welch averaged-periodogram PSD with a periodic Hann window.
///
/// Normalization: white noise of variance σ² yields a flat estimate of
/// σ²/nfft per bin before dB conversion. Output bins run from -fs/2 upward in
/// steps of fs/nfft; zero-power bins clamp at [`DB_FLOOR`].
pub fn welch_psd(signal: &IqSegment, nfft: usize, overlap_fraction: f64) -> Result<PsdEstimate> {
    if nfft == 0 {
        return Err(Error::ZeroLength);
    }
    if nfft > signal.len() {
        return Err(Error::NfftExceedsSignal {
            nfft,
            signal_len: signal.len(),
        });
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidOverlap(overlap_fraction));
    }

    let window: Vec<f64> = (0..nfft)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / nfft as f64).cos()))
        .collect();
    let window_sq_sum: f64 = window.iter().map(|w| w * w).sum();

    let overlap = (nfft as f64 * overlap_fraction).floor() as usize;
    let hop = (nfft - overlap).max(1);
    let num_segments = (signal.len() - nfft) / hop + 1;

    let fft = plan_forward(nfft);
    let mut acc = vec![0.0f64; nfft];
    let mut buf = vec![Complex64::default(); nfft];
    for s in 0..num_segments {
        let start = s * hop;
        for (n, slot) in buf.iter_mut().enumerate() {
            *slot = signal.samples()[start + n] * window[n];
        }
        fft.process(&mut buf);
        for (slot, x) in acc.iter_mut().zip(&buf) {
            *slot += x.norm_sqr();
        }
    }

    let scale = 1.0 / (num_segments as f64 * nfft as f64 * window_sq_sum);
    let fs = signal.sample_rate_hz();
    let half = nfft / 2;
    let mut frequencies_hz = Vec::with_capacity(nfft);
    let mut power_db = Vec::with_capacity(nfft);
    // fftshift so frequencies increase from -fs/2
    for k in 0..nfft {
        let src = (k + nfft - half) % nfft;
        let f = (k as f64 - half as f64) * fs / nfft as f64;
        let p = acc[src] * scale;
        let db = if p > 0.0 {
            (10.0 * p.log10()).max(DB_FLOOR)
        } else {
            DB_FLOOR
        };
        frequencies_hz.push(f);
        power_db.push(db);
    }

    Ok(PsdEstimate {
        frequencies_hz,
        power_db,
    })
}
