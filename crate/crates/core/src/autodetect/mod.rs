//! Interference detection through autoencoder reconstruction error.
//!
//! A single-hidden-layer sparse autoencoder (sigmoid encoder, affine decoder)
//! is trained on interference-free segments with scaled conjugate gradient.
//! Each test segment yields a mean squared reconstruction error; the
//! statistics of the resulting MSE vector shift when the input distribution
//! changes. The detector compares the first four moments against a
//! calibration baseline taken on clean holdout segments and flags
//! interference when the relative increase of the variance or the skewness
//! exceeds its threshold. Mean and kurtosis are reported but carry no
//! decision weight.

pub mod scg;

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iq::IqSegment;

use self::scg::{minimize, ScgObjective, ScgOptions};

const MODEL_VERSION: u32 = 1;
/// Normalized feature range endpoints keeping the sigmoid responsive.
const NORM_LO: f64 = 0.1;
const NORM_HI: f64 = 0.9;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Input normalization
// ---------------------------------------------------------------------------

/// Per-dimension affine map learned from the training corpus: the corpus
/// minimum maps to 0.1 and the maximum to 0.9. Values outside the training
/// range clamp to the interval endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScale {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl InputScale {
    /// Learns per-dimension minima and maxima from featurized rows.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::EmptySegment);
        }
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            assert_eq!(row.len(), dim, "inconsistent row width");
            for (i, &v) in row.iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn apply_dim(&self, i: usize, v: f64) -> f64 {
        let span = self.max[i] - self.min[i];
        if span <= 0.0 {
            return 0.5 * (NORM_LO + NORM_HI);
        }
        let mapped = NORM_LO + (NORM_HI - NORM_LO) * (v - self.min[i]) / span;
        mapped.clamp(NORM_LO, NORM_HI)
    }
}

/// Interleaves I and Q into a length-`2n` real vector and applies the stored
/// affine normalization. Errors when the segment length disagrees with the
/// scale's dimensionality.
pub fn featurize_segment(segment: &IqSegment, scale: &InputScale) -> Result<Vec<f64>> {
    let d = scale.dim();
    if segment.len() * 2 != d {
        return Err(Error::WrongSegmentLength {
            expected: d / 2,
            got: segment.len(),
        });
    }
    let mut out = Vec::with_capacity(d);
    for (n, s) in segment.samples().iter().enumerate() {
        out.push(scale.apply_dim(2 * n, s.re));
        out.push(scale.apply_dim(2 * n + 1, s.im));
    }
    Ok(out)
}

fn interleave_raw(segment: &IqSegment) -> Vec<f64> {
    let mut out = Vec::with_capacity(segment.len() * 2);
    for s in segment.samples() {
        out.push(s.re);
        out.push(s.im);
    }
    out
}

fn segment_digest(segment: &IqSegment) -> u64 {
    // FNV-1a over the sample bit patterns
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut mix = |bits: u64| {
        for byte in bits.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
    };
    for s in segment.samples() {
        mix(s.re.to_bits());
        mix(s.im.to_bits());
    }
    hash
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Hyperparameters for autoencoder training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    /// Hidden units; must stay below the input dimensionality.
    pub hidden_size: usize,
    /// L2 weight regularization coefficient.
    pub lambda: f64,
    /// Target mean activation of each hidden unit.
    pub sparsity_proportion: f64,
    /// Weight of the KL sparsity penalty.
    pub sparsity_weight: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        // lambda is calibrated against the per-dimension reconstruction
        // scale: at 1e-4 the Frobenius penalty on a 1024-dim model exceeds
        // the achievable reconstruction gain and training collapses to the
        // column-mean predictor.
        Self {
            hidden_size: 16,
            lambda: 1e-6,
            sparsity_proportion: 0.1,
            sparsity_weight: 1.0,
            max_iters: 800,
            grad_tol: 1e-6,
        }
    }
}

/// Sparse single-hidden-layer autoencoder: sigmoid encoder, affine decoder.
#[derive(Debug, Clone)]
pub struct SparseAutoencoder {
    w_enc: Array2<f64>, // h x d
    b_enc: Array1<f64>, // h
    w_dec: Array2<f64>, // d x h
    b_dec: Array1<f64>, // d
    lambda: f64,
    rho_s: f64,
    beta_s: f64,
    input_scale: InputScale,
    /// Digests of the training segments; held in memory only (the model file
    /// schema does not carry them), so overlap warnings are available for
    /// freshly trained models.
    train_digests: BTreeSet<u64>,
}

impl SparseAutoencoder {
    /// Assembles a model from explicit parts. Unlike [`SparseAutoencoder::train`],
    /// no bottleneck (`h < d`) is enforced, which permits e.g. identity
    /// configurations in tests.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        w_enc: Array2<f64>,
        b_enc: Array1<f64>,
        w_dec: Array2<f64>,
        b_dec: Array1<f64>,
        lambda: f64,
        rho_s: f64,
        beta_s: f64,
        input_scale: InputScale,
    ) -> Result<Self> {
        let (h, d) = w_enc.dim();
        if w_dec.dim() != (d, h) || b_enc.len() != h || b_dec.len() != d {
            return Err(Error::ModelFormat(format!(
                "inconsistent shapes: w_enc {:?}, w_dec {:?}, b_enc {}, b_dec {}",
                w_enc.dim(),
                w_dec.dim(),
                b_enc.len(),
                b_dec.len()
            )));
        }
        if input_scale.dim() != d {
            return Err(Error::ModelFormat(format!(
                "input scale dimension {} does not match d = {}",
                input_scale.dim(),
                d
            )));
        }
        if !(0.0 < rho_s && rho_s < 1.0) {
            return Err(Error::ModelFormat(format!(
                "sparsity proportion must lie in (0, 1), got {rho_s}"
            )));
        }
        let finite = w_enc.iter().all(|v| v.is_finite())
            && w_dec.iter().all(|v| v.is_finite())
            && b_enc.iter().all(|v| v.is_finite())
            && b_dec.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::ModelFormat("non-finite weight".into()));
        }
        Ok(Self {
            w_enc,
            b_enc,
            w_dec,
            b_dec,
            lambda,
            rho_s,
            beta_s,
            input_scale,
            train_digests: BTreeSet::new(),
        })
    }

    /// Input dimensionality (twice the segment length).
    pub fn input_dim(&self) -> usize {
        self.w_enc.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_enc.nrows()
    }

    pub fn input_scale(&self) -> &InputScale {
        &self.input_scale
    }

    /// Trains on clean segments: learns the input normalization, initializes
    /// weights from `seed` and minimizes the sparse reconstruction loss with
    /// scaled conjugate gradient. Returns the model and its loss history.
    pub fn train(
        clean_segments: &[IqSegment],
        config: &AutoencoderConfig,
        seed: u64,
    ) -> Result<(Self, Vec<f64>)> {
        if clean_segments.is_empty() {
            return Err(Error::TooFewSegments { min: 1, got: 0 });
        }
        let d = clean_segments[0].len() * 2;
        let h = config.hidden_size;
        if h == 0 || h >= d {
            return Err(Error::ModelFormat(format!(
                "hidden size {h} must satisfy 0 < h < d = {d}"
            )));
        }

        let raw: Vec<Vec<f64>> = clean_segments.iter().map(interleave_raw).collect();
        let input_scale = InputScale::fit(&raw)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = (6.0 / (d + h) as f64).sqrt();
        let w_enc = Array2::from_shape_fn((h, d), |_| rng.gen_range(-r..r));
        let w_dec = Array2::from_shape_fn((d, h), |_| rng.gen_range(-r..r));
        // start at the sparsity target so the KL term opens flat
        let rho = config.sparsity_proportion;
        let b_enc = Array1::from_elem(h, (rho / (1.0 - rho)).ln());
        let mut model = Self {
            w_enc,
            b_enc,
            w_dec,
            b_dec: Array1::zeros(d),
            lambda: config.lambda,
            rho_s: config.sparsity_proportion,
            beta_s: config.sparsity_weight,
            input_scale,
            train_digests: clean_segments.iter().map(segment_digest).collect(),
        };

        let batch = model.featurize_batch(clean_segments)?;
        // decoder bias at the column means: training starts from the
        // mean predictor instead of spending iterations on plain bias
        model.b_dec = batch.mean_axis(Axis(0)).expect("non-empty batch");
        scg_train(model, &batch, config.max_iters, config.grad_tol)
    }

    /// Featurizes segments into an N x d matrix.
    pub fn featurize_batch(&self, segments: &[IqSegment]) -> Result<Array2<f64>> {
        let d = self.input_dim();
        let mut batch = Array2::zeros((segments.len(), d));
        for (mut row, seg) in batch.axis_iter_mut(Axis(0)).zip(segments) {
            let f = featurize_segment(seg, &self.input_scale)?;
            for (slot, v) in row.iter_mut().zip(f) {
                *slot = v;
            }
        }
        Ok(batch)
    }

    fn param_count(&self) -> usize {
        let (h, d) = (self.hidden_size(), self.input_dim());
        h * d + h + d * h + d
    }

    fn pack_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.w_enc.iter());
        out.extend(self.b_enc.iter());
        out.extend(self.w_dec.iter());
        out.extend(self.b_dec.iter());
        out
    }

    fn unpack_params(&mut self, params: &[f64]) {
        let (h, d) = (self.hidden_size(), self.input_dim());
        let (we, rest) = params.split_at(h * d);
        let (be, rest) = rest.split_at(h);
        let (wd, bd) = rest.split_at(d * h);
        self.w_enc = Array2::from_shape_vec((h, d), we.to_vec()).unwrap();
        self.b_enc = Array1::from_vec(be.to_vec());
        self.w_dec = Array2::from_shape_vec((d, h), wd.to_vec()).unwrap();
        self.b_dec = Array1::from_vec(bd.to_vec());
    }
}

// ---------------------------------------------------------------------------
// Loss and gradient
// ---------------------------------------------------------------------------

struct AeLossParts<'a> {
    x: &'a Array2<f64>,
    h: usize,
    d: usize,
    lambda: f64,
    rho_s: f64,
    beta_s: f64,
}

const RHO_CLAMP: f64 = 1e-12;

impl AeLossParts<'_> {
    fn views<'p>(
        &self,
        params: &'p [f64],
    ) -> (
        ArrayView2<'p, f64>,
        ArrayView1<'p, f64>,
        ArrayView2<'p, f64>,
        ArrayView1<'p, f64>,
    ) {
        let (h, d) = (self.h, self.d);
        let (we, rest) = params.split_at(h * d);
        let (be, rest) = rest.split_at(h);
        let (wd, bd) = rest.split_at(d * h);
        (
            ArrayView2::from_shape((h, d), we).unwrap(),
            ArrayView1::from_shape(h, be).unwrap(),
            ArrayView2::from_shape((d, h), wd).unwrap(),
            ArrayView1::from_shape(d, bd).unwrap(),
        )
    }

    fn loss_and_grad(&self, params: &[f64], mut grad_out: Option<&mut [f64]>) -> f64 {
        let (w_enc, b_enc, w_dec, b_dec) = self.views(params);
        let n = self.x.nrows() as f64;
        let d = self.d as f64;

        let mut z = self.x.dot(&w_enc.t());
        z += &b_enc;
        let a = z.mapv(sigmoid);
        let mut xhat = a.dot(&w_dec.t());
        xhat += &b_dec;
        let resid = &xhat - self.x;

        let recon = resid.iter().map(|r| r * r).sum::<f64>() / (n * d);
        let l2 = self.lambda
            * (w_enc.iter().map(|w| w * w).sum::<f64>()
                + w_dec.iter().map(|w| w * w).sum::<f64>());

        let rho_hat = a
            .mean_axis(Axis(0))
            .expect("non-empty batch")
            .mapv(|r| r.clamp(RHO_CLAMP, 1.0 - RHO_CLAMP));
        let rho = self.rho_s;
        let kl: f64 = rho_hat
            .iter()
            .map(|&rh| rho * (rho / rh).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - rh)).ln())
            .sum();

        let loss = recon + l2 + self.beta_s * kl;

        if let Some(grad) = grad_out.take() {
            // d(recon)/d(xhat)
            let g = resid.mapv(|r| 2.0 * r / (n * d));
            let dw_dec = g.t().dot(&a) + &(&w_dec * (2.0 * self.lambda));
            let db_dec = g.sum_axis(Axis(0));

            let mut da = g.dot(&w_dec);
            if self.beta_s != 0.0 {
                let s = rho_hat.mapv(|rh| {
                    self.beta_s / n * (-rho / rh + (1.0 - rho) / (1.0 - rh))
                });
                da += &s;
            }
            let dz = da * &a.mapv(|v| v) * &a.mapv(|v| 1.0 - v);
            let dw_enc = dz.t().dot(self.x) + &(&w_enc * (2.0 * self.lambda));
            let db_enc = dz.sum_axis(Axis(0));

            let (h_sz, d_sz) = (self.h, self.d);
            let (ge, rest) = grad.split_at_mut(h_sz * d_sz);
            let (gbe, rest) = rest.split_at_mut(h_sz);
            let (gd, gbd) = rest.split_at_mut(d_sz * h_sz);
            for (slot, v) in ge.iter_mut().zip(dw_enc.iter()) {
                *slot = *v;
            }
            for (slot, v) in gbe.iter_mut().zip(db_enc.iter()) {
                *slot = *v;
            }
            for (slot, v) in gd.iter_mut().zip(dw_dec.iter()) {
                *slot = *v;
            }
            for (slot, v) in gbd.iter_mut().zip(db_dec.iter()) {
                *slot = *v;
            }
        }
        loss
    }
}

impl ScgObjective for AeLossParts<'_> {
    fn dim(&self) -> usize {
        self.h * self.d + self.h + self.d * self.h + self.d
    }
    fn eval(&self, params: &[f64]) -> f64 {
        self.loss_and_grad(params, None)
    }
    fn eval_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        self.loss_and_grad(params, Some(grad))
    }
}

/// Loss and exact analytic gradient of the sparse autoencoder objective on a
/// featurized batch: mean per-row squared reconstruction error divided by the
/// input dimension, plus L2 weight decay on both weight matrices, plus the
/// KL sparsity penalty between the target proportion and the batch-mean
/// hidden activations (clamped away from {0, 1}).
///
/// The gradient is packed `[w_enc, b_enc, w_dec, b_dec]` row-major.
pub fn ae_loss_and_grad(model: &SparseAutoencoder, batch: &Array2<f64>) -> (f64, Vec<f64>) {
    assert_eq!(batch.ncols(), model.input_dim(), "batch width must equal d");
    let parts = AeLossParts {
        x: batch,
        h: model.hidden_size(),
        d: model.input_dim(),
        lambda: model.lambda,
        rho_s: model.rho_s,
        beta_s: model.beta_s,
    };
    let params = model.pack_params();
    let mut grad = vec![0.0; params.len()];
    let loss = parts.loss_and_grad(&params, Some(&mut grad));
    (loss, grad)
}

/// Full-batch scaled conjugate gradient training. Returns the trained model
/// and the loss history over accepted steps (non-increasing).
pub fn scg_train(
    mut model: SparseAutoencoder,
    data: &Array2<f64>,
    max_iters: usize,
    grad_tol: f64,
) -> Result<(SparseAutoencoder, Vec<f64>)> {
    if data.nrows() == 0 {
        return Err(Error::TooFewSegments { min: 1, got: 0 });
    }
    assert_eq!(data.ncols(), model.input_dim(), "data width must equal d");
    let parts = AeLossParts {
        x: data,
        h: model.hidden_size(),
        d: model.input_dim(),
        lambda: model.lambda,
        rho_s: model.rho_s,
        beta_s: model.beta_s,
    };
    let opts = ScgOptions {
        max_iters,
        grad_tol,
        ..Default::default()
    };
    let outcome = minimize(&parts, model.pack_params(), &opts)?;
    model.unpack_params(&outcome.params);
    Ok((model, outcome.loss_history))
}

// ---------------------------------------------------------------------------
// Reconstruction and MSE statistics
// ---------------------------------------------------------------------------

/// Reconstructs one segment; returns the decoded feature vector and the mean
/// squared reconstruction error `||f - dec(enc(f))||^2 / d`.
pub fn reconstruct(model: &SparseAutoencoder, segment: &IqSegment) -> Result<(Vec<f64>, f64)> {
    let f = featurize_segment(segment, &model.input_scale)?;
    let x = ArrayView1::from_shape(f.len(), &f).unwrap();
    let mut z = model.w_enc.dot(&x);
    z += &model.b_enc;
    let a = z.mapv(sigmoid);
    let mut recon = model.w_dec.dot(&a);
    recon += &model.b_dec;
    let mse = f
        .iter()
        .zip(recon.iter())
        .map(|(v, r)| (v - r) * (v - r))
        .sum::<f64>()
        / f.len() as f64;
    Ok((recon.to_vec(), mse))
}

/// Ordered vector of per-segment mean squared reconstruction errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MseVector(Vec<f64>);

impl MseVector {
    /// Requires at least two finite, non-negative values so that moments are
    /// defined.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewSegments {
                min: 2,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::ModelFormat(
                "MSE values must be finite and non-negative".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-segment reconstruction errors in input order.
pub fn mse_vector(model: &SparseAutoencoder, segments: &[IqSegment]) -> Result<MseVector> {
    if segments.len() < 2 {
        return Err(Error::TooFewSegments {
            min: 2,
            got: segments.len(),
        });
    }
    let values = segments
        .iter()
        .map(|s| reconstruct(model, s).map(|(_, mse)| mse))
        .collect::<Result<Vec<f64>>>()?;
    MseVector::new(values)
}

/// First four statistical moments of an MSE vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Mean and the (N-1)-normalized sample variance.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, variance)
}

/// Computes mean, sample variance (1/(N-1)), and standardized skewness and
/// kurtosis (central third and fourth moments averaged over N, normalized by
/// variance powers). Errors with a degenerate-distribution diagnostic when
/// the variance is zero.
pub fn moments(v: &MseVector) -> Result<MomentSummary> {
    let values = v.values();
    let n = values.len() as f64;
    let (mean, variance) = mean_and_variance(values);
    if variance == 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in values {
        let c = x - mean;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m3 /= n;
    m4 /= n;
    Ok(MomentSummary {
        mean,
        variance,
        skewness: m3 / variance.powf(1.5),
        kurtosis: m4 / (variance * variance),
    })
}

// ---------------------------------------------------------------------------
// Calibration and detection
// ---------------------------------------------------------------------------

/// Detection thresholds as relative increases over the baseline.
///
/// Defaults are calibrated on 200-segment MSE vectors, where the sampling
/// noise of the variance is roughly 10-15% and the skewness ratio is heavy
/// tailed whenever the baseline skewness sits near zero. Both defaults lie
/// between the noise-level moment shifts (a few percent) and the shifts
/// observed under interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorThresholds {
    /// Relative variance increase flagging interference (+35% default).
    pub variance_threshold: f64,
    /// Relative skewness increase flagging interference (+200% default).
    pub skewness_threshold: f64,
}

impl Default for DetectorThresholds {
    fn default() -> Self {
        Self {
            variance_threshold: 0.35,
            skewness_threshold: 2.00,
        }
    }
}

/// Clean-signal moment baseline plus decision thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorCalibration {
    pub baseline: MomentSummary,
    pub variance_threshold: f64,
    pub skewness_threshold: f64,
    /// True when calibration segments overlapped the training set; the
    /// baseline is then biased low because training errors shrink toward
    /// zero.
    #[serde(default)]
    pub training_overlap: bool,
}

/// Establishes the clean baseline from holdout segments. Calibrating on the
/// training segments themselves is permitted but flagged (and logged),
/// because their reconstruction error is biased low.
pub fn calibrate(
    model: &SparseAutoencoder,
    clean_segments: &[IqSegment],
    thresholds: &DetectorThresholds,
) -> Result<DetectorCalibration> {
    if !(thresholds.variance_threshold > 0.0 && thresholds.skewness_threshold > 0.0) {
        return Err(Error::ModelFormat("thresholds must be positive".into()));
    }
    let baseline = moments(&mse_vector(model, clean_segments)?)?;
    let training_overlap = !model.train_digests.is_empty()
        && clean_segments
            .iter()
            .any(|s| model.train_digests.contains(&segment_digest(s)));
    if training_overlap {
        log::warn!(
            "calibration segments overlap the training set; baseline MSE is biased low"
        );
    }
    Ok(DetectorCalibration {
        baseline,
        variance_threshold: thresholds.variance_threshold,
        skewness_threshold: thresholds.skewness_threshold,
        training_overlap,
    })
}

/// Relative increase of each moment over the baseline (+0.443 means +44.3%).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIncrease {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Outcome of a detection run; serializes directly as the detection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionDecision {
    pub interference_detected: bool,
    pub baseline: MomentSummary,
    pub observed: MomentSummary,
    pub relative_increase: MomentIncrease,
    pub variance_threshold: f64,
    pub skewness_threshold: f64,
}

fn relative_increase(observed: f64, baseline: f64) -> f64 {
    (observed - baseline) / baseline.abs().max(1e-30)
}

/// Decides interference presence: flagged when the relative variance increase
/// exceeds the variance threshold or the relative skewness increase exceeds
/// the skewness threshold.
pub fn detect(
    model: &SparseAutoencoder,
    calibration: &DetectorCalibration,
    segments: &[IqSegment],
) -> Result<DetectionDecision> {
    let observed = moments(&mse_vector(model, segments)?)?;
    let base = &calibration.baseline;
    let relative = MomentIncrease {
        mean: relative_increase(observed.mean, base.mean),
        variance: relative_increase(observed.variance, base.variance),
        skewness: relative_increase(observed.skewness, base.skewness),
        kurtosis: relative_increase(observed.kurtosis, base.kurtosis),
    };
    let interference_detected = relative.variance > calibration.variance_threshold
        || relative.skewness > calibration.skewness_threshold;
    Ok(DetectionDecision {
        interference_detected,
        baseline: *base,
        observed,
        relative_increase: relative,
        variance_threshold: calibration.variance_threshold,
        skewness_threshold: calibration.skewness_threshold,
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AeModelFile {
    version: u32,
    d: usize,
    h: usize,
    lambda: f64,
    rho_s: f64,
    beta_s: f64,
    input_scale: InputScale,
    w_enc: Vec<f64>,
    b_enc: Vec<f64>,
    w_dec: Vec<f64>,
    b_dec: Vec<f64>,
}

impl SparseAutoencoder {
    /// Serializes to the versioned JSON model schema with flat row-major
    /// weight arrays. Training-set digests do not persist.
    pub fn to_json_value(&self) -> serde_json::Value {
        let file = AeModelFile {
            version: MODEL_VERSION,
            d: self.input_dim(),
            h: self.hidden_size(),
            lambda: self.lambda,
            rho_s: self.rho_s,
            beta_s: self.beta_s,
            input_scale: self.input_scale.clone(),
            w_enc: self.w_enc.iter().copied().collect(),
            b_enc: self.b_enc.to_vec(),
            w_dec: self.w_dec.iter().copied().collect(),
            b_dec: self.b_dec.to_vec(),
        };
        serde_json::to_value(file).expect("model serialization")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let file: AeModelFile = serde_json::from_value(value)?;
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        let w_enc = Array2::from_shape_vec((file.h, file.d), file.w_enc)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let w_dec = Array2::from_shape_vec((file.d, file.h), file.w_dec)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        Self::from_parts(
            w_enc,
            Array1::from_vec(file.b_enc),
            w_dec,
            Array1::from_vec(file.b_dec),
            file.lambda,
            file.rho_s,
            file.beta_s,
            file.input_scale,
        )
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json_value())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_json_value(serde_json::from_slice(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavegen::{generate, WaveformKind, WaveformSpec};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::Distribution;

    fn toy_scale(d: usize) -> InputScale {
        InputScale {
            min: vec![-1.0; d],
            max: vec![1.0; d],
        }
    }

    fn toy_model(d: usize, h: usize, seed: u64, lambda: f64, beta_s: f64) -> SparseAutoencoder {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = 0.5;
        SparseAutoencoder::from_parts(
            Array2::from_shape_fn((h, d), |_| rng.gen_range(-r..r)),
            Array1::from_shape_fn(h, |_| rng.gen_range(-r..r)),
            Array2::from_shape_fn((d, h), |_| rng.gen_range(-r..r)),
            Array1::from_shape_fn(d, |_| rng.gen_range(-r..r)),
            lambda,
            0.1,
            beta_s,
            toy_scale(d),
        )
        .unwrap()
    }

    fn random_batch(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.gen_range(0.1..0.9))
    }

    /// Central finite differences of the loss, step 1e-5.
    fn fd_gradient(model: &SparseAutoencoder, batch: &Array2<f64>) -> Vec<f64> {
        let params = model.pack_params();
        let parts = AeLossParts {
            x: batch,
            h: model.hidden_size(),
            d: model.input_dim(),
            lambda: model.lambda,
            rho_s: model.rho_s,
            beta_s: model.beta_s,
        };
        let step = 1e-5;
        (0..params.len())
            .map(|i| {
                let mut plus = params.clone();
                plus[i] += step;
                let mut minus = params.clone();
                minus[i] -= step;
                (parts.eval(&plus) - parts.eval(&minus)) / (2.0 * step)
            })
            .collect()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // each loss term exercised in isolation and combined
        for (seed, lambda, beta_s) in [
            (1u64, 0.0, 0.0),
            (2, 0.37, 0.0),
            (3, 0.0, 0.9),
            (4, 0.21, 0.7),
        ] {
            let model = toy_model(16, 4, seed, lambda, beta_s);
            let batch = random_batch(8, 16, seed + 100);
            let (_, grad) = ae_loss_and_grad(&model, &batch);
            let fd = fd_gradient(&model, &batch);
            let err = max_rel_err(&grad, &fd);
            assert!(
                err < 1e-4,
                "seed {seed} lambda {lambda} beta {beta_s}: max rel err {err}"
            );
        }
    }

    #[test]
    fn perfect_reconstruction_has_zero_loss() {
        // encoder with tiny gain keeps the sigmoid in its linear region;
        // the affine decoder inverts it exactly up to O(eps^3)
        let d = 6;
        let eps = 1e-6;
        let w_enc = Array2::eye(d) * eps;
        let w_dec = Array2::eye(d) * (4.0 / eps);
        let b_dec = Array1::from_elem(d, -2.0 / eps);
        let model = SparseAutoencoder::from_parts(
            w_enc,
            Array1::zeros(d),
            w_dec,
            b_dec,
            0.0,
            0.1,
            0.0,
            toy_scale(d),
        )
        .unwrap();
        let batch = random_batch(4, d, 5);
        let (loss, _) = ae_loss_and_grad(&model, &batch);
        assert!(loss < 1e-15, "loss {loss}");
    }

    #[test]
    fn sparsity_term_vanishes_at_target_proportion() {
        // all-zero encoder: activations sit at 0.5; target 0.5 gives KL = 0
        let d = 8;
        let h = 3;
        let model = SparseAutoencoder::from_parts(
            Array2::zeros((h, d)),
            Array1::zeros(h),
            Array2::zeros((d, h)),
            Array1::zeros(d),
            0.0,
            0.5,
            2.0,
            toy_scale(d),
        )
        .unwrap();
        let batch = random_batch(6, d, 6);
        let (loss, _) = ae_loss_and_grad(&model, &batch);
        // remaining loss is pure reconstruction of the batch by zeros
        let recon = batch.iter().map(|v| v * v).sum::<f64>() / (6.0 * d as f64);
        assert!((loss - recon).abs() < 1e-12, "sparsity term leaked: {loss} vs {recon}");
    }

    #[test]
    fn identity_capable_model_reconstructs_exactly() {
        let n = 4;
        let d = 2 * n;
        let eps = 1e-5;
        let model = SparseAutoencoder::from_parts(
            Array2::eye(d) * eps,
            Array1::zeros(d),
            Array2::eye(d) * (4.0 / eps),
            Array1::from_elem(d, -2.0 / eps),
            0.0,
            0.1,
            0.0,
            toy_scale(d),
        )
        .unwrap();
        let seg = IqSegment::new(
            vec![
                Complex64::new(0.3, -0.2),
                Complex64::new(-0.7, 0.5),
                Complex64::new(0.1, 0.9),
                Complex64::new(-0.4, -0.6),
            ],
            1.0,
        )
        .unwrap();
        let (_, mse) = reconstruct(&model, &seg).unwrap();
        assert!(mse < 1e-20, "mse {mse}");
    }

    #[test]
    fn reconstruct_rejects_wrong_length() {
        let model = toy_model(16, 4, 1, 0.0, 0.0);
        let seg = IqSegment::new(vec![Complex64::new(0.1, 0.1); 5], 1.0).unwrap();
        assert!(matches!(
            reconstruct(&model, &seg),
            Err(Error::WrongSegmentLength { expected: 8, got: 5 })
        ));
    }

    #[test]
    fn mse_vector_is_elementwise_and_ordered() {
        let model = toy_model(8, 2, 2, 0.0, 0.0);
        let segs: Vec<IqSegment> = (0..5)
            .map(|k| {
                IqSegment::new(
                    (0..4)
                        .map(|i| Complex64::new(0.1 * (k + i) as f64, -0.05 * i as f64))
                        .collect(),
                    1.0,
                )
                .unwrap()
            })
            .collect();
        let v = mse_vector(&model, &segs).unwrap();
        assert_eq!(v.len(), 5);
        // permuting inputs permutes outputs
        let mut reordered = segs.clone();
        reordered.reverse();
        let w = mse_vector(&model, &reordered).unwrap();
        let mut rev: Vec<f64> = w.values().to_vec();
        rev.reverse();
        assert_eq!(v.values(), rev.as_slice());
        // duplicates give duplicates
        let doubled: Vec<IqSegment> = segs.iter().chain(&segs).cloned().collect();
        let dv = mse_vector(&model, &doubled).unwrap();
        assert_eq!(&dv.values()[..5], v.values());
        assert_eq!(&dv.values()[5..], v.values());
        // fewer than two segments is an error
        assert!(matches!(
            mse_vector(&model, &segs[..1]),
            Err(Error::TooFewSegments { .. })
        ));
    }

    #[test]
    fn moments_of_constant_vector_degenerate() {
        let v = MseVector::new(vec![1.0; 4]).unwrap();
        let (mean, variance) = mean_and_variance(v.values());
        assert_eq!(mean, 1.0);
        assert_eq!(variance, 0.0);
        assert!(matches!(moments(&v), Err(Error::DegenerateDistribution)));
    }

    #[test]
    fn moments_of_gaussian_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = rand_distr::StandardNormal;
        let values: Vec<f64> = (0..100_000)
            .map(|_| {
                let x: f64 = normal.sample(&mut rng);
                x + 10.0 // keep values non-negative like an MSE vector
            })
            .collect();
        let m = moments(&MseVector::new(values).unwrap()).unwrap();
        assert!(m.skewness.abs() < 0.1, "skewness {}", m.skewness);
        assert!((m.kurtosis - 3.0).abs() < 0.15, "kurtosis {}", m.kurtosis);
    }

    /// Single-pass power sums about a provisional origin (first value),
    /// independent of the implementation's two-pass route. The shift keeps
    /// the binomial expansion away from catastrophic cancellation.
    fn moments_oracle(values: &[f64]) -> (f64, f64, f64, f64) {
        let n = values.len() as f64;
        let origin = values[0];
        let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
        for &x in values {
            let v = x - origin;
            s1 += v;
            s2 += v * v;
            s3 += v * v * v;
            s4 += v * v * v * v;
        }
        let m = s1 / n;
        let c2 = s2 - n * m * m;
        let c3 = s3 - 3.0 * m * s2 + 3.0 * m * m * s1 - n * m.powi(3);
        let c4 = s4 - 4.0 * m * s3 + 6.0 * m * m * s2 - 4.0 * m.powi(3) * s1 + n * m.powi(4);
        let var = c2 / (n - 1.0);
        (
            origin + m,
            var,
            (c3 / n) / var.powf(1.5),
            (c4 / n) / (var * var),
        )
    }

    #[test]
    fn moments_match_single_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let len = rng.gen_range(2usize..10_000);
            let values: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
            let v = MseVector::new(values.clone()).unwrap();
            let got = moments(&v).unwrap();
            let (m, var, skew, kurt) = moments_oracle(&values);
            // mean and variance carry their own scale; skewness and kurtosis
            // are standardized (O(1)) quantities, compared on that scale
            for (a, b, floor, name) in [
                (got.mean, m, 0.0, "mean"),
                (got.variance, var, 0.0, "variance"),
                (got.skewness, skew, 1.0, "skewness"),
                (got.kurtosis, kurt, 1.0, "kurtosis"),
            ] {
                let rel = (a - b).abs() / b.abs().max(floor).max(1e-300);
                assert!(rel < 1e-12, "trial {trial} {name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn detect_on_calibration_set_is_null() {
        let model = toy_model(16, 4, 3, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let segs: Vec<IqSegment> = (0..30)
            .map(|_| {
                IqSegment::new(
                    (0..8)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect(),
                    1.0,
                )
                .unwrap()
            })
            .collect();
        let cal = calibrate(&model, &segs, &DetectorThresholds::default()).unwrap();
        let decision = detect(&model, &cal, &segs).unwrap();
        assert!(!decision.interference_detected);
        assert_eq!(decision.relative_increase.mean, 0.0);
        assert_eq!(decision.relative_increase.variance, 0.0);
        assert_eq!(decision.relative_increase.skewness, 0.0);
        assert_eq!(decision.relative_increase.kurtosis, 0.0);
    }

    #[test]
    fn detect_is_invariant_to_segment_order() {
        let model = toy_model(16, 4, 5, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut segs: Vec<IqSegment> = (0..20)
            .map(|_| {
                IqSegment::new(
                    (0..8)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect(),
                    1.0,
                )
                .unwrap()
            })
            .collect();
        let cal = calibrate(&model, &segs[..10], &DetectorThresholds::default()).unwrap();
        let a = detect(&model, &cal, &segs[10..]).unwrap();
        segs[10..].reverse();
        let b = detect(&model, &cal, &segs[10..]).unwrap();
        assert_eq!(a.interference_detected, b.interference_detected);
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-12);
        assert!(rel(a.observed.mean, b.observed.mean) < 1e-12);
        assert!(rel(a.observed.variance, b.observed.variance) < 1e-11);
        assert!((a.observed.skewness - b.observed.skewness).abs() < 1e-11);
        assert!((a.observed.kurtosis - b.observed.kurtosis).abs() < 1e-10);
    }

    #[test]
    fn calibration_flags_training_overlap() {
        let spec = WaveformSpec::new(WaveformKind::Dvbs2Like, 32, 1.0e6, 0);
        let segs: Vec<IqSegment> = (0..8)
            .map(|k| generate(&spec.with_seed(k)).unwrap())
            .collect();
        let config = AutoencoderConfig {
            hidden_size: 4,
            max_iters: 5,
            ..Default::default()
        };
        let (model, _) = SparseAutoencoder::train(&segs, &config, 0).unwrap();
        let on_train = calibrate(&model, &segs, &DetectorThresholds::default()).unwrap();
        assert!(on_train.training_overlap);
        let fresh: Vec<IqSegment> = (100..108)
            .map(|k| generate(&spec.with_seed(k)).unwrap())
            .collect();
        let on_fresh = calibrate(&model, &fresh, &DetectorThresholds::default()).unwrap();
        assert!(!on_fresh.training_overlap);
    }

    #[test]
    fn empty_calibration_set_errors() {
        let model = toy_model(16, 4, 3, 0.0, 0.0);
        assert!(matches!(
            calibrate(&model, &[], &DetectorThresholds::default()),
            Err(Error::TooFewSegments { .. })
        ));
    }

    #[test]
    fn featurize_maps_corpus_into_normalized_range() {
        let spec = WaveformSpec::new(WaveformKind::Dvbs2Like, 64, 1.0e6, 3);
        let segs: Vec<IqSegment> = (0..10)
            .map(|k| generate(&spec.with_seed(k)).unwrap())
            .collect();
        let raw: Vec<Vec<f64>> = segs.iter().map(interleave_raw).collect();
        let scale = InputScale::fit(&raw).unwrap();
        assert_eq!(scale.dim(), 128);
        for seg in &segs {
            let f = featurize_segment(seg, &scale).unwrap();
            assert_eq!(f.len(), 128);
            for v in f {
                assert!((NORM_LO..=NORM_HI).contains(&v), "value {v} out of range");
            }
        }
        // corpus minimum of a dimension maps exactly to 0.1
        let dim = 17;
        let holder = segs
            .iter()
            .find(|s| {
                let r = interleave_raw(s);
                r[dim] == scale.min[dim]
            })
            .unwrap();
        let f = featurize_segment(holder, &scale).unwrap();
        assert_eq!(f[dim], NORM_LO);
    }

    #[test]
    fn training_loss_decreases_and_is_deterministic() {
        let spec = WaveformSpec::new(WaveformKind::Dvbs2Like, 64, 1.0e6, 0);
        let segs: Vec<IqSegment> = (0..20)
            .map(|k| generate(&spec.with_seed(k)).unwrap())
            .collect();
        let config = AutoencoderConfig {
            hidden_size: 8,
            max_iters: 60,
            ..Default::default()
        };
        let (model_a, history) = SparseAutoencoder::train(&segs, &config, 42).unwrap();
        assert!(history.len() > 1);
        assert!(history.last().unwrap() < history.first().unwrap());
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        let (model_b, _) = SparseAutoencoder::train(&segs, &config, 42).unwrap();
        for (a, b) in model_a.w_enc.iter().zip(model_b.w_enc.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn train_enforces_bottleneck() {
        let spec = WaveformSpec::new(WaveformKind::Awgn, 8, 1.0e6, 0);
        let segs: Vec<IqSegment> = (0..4)
            .map(|k| generate(&spec.with_seed(k)).unwrap())
            .collect();
        let config = AutoencoderConfig {
            hidden_size: 16, // d = 16 here, h must be < d
            max_iters: 2,
            ..Default::default()
        };
        assert!(SparseAutoencoder::train(&segs, &config, 0).is_err());
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let model = toy_model(12, 3, 8, 1e-4, 1.0);
        let value = model.to_json_value();
        assert_eq!(value["version"], 1);
        assert_eq!(value["d"], 12);
        assert_eq!(value["h"], 3);
        for key in [
            "lambda",
            "rho_s",
            "beta_s",
            "input_scale",
            "w_enc",
            "b_enc",
            "w_dec",
            "b_dec",
        ] {
            assert!(value.get(key).is_some(), "missing key {key}");
        }
        let text = serde_json::to_string(&value).unwrap();
        let back = SparseAutoencoder::from_json_value(serde_json::from_str(&text).unwrap()).unwrap();
        for (a, b) in model.w_enc.iter().zip(back.w_enc.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in model.b_dec.iter().zip(back.b_dec.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(model.input_scale, back.input_scale);
    }

    #[test]
    fn model_version_is_checked() {
        let model = toy_model(8, 2, 1, 0.0, 0.0);
        let mut value = model.to_json_value();
        value["version"] = serde_json::json!(99);
        assert!(matches!(
            SparseAutoencoder::from_json_value(value),
            Err(Error::ModelFormat(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn moments_permutation_invariant_and_translation_covariant(
            mut values in proptest::collection::vec(0.0f64..10.0, 3..200),
            shift in 0.0f64..100.0,
        ) {
            prop_assume!(mean_and_variance(&values).1 > 1e-12);
            let base = moments(&MseVector::new(values.clone()).unwrap()).unwrap();

            values.reverse();
            let permuted = moments(&MseVector::new(values.clone()).unwrap()).unwrap();
            prop_assert!((permuted.mean - base.mean).abs() <= 1e-9 * base.mean.abs().max(1.0));
            prop_assert!((permuted.variance - base.variance).abs() <= 1e-9 * base.variance.abs().max(1e-12));

            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let m = moments(&MseVector::new(shifted).unwrap()).unwrap();
            prop_assert!((m.mean - (base.mean + shift)).abs() <= 1e-9 * (base.mean + shift).abs().max(1.0));
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-9);
            prop_assert!(rel(m.variance, base.variance) < 1e-9, "variance {} vs {}", m.variance, base.variance);
            prop_assert!((m.skewness - base.skewness).abs() < 1e-9 * base.skewness.abs().max(1.0));
            prop_assert!((m.kurtosis - base.kurtosis).abs() < 1e-9 * base.kurtosis.abs().max(1.0));
        }
    }
}
