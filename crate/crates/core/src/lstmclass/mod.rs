//! Interference classification with a single-layer LSTM.
//!
//! Each 512-sample segment becomes a sequence of 512 time steps with four
//! features per step: time-domain magnitude and phase, and the magnitude and
//! phase of the segment's DFT aligned index-wise (bin k at step k). A
//! 128-unit LSTM consumes the sequence; the final hidden state feeds a dense
//! layer and softmax over the interferer classes (LTE, UMTS, GSM by
//! default). Training uses mini-batch Adam on mean cross-entropy.
//!
//! The recurrence, per time step t with h_0 = c_0 = 0:
//!
//! ```text
//! i_t = sigmoid(W_i x_t + U_i h_{t-1} + b_i)      input gate
//! f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)      forget gate
//! o_t = sigmoid(W_o x_t + U_o h_{t-1} + b_o)      output gate
//! g_t = tanh   (W_g x_t + U_g h_{t-1} + b_g)      candidate cell
//! c_t = f_t . c_{t-1} + i_t . g_t
//! h_t = o_t . tanh(c_t)
//! ```

pub mod adam;
mod eval;
mod train;

pub use adam::{AdamHyper, AdamState};
pub use eval::{
    evaluate, sir_sweep, write_confusion_csv, write_sweep_csv, ClassificationReport,
    SirReportEntry,
};
pub use train::{train_classifier, TrainConfig, TrainingHistory};

use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iq::IqSegment;
use crate::spectrum::dft;

const MODEL_VERSION: u32 = 1;
/// Feature channels per time step.
pub const NUM_FEATURES: usize = 4;
/// Gate indices into the per-gate weight arrays.
const GATE_I: usize = 0;
const GATE_F: usize = 1;
const GATE_O: usize = 2;
const GATE_G: usize = 3;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Per-channel normalization statistics learned from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
}

impl NormStats {
    /// Identity statistics (no shift, unit scale).
    pub fn identity() -> Self {
        Self {
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
        }
    }

    /// Population mean and standard deviation per channel over all segments
    /// and time steps of the raw (pre-normalization) channel values.
    pub fn fit(raw_channel_rows: &[Array2<f64>]) -> Self {
        let mut mean = [0.0; NUM_FEATURES];
        let mut sq = [0.0; NUM_FEATURES];
        let mut count = 0usize;
        for channels in raw_channel_rows {
            count += channels.ncols();
            for c in 0..NUM_FEATURES {
                for &v in channels.row(c) {
                    mean[c] += v;
                    sq[c] += v * v;
                }
            }
        }
        let n = count.max(1) as f64;
        let mut std = [0.0; NUM_FEATURES];
        for c in 0..NUM_FEATURES {
            mean[c] /= n;
            std[c] = (sq[c] / n - mean[c] * mean[c]).max(0.0).sqrt();
        }
        Self { mean, std }
    }

    fn effective_std(&self, c: usize) -> f64 {
        if self.std[c] == 0.0 {
            log::warn!("channel {c} has zero standard deviation; substituting 1");
            1.0
        } else {
            self.std[c]
        }
    }
}

/// Four feature channels over a segment's time steps (channels x T).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    channels: Array2<f64>,
}

impl FeatureMatrix {
    /// Wraps a pre-built channels-by-time matrix (used by tests and toy
    /// models). Must have [`NUM_FEATURES`] rows.
    pub fn from_channels(channels: Array2<f64>) -> Result<Self> {
        if channels.nrows() != NUM_FEATURES {
            return Err(Error::ModelFormat(format!(
                "feature matrix needs {NUM_FEATURES} channels, got {}",
                channels.nrows()
            )));
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &Array2<f64> {
        &self.channels
    }

    pub fn seq_len(&self) -> usize {
        self.channels.ncols()
    }
}

/// Raw (pre-normalization) channels of one segment: |x_n|, arg(x_n), |X_k|,
/// arg(X_k) with X the segment's DFT, spectral bins aligned index-wise with
/// time steps.
pub fn raw_feature_channels(segment: &IqSegment) -> Array2<f64> {
    let t_len = segment.len();
    let spectrum = dft(segment);
    let mut channels = Array2::zeros((NUM_FEATURES, t_len));
    for (n, (x, big_x)) in segment.samples().iter().zip(&spectrum).enumerate() {
        channels[[0, n]] = x.norm();
        channels[[1, n]] = x.arg();
        channels[[2, n]] = big_x.norm();
        channels[[3, n]] = big_x.arg();
    }
    channels
}

/// Extracts the four z-scored feature channels from a canonical 512-sample
/// segment.
pub fn extract_features(segment: &IqSegment, norm: &NormStats) -> Result<FeatureMatrix> {
    if segment.len() != crate::SEGMENT_LEN {
        return Err(Error::WrongSegmentLength {
            expected: crate::SEGMENT_LEN,
            got: segment.len(),
        });
    }
    let mut channels = raw_feature_channels(segment);
    for c in 0..NUM_FEATURES {
        let std = norm.effective_std(c);
        let mean = norm.mean[c];
        for v in channels.row_mut(c) {
            *v = (*v - mean) / std;
        }
    }
    Ok(FeatureMatrix { channels })
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Single-layer LSTM with a dense softmax head.
#[derive(Debug, Clone)]
pub struct LstmModel {
    hidden_size: usize,
    seq_len: usize,
    class_names: Vec<String>,
    /// Gate input weights (H x F), order: input, forget, output, candidate.
    w: [Array2<f64>; 4],
    /// Gate recurrent weights (H x H), same order.
    u: [Array2<f64>; 4],
    /// Gate biases (H), same order.
    b: [Array1<f64>; 4],
    w_fc: Array2<f64>, // C x H
    b_fc: Array1<f64>, // C
    norm: NormStats,
}

impl LstmModel {
    /// Fresh model with uniform(-r, r) weights, r = 1 / sqrt(H); biases zero
    /// except the forget gate bias, set high enough that the cell state
    /// initially retains information across the full 512-step sequence
    /// (sigmoid(5)^512 ~ 0.28; a bias of 1 decays in a couple of steps and
    /// the final hidden state never sees the sequence).
    pub fn init(
        hidden_size: usize,
        seq_len: usize,
        class_names: Vec<String>,
        norm: NormStats,
        seed: u64,
    ) -> Result<Self> {
        let h = hidden_size;
        let c = class_names.len();
        if h == 0 || c < 2 || seq_len == 0 {
            return Err(Error::ModelFormat(format!(
                "need hidden > 0, classes >= 2, seq_len > 0; got {h}, {c}, {seq_len}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = 1.0 / (h as f64).sqrt();
        let mut sample = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-r..r))
        };
        let w = [
            sample(h, NUM_FEATURES),
            sample(h, NUM_FEATURES),
            sample(h, NUM_FEATURES),
            sample(h, NUM_FEATURES),
        ];
        let u = [sample(h, h), sample(h, h), sample(h, h), sample(h, h)];
        let w_fc = sample(c, h);
        let b = [
            Array1::zeros(h),
            Array1::from_elem(h, 5.0), // forget gate bias
            Array1::zeros(h),
            Array1::zeros(h),
        ];
        Ok(Self {
            hidden_size: h,
            seq_len,
            class_names,
            w,
            u,
            b,
            w_fc,
            b_fc: Array1::zeros(c),
            norm,
        })
    }

    /// Assembles a model from explicit parts (toy models, deserialization).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        seq_len: usize,
        class_names: Vec<String>,
        w: [Array2<f64>; 4],
        u: [Array2<f64>; 4],
        b: [Array1<f64>; 4],
        w_fc: Array2<f64>,
        b_fc: Array1<f64>,
        norm: NormStats,
    ) -> Result<Self> {
        let (h, f) = w[0].dim();
        let c = class_names.len();
        if f != NUM_FEATURES {
            return Err(Error::ModelFormat(format!(
                "gate input weights must have {NUM_FEATURES} columns, got {f}"
            )));
        }
        for gate in 0..4 {
            if w[gate].dim() != (h, f) || u[gate].dim() != (h, h) || b[gate].len() != h {
                return Err(Error::ModelFormat("inconsistent gate shapes".into()));
            }
        }
        if w_fc.dim() != (c, h) || b_fc.len() != c || c < 2 {
            return Err(Error::ModelFormat("inconsistent head shapes".into()));
        }
        Ok(Self {
            hidden_size: h,
            seq_len,
            class_names,
            w,
            u,
            b,
            w_fc,
            b_fc,
            norm,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.norm
    }

    pub fn param_count(&self) -> usize {
        let (h, f, c) = (self.hidden_size, NUM_FEATURES, self.num_classes());
        4 * (h * f + h * h + h) + c * h + c
    }

    /// Flattens all parameters: the four W, then U, then b (gate order
    /// input/forget/output/candidate), then the dense head.
    pub fn pack_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for gate in 0..4 {
            out.extend(self.w[gate].iter());
        }
        for gate in 0..4 {
            out.extend(self.u[gate].iter());
        }
        for gate in 0..4 {
            out.extend(self.b[gate].iter());
        }
        out.extend(self.w_fc.iter());
        out.extend(self.b_fc.iter());
        out
    }

    /// Writes a flat parameter vector (same layout as [`Self::pack_params`])
    /// back into the model.
    pub fn unpack_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let (h, f, c) = (self.hidden_size, NUM_FEATURES, self.num_classes());
        let mut offset = 0;
        let mut take = |len: usize| {
            let slice = &params[offset..offset + len];
            offset += len;
            slice.to_vec()
        };
        for gate in 0..4 {
            self.w[gate] = Array2::from_shape_vec((h, f), take(h * f)).unwrap();
        }
        for gate in 0..4 {
            self.u[gate] = Array2::from_shape_vec((h, h), take(h * h)).unwrap();
        }
        for gate in 0..4 {
            self.b[gate] = Array1::from_vec(take(h));
        }
        self.w_fc = Array2::from_shape_vec((c, h), take(c * h)).unwrap();
        self.b_fc = Array1::from_vec(take(c));
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Argmax with ties broken toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Forward-pass activations retained for backpropagation through time.
pub struct LstmCache {
    /// Activated gate values per step, gate order i/f/o/g, each B x H.
    gates: [Vec<Array2<f64>>; 4],
    cell: Vec<Array2<f64>>,
    tanh_cell: Vec<Array2<f64>>,
    hidden: Vec<Array2<f64>>,
    probs: Array2<f64>,
}

impl LstmCache {
    pub fn probabilities(&self) -> &Array2<f64> {
        &self.probs
    }
}

/// Gradients of all model parameters, same shapes as the model.
pub struct LstmGrads {
    pub w: [Array2<f64>; 4],
    pub u: [Array2<f64>; 4],
    pub b: [Array1<f64>; 4],
    pub w_fc: Array2<f64>,
    pub b_fc: Array1<f64>,
}

impl LstmGrads {
    fn zeros(model: &LstmModel) -> Self {
        let (h, f, c) = (model.hidden_size, NUM_FEATURES, model.num_classes());
        Self {
            w: std::array::from_fn(|_| Array2::zeros((h, f))),
            u: std::array::from_fn(|_| Array2::zeros((h, h))),
            b: std::array::from_fn(|_| Array1::zeros(h)),
            w_fc: Array2::zeros((c, h)),
            b_fc: Array1::zeros(c),
        }
    }

    /// Same flat layout as [`LstmModel::pack_params`].
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for gate in 0..4 {
            out.extend(self.w[gate].iter());
        }
        for gate in 0..4 {
            out.extend(self.u[gate].iter());
        }
        for gate in 0..4 {
            out.extend(self.b[gate].iter());
        }
        out.extend(self.w_fc.iter());
        out.extend(self.b_fc.iter());
        out
    }
}

impl LstmModel {
    /// Batched forward pass over `features` shaped (batch, T, F). Returns
    /// per-row class probabilities and the cache for backpropagation.
    pub fn forward_batch(&self, features: &Array3<f64>) -> Result<(Array2<f64>, LstmCache)> {
        let (batch, t_len, f) = features.dim();
        if t_len != self.seq_len || f != NUM_FEATURES {
            return Err(Error::ModelFormat(format!(
                "expected features ({batch}, {}, {NUM_FEATURES}), got ({batch}, {t_len}, {f})",
                self.seq_len
            )));
        }
        let h = self.hidden_size;
        let mut h_prev = Array2::zeros((batch, h));
        let mut c_prev: Array2<f64> = Array2::zeros((batch, h));

        let mut cache = LstmCache {
            gates: std::array::from_fn(|_| Vec::with_capacity(t_len)),
            cell: Vec::with_capacity(t_len),
            tanh_cell: Vec::with_capacity(t_len),
            hidden: Vec::with_capacity(t_len),
            probs: Array2::zeros((0, 0)),
        };

        for t in 0..t_len {
            let x_t = features.slice(s![.., t, ..]);
            let mut pre: [Array2<f64>; 4] = std::array::from_fn(|gate| {
                let mut a = x_t.dot(&self.w[gate].t());
                a += &h_prev.dot(&self.u[gate].t());
                a += &self.b[gate];
                a
            });
            let i_g = pre[GATE_I].mapv(sigmoid);
            let f_g = pre[GATE_F].mapv(sigmoid);
            let o_g = pre[GATE_O].mapv(sigmoid);
            let g_g = std::mem::take(&mut pre[GATE_G]).mapv(f64::tanh);

            let c_t = &f_g * &c_prev + &i_g * &g_g;
            if c_t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { step: t });
            }
            let tanh_c = c_t.mapv(f64::tanh);
            let h_t = &o_g * &tanh_c;

            cache.gates[GATE_I].push(i_g);
            cache.gates[GATE_F].push(f_g);
            cache.gates[GATE_O].push(o_g);
            cache.gates[GATE_G].push(g_g);
            cache.cell.push(c_t.clone());
            cache.tanh_cell.push(tanh_c);
            cache.hidden.push(h_t.clone());
            h_prev = h_t;
            c_prev = c_t;
        }

        let mut logits = h_prev.dot(&self.w_fc.t());
        logits += &self.b_fc;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation { step: t_len });
        }
        let probs = softmax_rows(&logits);
        cache.probs = probs.clone();
        Ok((probs, cache))
    }

    /// Batched backpropagation through time for mean cross-entropy
    /// `-log p_true` over the batch. `labels` are class indices per row.
    pub fn backward_batch(
        &self,
        features: &Array3<f64>,
        cache: &LstmCache,
        labels: &[usize],
    ) -> LstmGrads {
        let (batch, t_len, _) = features.dim();
        assert_eq!(labels.len(), batch, "one label per batch row");
        let h = self.hidden_size;
        let scale = 1.0 / batch as f64;

        // softmax + cross-entropy: dLoss/dlogits = (p - onehot) / batch
        let mut dlogits = cache.probs.clone();
        for (row, &label) in labels.iter().enumerate() {
            dlogits[[row, label]] -= 1.0;
        }
        dlogits *= scale;

        let mut grads = LstmGrads::zeros(self);
        let h_last = &cache.hidden[t_len - 1];
        grads.w_fc = dlogits.t().dot(h_last);
        grads.b_fc = dlogits.sum_axis(Axis(0));

        let zeros = Array2::zeros((batch, h));
        let mut dh = dlogits.dot(&self.w_fc);
        let mut dc: Array2<f64> = Array2::zeros((batch, h));

        for t in (0..t_len).rev() {
            let i_g = &cache.gates[GATE_I][t];
            let f_g = &cache.gates[GATE_F][t];
            let o_g = &cache.gates[GATE_O][t];
            let g_g = &cache.gates[GATE_G][t];
            let tanh_c = &cache.tanh_cell[t];
            let c_prev = if t > 0 { &cache.cell[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zeros };

            let d_o = &dh * tanh_c;
            dc += &(&dh * o_g * &tanh_c.mapv(|v| 1.0 - v * v));

            let d_i = &dc * g_g;
            let d_g = &dc * i_g;
            let d_f = &dc * c_prev;

            let da = [
                &d_i * i_g * &i_g.mapv(|v| 1.0 - v),
                &d_f * f_g * &f_g.mapv(|v| 1.0 - v),
                &d_o * o_g * &o_g.mapv(|v| 1.0 - v),
                &d_g * &g_g.mapv(|v| 1.0 - v * v),
            ];

            let x_t = features.slice(s![.., t, ..]);
            let mut dh_prev: Array2<f64> = Array2::zeros((batch, h));
            for gate in 0..4 {
                grads.w[gate] += &da[gate].t().dot(&x_t);
                grads.u[gate] += &da[gate].t().dot(h_prev);
                grads.b[gate] += &da[gate].sum_axis(Axis(0));
                dh_prev += &da[gate].dot(&self.u[gate]);
            }
            dc *= f_g;
            dh = dh_prev;
        }
        grads
    }
}

/// Forward pass over one segment's features: class probabilities plus the
/// backpropagation cache.
pub fn lstm_forward(model: &LstmModel, features: &FeatureMatrix) -> Result<(Vec<f64>, LstmCache)> {
    let t_len = features.seq_len();
    let mut batch = Array3::zeros((1, t_len, NUM_FEATURES));
    for c in 0..NUM_FEATURES {
        for t in 0..t_len {
            batch[[0, t, c]] = features.channels[[c, t]];
        }
    }
    let (probs, cache) = model.forward_batch(&batch)?;
    Ok((probs.row(0).to_vec(), cache))
}

/// Exact cross-entropy gradient for one segment via backpropagation through
/// time. `cache` must come from a matching [`lstm_forward`] call.
pub fn lstm_backward(
    model: &LstmModel,
    features: &FeatureMatrix,
    cache: &LstmCache,
    true_class: usize,
) -> LstmGrads {
    let t_len = features.seq_len();
    let mut batch = Array3::zeros((1, t_len, NUM_FEATURES));
    for c in 0..NUM_FEATURES {
        for t in 0..t_len {
            batch[[0, t, c]] = features.channels[[c, t]];
        }
    }
    model.backward_batch(&batch, cache, &[true_class])
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LstmModelFile {
    version: u32,
    hidden_size: usize,
    num_features: usize,
    seq_len: usize,
    classes: Vec<String>,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    w_i: Vec<f64>,
    u_i: Vec<f64>,
    b_i: Vec<f64>,
    w_f: Vec<f64>,
    u_f: Vec<f64>,
    b_f: Vec<f64>,
    w_o: Vec<f64>,
    u_o: Vec<f64>,
    b_o: Vec<f64>,
    w_g: Vec<f64>,
    u_g: Vec<f64>,
    b_g: Vec<f64>,
    w_fc: Vec<f64>,
    b_fc: Vec<f64>,
}

impl LstmModel {
    /// Serializes as versioned JSON with flat row-major weight arrays, the
    /// ordered class-label list and the feature normalization statistics.
    pub fn to_json_value(&self) -> serde_json::Value {
        let flat = |a: &Array2<f64>| a.iter().copied().collect::<Vec<f64>>();
        let file = LstmModelFile {
            version: MODEL_VERSION,
            hidden_size: self.hidden_size,
            num_features: NUM_FEATURES,
            seq_len: self.seq_len,
            classes: self.class_names.clone(),
            norm_mean: self.norm.mean.to_vec(),
            norm_std: self.norm.std.to_vec(),
            w_i: flat(&self.w[GATE_I]),
            u_i: flat(&self.u[GATE_I]),
            b_i: self.b[GATE_I].to_vec(),
            w_f: flat(&self.w[GATE_F]),
            u_f: flat(&self.u[GATE_F]),
            b_f: self.b[GATE_F].to_vec(),
            w_o: flat(&self.w[GATE_O]),
            u_o: flat(&self.u[GATE_O]),
            b_o: self.b[GATE_O].to_vec(),
            w_g: flat(&self.w[GATE_G]),
            u_g: flat(&self.u[GATE_G]),
            b_g: self.b[GATE_G].to_vec(),
            w_fc: flat(&self.w_fc),
            b_fc: self.b_fc.to_vec(),
        };
        serde_json::to_value(file).expect("model serialization")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let file: LstmModelFile = serde_json::from_value(value)?;
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        if file.num_features != NUM_FEATURES {
            return Err(Error::ModelFormat(format!(
                "expected {NUM_FEATURES} features, got {}",
                file.num_features
            )));
        }
        if file.norm_mean.len() != NUM_FEATURES || file.norm_std.len() != NUM_FEATURES {
            return Err(Error::ModelFormat("bad normalization statistics".into()));
        }
        let h = file.hidden_size;
        let c = file.classes.len();
        let shape2 = |v: Vec<f64>, rows: usize, cols: usize| {
            Array2::from_shape_vec((rows, cols), v).map_err(|e| Error::ModelFormat(e.to_string()))
        };
        let norm = NormStats {
            mean: file.norm_mean.try_into().expect("length checked"),
            std: file.norm_std.try_into().expect("length checked"),
        };
        Self::from_parts(
            file.seq_len,
            file.classes,
            [
                shape2(file.w_i, h, NUM_FEATURES)?,
                shape2(file.w_f, h, NUM_FEATURES)?,
                shape2(file.w_o, h, NUM_FEATURES)?,
                shape2(file.w_g, h, NUM_FEATURES)?,
            ],
            [
                shape2(file.u_i, h, h)?,
                shape2(file.u_f, h, h)?,
                shape2(file.u_o, h, h)?,
                shape2(file.u_g, h, h)?,
            ],
            [
                Array1::from_vec(file.b_i),
                Array1::from_vec(file.b_f),
                Array1::from_vec(file.b_o),
                Array1::from_vec(file.b_g),
            ],
            shape2(file.w_fc, c, h)?,
            Array1::from_vec(file.b_fc),
            norm,
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
    use num_complex::Complex64;
    use rand::Rng;

    fn toy_classes() -> Vec<String> {
        vec!["LTE".into(), "UMTS".into(), "GSM".into()]
    }

    fn toy_model(h: usize, t: usize, seed: u64) -> LstmModel {
        LstmModel::init(h, t, toy_classes(), NormStats::identity(), seed).unwrap()
    }

    fn toy_features(t: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix::from_channels(Array2::from_shape_fn((NUM_FEATURES, t), |_| {
            rng.gen_range(-1.0..1.0)
        }))
        .unwrap()
    }

    #[test]
    fn zero_model_gives_uniform_probabilities() {
        let zero = Array2::zeros((2, NUM_FEATURES));
        let model = LstmModel::from_parts(
            5,
            toy_classes(),
            std::array::from_fn(|_| zero.clone()),
            std::array::from_fn(|_| Array2::zeros((2, 2))),
            std::array::from_fn(|_| Array1::zeros(2)),
            Array2::zeros((3, 2)),
            Array1::zeros(3),
            NormStats::identity(),
        )
        .unwrap();
        let (probs, _) = lstm_forward(&model, &toy_features(5, 1)).unwrap();
        for p in &probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_form_a_simplex_point() {
        let model = toy_model(6, 7, 2);
        let (probs, _) = lstm_forward(&model, &toy_features(7, 3)).unwrap();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let logits = Array2::from_shape_vec((1, 3), vec![0.3, -1.2, 2.5]).unwrap();
        let shifted = logits.mapv(|v| v + 123.456);
        let a = softmax_rows(&logits);
        let b = softmax_rows(&shifted);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9 * y.abs());
        }
    }

    #[test]
    fn argmax_matches_softmax_argmax_with_low_index_ties() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
        let logits = vec![1.0, 3.0, 3.0, -2.0];
        let sm = softmax_rows(&Array2::from_shape_vec((1, 4), logits.clone()).unwrap());
        assert_eq!(argmax(&logits), argmax(&sm.row(0).to_vec()));
    }

    /// Independent scalar-loop recurrence, no shared code with the ndarray
    /// implementation.
    fn scalar_oracle(model: &LstmModel, features: &FeatureMatrix) -> Vec<f64> {
        let h_sz = model.hidden_size();
        let t_len = features.seq_len();
        let c_sz = model.num_classes();
        let mut h = vec![0.0f64; h_sz];
        let mut c = vec![0.0f64; h_sz];
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        for t in 0..t_len {
            let x: Vec<f64> = (0..NUM_FEATURES).map(|k| features.channels()[[k, t]]).collect();
            let gate = |wm: &Array2<f64>, um: &Array2<f64>, bv: &Array1<f64>, j: usize| {
                let mut acc = bv[j];
                for (k, &xv) in x.iter().enumerate() {
                    acc += wm[[j, k]] * xv;
                }
                for (k, &hv) in h.iter().enumerate() {
                    acc += um[[j, k]] * hv;
                }
                acc
            };
            let mut h_new = vec![0.0; h_sz];
            let mut c_new = vec![0.0; h_sz];
            for j in 0..h_sz {
                let i_j = sig(gate(&model.w[GATE_I], &model.u[GATE_I], &model.b[GATE_I], j));
                let f_j = sig(gate(&model.w[GATE_F], &model.u[GATE_F], &model.b[GATE_F], j));
                let o_j = sig(gate(&model.w[GATE_O], &model.u[GATE_O], &model.b[GATE_O], j));
                let g_j = gate(&model.w[GATE_G], &model.u[GATE_G], &model.b[GATE_G], j).tanh();
                c_new[j] = f_j * c[j] + i_j * g_j;
                h_new[j] = o_j * c_new[j].tanh();
            }
            h = h_new;
            c = c_new;
        }
        let mut logits = vec![0.0f64; c_sz];
        for cls in 0..c_sz {
            logits[cls] = model.b_fc[cls];
            for (k, &hv) in h.iter().enumerate() {
                logits[cls] += model.w_fc[[cls, k]] * hv;
            }
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    #[test]
    fn forward_matches_scalar_oracle_on_toy_model() {
        for seed in 0..5 {
            let model = toy_model(2, 3, seed);
            let features = toy_features(3, seed + 50);
            let (probs, _) = lstm_forward(&model, &features).unwrap();
            let want = scalar_oracle(&model, &features);
            for (a, b) in probs.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn batched_forward_agrees_with_single_rows() {
        let model = toy_model(4, 6, 9);
        let feats: Vec<FeatureMatrix> = (0..5).map(|k| toy_features(6, 200 + k)).collect();
        let mut batch = Array3::zeros((5, 6, NUM_FEATURES));
        for (row, fm) in feats.iter().enumerate() {
            for c in 0..NUM_FEATURES {
                for t in 0..6 {
                    batch[[row, t, c]] = fm.channels()[[c, t]];
                }
            }
        }
        let (batch_probs, _) = model.forward_batch(&batch).unwrap();
        for (row, fm) in feats.iter().enumerate() {
            let (single, _) = lstm_forward(&model, fm).unwrap();
            for (a, b) in batch_probs.row(row).iter().zip(&single) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..10u64 {
            let mut model = toy_model(4, 8, seed);
            let features = toy_features(8, 1000 + seed);
            let true_class = (seed % 3) as usize;

            let (_, cache) = lstm_forward(&model, &features).unwrap();
            let grads = lstm_backward(&model, &features, &cache, true_class).pack();

            let params = model.pack_params();
            let step = 1e-5;
            let mut max_rel: f64 = 0.0;
            for idx in 0..params.len() {
                let mut plus = params.clone();
                plus[idx] += step;
                model.unpack_params(&plus);
                let (p_plus, _) = lstm_forward(&model, &features).unwrap();
                let mut minus = params.clone();
                minus[idx] -= step;
                model.unpack_params(&minus);
                let (p_minus, _) = lstm_forward(&model, &features).unwrap();
                let fd = (-(p_plus[true_class].ln()) + p_minus[true_class].ln()) / (2.0 * step);
                let rel = (grads[idx] - fd).abs() / grads[idx].abs().max(fd.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
            }
            model.unpack_params(&params);
            assert!(max_rel < 1e-4, "seed {seed}: max rel err {max_rel}");
        }
    }

    #[test]
    fn softmax_cross_entropy_identity_at_logits() {
        let model = toy_model(3, 4, 7);
        let features = toy_features(4, 8);
        let (probs, cache) = lstm_forward(&model, &features).unwrap();
        let grads = lstm_backward(&model, &features, &cache, 1);
        // dLoss/db_fc = p - onehot(true) since h_T multiplies the weights
        for cls in 0..3 {
            let expect = probs[cls] - if cls == 1 { 1.0 } else { 0.0 };
            assert!((grads.b_fc[cls] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero_input_weight_gradients() {
        let model = toy_model(3, 5, 4);
        let features =
            FeatureMatrix::from_channels(Array2::zeros((NUM_FEATURES, 5))).unwrap();
        let (_, cache) = lstm_forward(&model, &features).unwrap();
        let grads = lstm_backward(&model, &features, &cache, 2);
        for gate in 0..4 {
            for v in grads.w[gate].iter() {
                assert_eq!(*v, 0.0);
            }
        }
        // recurrent/bias gradients are generally non-zero
        assert!(grads.b.iter().any(|b| b.iter().any(|v| *v != 0.0)));
    }

    #[test]
    fn extract_features_of_constant_signal() {
        let seg = IqSegment::new(vec![Complex64::new(1.0, 0.0); crate::SEGMENT_LEN], 1.0).unwrap();
        let fm = extract_features(&seg, &NormStats::identity()).unwrap();
        for t in 0..crate::SEGMENT_LEN {
            assert!((fm.channels()[[0, t]] - 1.0).abs() < 1e-12); // |x| = 1
            assert_eq!(fm.channels()[[1, t]], 0.0); // arg = 0
        }
        // spectrum: all energy at DC bin
        assert!((fm.channels()[[2, 0]] - crate::SEGMENT_LEN as f64).abs() < 1e-9);
        for t in 1..crate::SEGMENT_LEN {
            assert!(fm.channels()[[2, t]].abs() < 1e-9);
        }
    }

    #[test]
    fn extract_features_tone_dominates_its_bin() {
        let k0 = 37;
        let samples: Vec<Complex64> = (0..crate::SEGMENT_LEN)
            .map(|n| {
                let phase = 2.0 * std::f64::consts::PI * (k0 * n) as f64 / crate::SEGMENT_LEN as f64;
                Complex64::new(phase.cos(), phase.sin())
            })
            .collect();
        let seg = IqSegment::new(samples, 1.0).unwrap();
        let fm = extract_features(&seg, &NormStats::identity()).unwrap();
        let spectral = fm.channels().row(2);
        let peak = argmax(&spectral.to_vec());
        assert_eq!(peak, k0);
    }

    #[test]
    fn extract_features_rejects_wrong_length() {
        let seg = IqSegment::new(vec![Complex64::new(1.0, 0.0); 100], 1.0).unwrap();
        assert!(matches!(
            extract_features(&seg, &NormStats::identity()),
            Err(Error::WrongSegmentLength { .. })
        ));
    }

    #[test]
    fn zero_std_substitutes_unit_scale() {
        let seg = IqSegment::new(vec![Complex64::new(2.0, 0.0); crate::SEGMENT_LEN], 1.0).unwrap();
        let stats = NormStats {
            mean: [1.0, 0.0, 0.0, 0.0],
            std: [0.0, 1.0, 1.0, 1.0],
        };
        let fm = extract_features(&seg, &stats).unwrap();
        // (|x| - 1) / 1 = 1
        assert!((fm.channels()[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zscored_corpus_has_zero_mean_unit_std() {
        use crate::wavegen::{generate, WaveformKind, WaveformSpec};
        let spec = WaveformSpec::new(WaveformKind::Dvbs2Like, crate::SEGMENT_LEN, 1.0e6, 0);
        let segs: Vec<IqSegment> = (0..12).map(|k| generate(&spec.with_seed(k)).unwrap()).collect();
        let raw: Vec<Array2<f64>> = segs.iter().map(raw_feature_channels).collect();
        let stats = NormStats::fit(&raw);
        let mut sums = [0.0; NUM_FEATURES];
        let mut sqs = [0.0; NUM_FEATURES];
        let mut count = 0usize;
        for seg in &segs {
            let fm = extract_features(seg, &stats).unwrap();
            count += fm.seq_len();
            for c in 0..NUM_FEATURES {
                for &v in fm.channels().row(c) {
                    sums[c] += v;
                    sqs[c] += v * v;
                }
            }
        }
        for c in 0..NUM_FEATURES {
            let mean = sums[c] / count as f64;
            let std = (sqs[c] / count as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 1e-9, "channel {c} mean {mean}");
            assert!((std - 1.0).abs() < 1e-9, "channel {c} std {std}");
        }
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let model = toy_model(5, 16, 77);
        let value = model.to_json_value();
        assert_eq!(value["version"], 1);
        assert_eq!(value["classes"], serde_json::json!(["LTE", "UMTS", "GSM"]));
        let text = serde_json::to_string(&value).unwrap();
        let back = LstmModel::from_json_value(serde_json::from_str(&text).unwrap()).unwrap();
        let a = model.pack_params();
        let b = back.pack_params();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(model.norm, back.norm);
        assert_eq!(model.seq_len, back.seq_len);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let mut model = toy_model(3, 4, 5);
        let params = model.pack_params();
        assert_eq!(params.len(), model.param_count());
        let mut bumped = params.clone();
        for v in bumped.iter_mut() {
            *v += 1.0;
        }
        model.unpack_params(&bumped);
        let back = model.pack_params();
        for (a, b) in back.iter().zip(&params) {
            assert_eq!(*a, b + 1.0);
        }
    }
}
