//! Classifier training: mini-batch Adam on mean cross-entropy.

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavegen::{derive_seed, LabeledDataset};

use super::adam::{AdamHyper, AdamState};
use super::{argmax, raw_feature_channels, LstmModel, NormStats, NUM_FEATURES};

/// Training configuration; every field is config-exposed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    /// Global gradient-norm clip applied before each Adam step; stabilizes
    /// backpropagation through the 512-step recurrence. Zero disables.
    pub clip_norm: f64,
    /// Fraction of each class held out for per-epoch accuracy tracking.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 128,
            epochs: 30,
            batch_size: 32,
            adam: AdamHyper::default(),
            clip_norm: 1.0,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Per-epoch mean training loss and held-out accuracy.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epoch_loss: Vec<f64>,
    /// Empty when `holdout_fraction` leaves no holdout segments.
    pub holdout_accuracy: Vec<f64>,
}

/// Trains an LSTM classifier on a labeled dataset.
///
/// The dataset is split per class (deterministically from the seed) into a
/// training portion and a holdout used only for accuracy tracking. Feature
/// normalization statistics come from the training split alone and are
/// embedded in the returned model. Identical (dataset, config) pairs produce
/// bitwise-identical models.
pub fn train_classifier(
    dataset: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(LstmModel, TrainingHistory)> {
    let num_classes = dataset.class_names.len();
    if num_classes < 2 {
        return Err(Error::ModelFormat(format!(
            "need at least 2 classes, dataset has {num_classes}"
        )));
    }
    if dataset.records.is_empty() {
        return Err(Error::TooFewSegments { min: 1, got: 0 });
    }
    for name in &dataset.class_names {
        let present = dataset
            .records
            .iter()
            .any(|r| dataset.class_names[r.class_index] == *name);
        if !present {
            return Err(Error::MissingClass(name.clone()));
        }
    }
    let seq_len = dataset.records[0].segment.len();
    if seq_len != crate::SEGMENT_LEN {
        return Err(Error::WrongSegmentLength {
            expected: crate::SEGMENT_LEN,
            got: seq_len,
        });
    }

    // stratified train/holdout split
    let mut train_idx: Vec<usize> = Vec::new();
    let mut holdout_idx: Vec<usize> = Vec::new();
    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..dataset.records.len())
            .filter(|&i| dataset.records[i].class_index == class)
            .collect();
        if members.is_empty() {
            return Err(Error::MissingClass(dataset.class_names[class].clone()));
        }
        members.shuffle(&mut split_rng);
        let mut n_hold = (members.len() as f64 * config.holdout_fraction).floor() as usize;
        n_hold = n_hold.min(members.len() - 1); // keep at least one for training
        holdout_idx.extend(&members[..n_hold]);
        train_idx.extend(&members[n_hold..]);
    }
    train_idx.sort_unstable();
    holdout_idx.sort_unstable();

    // normalization statistics from the training split only
    let raw: Vec<Array2<f64>> = dataset
        .records
        .iter()
        .map(|r| raw_feature_channels(&r.segment))
        .collect();
    let train_raw: Vec<Array2<f64>> = train_idx.iter().map(|&i| raw[i].clone()).collect();
    let norm = NormStats::fit(&train_raw);

    // normalized feature tensor (N, T, F)
    let n_total = dataset.records.len();
    let mut features = Array3::zeros((n_total, seq_len, NUM_FEATURES));
    for (row, channels) in raw.iter().enumerate() {
        for c in 0..NUM_FEATURES {
            let std = if norm.std[c] == 0.0 { 1.0 } else { norm.std[c] };
            for t in 0..seq_len {
                features[[row, t, c]] = (channels[[c, t]] - norm.mean[c]) / std;
            }
        }
    }
    let labels: Vec<usize> = dataset.records.iter().map(|r| r.class_index).collect();

    let mut model = LstmModel::init(
        config.hidden_size,
        seq_len,
        dataset.class_names.clone(),
        norm,
        derive_seed(config.seed, 0),
    )?;

    let mut params = model.pack_params();
    let mut adam = AdamState::new(params.len());
    let mut history = TrainingHistory::default();
    let batch_size = config.batch_size.max(1);

    for epoch in 0..config.epochs {
        let mut order = train_idx.clone();
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2 + epoch as u64));
        order.shuffle(&mut epoch_rng);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let b = chunk.len();
            let mut batch = Array3::zeros((b, seq_len, NUM_FEATURES));
            let mut batch_labels = Vec::with_capacity(b);
            for (row, &idx) in chunk.iter().enumerate() {
                batch
                    .index_axis_mut(ndarray::Axis(0), row)
                    .assign(&features.index_axis(ndarray::Axis(0), idx));
                batch_labels.push(labels[idx]);
            }
            let (probs, cache) = model.forward_batch(&batch)?;
            for (row, &label) in batch_labels.iter().enumerate() {
                loss_sum += -(probs[[row, label]].max(1e-300)).ln();
            }
            let grads = model.backward_batch(&batch, &cache, &batch_labels);
            let mut flat = grads.pack();
            if config.clip_norm > 0.0 {
                let norm = flat.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > config.clip_norm {
                    let scale = config.clip_norm / norm;
                    for g in flat.iter_mut() {
                        *g *= scale;
                    }
                }
            }
            adam.step(&mut params, &flat, &config.adam);
            model.unpack_params(&params);
        }
        history.epoch_loss.push(loss_sum / order.len() as f64);

        if !holdout_idx.is_empty() {
            let mut correct = 0usize;
            for chunk in holdout_idx.chunks(batch_size) {
                let b = chunk.len();
                let mut batch = Array3::zeros((b, seq_len, NUM_FEATURES));
                for (row, &idx) in chunk.iter().enumerate() {
                    batch
                        .index_axis_mut(ndarray::Axis(0), row)
                        .assign(&features.index_axis(ndarray::Axis(0), idx));
                }
                let (probs, _) = model.forward_batch(&batch)?;
                for (row, &idx) in chunk.iter().enumerate() {
                    if argmax(&probs.row(row).to_vec()) == labels[idx] {
                        correct += 1;
                    }
                }
            }
            history
                .holdout_accuracy
                .push(correct as f64 / holdout_idx.len() as f64);
        }
    }

    Ok((model, history))
}
