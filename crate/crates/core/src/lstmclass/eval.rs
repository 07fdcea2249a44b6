//! Classifier evaluation: confusion matrices, accuracy, RMSE, SIR sweeps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::format_g12;
use crate::wavegen::{build_dataset, derive_seed, LabeledDataset, WaveformSpec};

use super::{argmax, extract_features, lstm_forward, LstmModel};

/// Metrics at one SIR operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirReportEntry {
    pub sir_db: f64,
    pub accuracy: f64,
    pub rmse: f64,
    pub confusion: Vec<Vec<u64>>,
}

/// Full evaluation outcome. The confusion matrix is rows = true class,
/// columns = predicted class, indices following `class_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub class_names: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub accuracy_overall: f64,
    pub accuracy_per_class: Vec<f64>,
    /// Root of the mean (over segments) of the mean squared difference
    /// between the softmax vector and the one-hot label.
    pub rmse: f64,
    pub rmse_per_class: Vec<f64>,
    pub total: u64,
    pub per_sir: Vec<SirReportEntry>,
}

struct ReportBuilder {
    class_names: Vec<String>,
    confusion: Vec<Vec<u64>>,
    sq_err_sum: f64,
    sq_err_per_class: Vec<f64>,
    count_per_class: Vec<u64>,
    total: u64,
}

impl ReportBuilder {
    fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        Self {
            class_names,
            confusion: vec![vec![0; c]; c],
            sq_err_sum: 0.0,
            sq_err_per_class: vec![0.0; c],
            count_per_class: vec![0; c],
            total: 0,
        }
    }

    fn add(&mut self, true_class: usize, probs: &[f64]) {
        let c = self.class_names.len();
        let predicted = argmax(probs);
        self.confusion[true_class][predicted] += 1;
        let mut sq = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            let target = if k == true_class { 1.0 } else { 0.0 };
            sq += (p - target) * (p - target);
        }
        sq /= c as f64;
        self.sq_err_sum += sq;
        self.sq_err_per_class[true_class] += sq;
        self.count_per_class[true_class] += 1;
        self.total += 1;
    }

    fn finish(self, per_sir: Vec<SirReportEntry>) -> ClassificationReport {
        let c = self.class_names.len();
        let trace: u64 = (0..c).map(|k| self.confusion[k][k]).sum();
        let accuracy_overall = if self.total > 0 {
            trace as f64 / self.total as f64
        } else {
            0.0
        };
        let accuracy_per_class = (0..c)
            .map(|k| {
                if self.count_per_class[k] > 0 {
                    self.confusion[k][k] as f64 / self.count_per_class[k] as f64
                } else {
                    0.0
                }
            })
            .collect();
        let rmse = if self.total > 0 {
            (self.sq_err_sum / self.total as f64).sqrt()
        } else {
            0.0
        };
        let rmse_per_class = (0..c)
            .map(|k| {
                if self.count_per_class[k] > 0 {
                    (self.sq_err_per_class[k] / self.count_per_class[k] as f64).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        ClassificationReport {
            class_names: self.class_names,
            confusion: self.confusion,
            accuracy_overall,
            accuracy_per_class,
            rmse,
            rmse_per_class,
            total: self.total,
            per_sir,
        }
    }
}

/// Evaluates the model on a labeled dataset, with a per-SIR breakdown taken
/// from each record's SIR tag. Dataset labels must all exist in the model's
/// class list.
pub fn evaluate(model: &LstmModel, dataset: &LabeledDataset) -> Result<ClassificationReport> {
    // dataset class index -> model class index
    let mapping: Vec<usize> = dataset
        .class_names
        .iter()
        .map(|name| {
            model
                .class_names()
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| Error::UnknownLabel(name.clone()))
        })
        .collect::<Result<_>>()?;

    let mut overall = ReportBuilder::new(model.class_names().to_vec());
    // stable grouping by SIR in first-appearance order, sorted at the end
    let mut sir_values: Vec<f64> = Vec::new();
    let mut sir_builders: Vec<ReportBuilder> = Vec::new();
    let mut predictions: Vec<(usize, Vec<f64>, usize)> = Vec::new(); // (true, probs, sir slot)

    for record in &dataset.records {
        let features = extract_features(&record.segment, model.norm_stats())?;
        let (probs, _) = lstm_forward(model, &features)?;
        let true_class = mapping[record.class_index];
        let slot = match sir_values
            .iter()
            .position(|&s| s == record.sir_db || (s.is_nan() && record.sir_db.is_nan()))
        {
            Some(i) => i,
            None => {
                sir_values.push(record.sir_db);
                sir_builders.push(ReportBuilder::new(model.class_names().to_vec()));
                sir_values.len() - 1
            }
        };
        predictions.push((true_class, probs, slot));
    }

    for (true_class, probs, slot) in &predictions {
        overall.add(*true_class, probs);
        sir_builders[*slot].add(*true_class, probs);
    }

    let mut per_sir: Vec<SirReportEntry> = sir_values
        .into_iter()
        .zip(sir_builders)
        .map(|(sir_db, builder)| {
            let report = builder.finish(Vec::new());
            SirReportEntry {
                sir_db,
                accuracy: report.accuracy_overall,
                rmse: report.rmse,
                confusion: report.confusion,
            }
        })
        .collect();
    per_sir.sort_by(|a, b| a.sir_db.partial_cmp(&b.sir_db).expect("finite SIR tags"));

    Ok(overall.finish(per_sir))
}

/// Builds a fresh evaluation dataset per SIR point and evaluates the model on
/// each, returning `(sir_db, report)` pairs in the order of `sir_list_db`.
/// Dataset seeds derive from `seed` by SIR index.
#[allow(clippy::too_many_arguments)]
pub fn sir_sweep(
    model: &LstmModel,
    classes: &[WaveformSpec],
    intended: &WaveformSpec,
    snr_db: f64,
    sir_list_db: &[f64],
    segments_per_point: usize,
    seed: u64,
) -> Result<Vec<(f64, ClassificationReport)>> {
    if sir_list_db.is_empty() {
        return Err(Error::InvalidSpec("sir list must be non-empty".into()));
    }
    sir_list_db
        .iter()
        .enumerate()
        .map(|(idx, &sir_db)| {
            let dataset = build_dataset(
                classes,
                intended,
                snr_db,
                &[sir_db],
                segments_per_point,
                derive_seed(seed, idx as u64),
            )?;
            Ok((sir_db, evaluate(model, &dataset)?))
        })
        .collect()
}

/// Writes sweep results as CSV rows `sir_db,class,accuracy,rmse`: one
/// `overall` row plus one row per class for every SIR point.
pub fn write_sweep_csv<W: Write>(
    mut out: W,
    series: &[(f64, ClassificationReport)],
) -> std::io::Result<()> {
    writeln!(out, "sir_db,class,accuracy,rmse")?;
    for (sir_db, report) in series {
        writeln!(
            out,
            "{},overall,{},{}",
            format_g12(*sir_db),
            format_g12(report.accuracy_overall),
            format_g12(report.rmse)
        )?;
        for (k, name) in report.class_names.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                format_g12(*sir_db),
                name,
                format_g12(report.accuracy_per_class[k]),
                format_g12(report.rmse_per_class[k])
            )?;
        }
    }
    Ok(())
}

/// Writes a confusion matrix as CSV: header `true_class,pred_<C1>,...`, one
/// row per true class.
pub fn write_confusion_csv<W: Write>(
    mut out: W,
    class_names: &[String],
    confusion: &[Vec<u64>],
) -> std::io::Result<()> {
    write!(out, "true_class")?;
    for name in class_names {
        write!(out, ",pred_{name}")?;
    }
    writeln!(out)?;
    for (name, row) in class_names.iter().zip(confusion) {
        write!(out, "{name}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
