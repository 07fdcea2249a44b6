//! `detect`: autoencoder training, calibration and detection runs.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use clearsky_core::autodetect::{
    calibrate, detect, AutoencoderConfig, DetectorCalibration, DetectorThresholds,
    SparseAutoencoder,
};
use clearsky_core::iq::{segment, IqSegment};
use clearsky_core::iqfile::read_iq_file;

use crate::config::{require_file, resolve, write_annotated_json};
use crate::errors::{CliResult, EXIT_DETECTED, EXIT_OK};

#[derive(Debug, Subcommand)]
pub enum DetectCommand {
    /// Fit the autoencoder on clean IQ input and write the model
    Train(TrainArgs),
    /// Establish the clean moment baseline and thresholds
    Calibrate(CalibrateArgs),
    /// Decide interference presence; exits 10 on detection
    Run(RunArgs),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectTrainConfig {
    pub segment_length: usize,
    pub hop: usize,
    pub seed: u64,
    pub autoencoder: AutoencoderConfig,
}

impl Default for DetectTrainConfig {
    fn default() -> Self {
        Self {
            segment_length: clearsky_core::SEGMENT_LEN,
            hop: clearsky_core::SEGMENT_LEN,
            seed: 0,
            autoencoder: AutoencoderConfig::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Clean IQ capture to train on
    #[arg(long)]
    input: PathBuf,

    /// Output model path (JSON)
    #[arg(long)]
    out: PathBuf,

    #[arg(long)]
    segment_length: Option<usize>,

    #[arg(long)]
    hop: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Hidden units (must stay below twice the segment length)
    #[arg(long)]
    hidden_size: Option<usize>,

    /// L2 weight regularization coefficient
    #[arg(long)]
    lambda: Option<f64>,

    /// Target mean hidden activation
    #[arg(long)]
    sparsity_proportion: Option<f64>,

    /// KL sparsity penalty weight
    #[arg(long)]
    sparsity_weight: Option<f64>,

    /// Training iteration budget
    #[arg(long)]
    max_iters: Option<usize>,

    /// Gradient infinity-norm stopping tolerance
    #[arg(long)]
    grad_tol: Option<f64>,

    /// JSON config file (flags override it)
    #[arg(long)]
    config: Option<PathBuf>,
}

// Autoencoder flags nest under "autoencoder" in the config schema, so the
// flag patch is assembled by hand.
fn train_flags(args: &TrainArgs) -> CliResult<serde_json::Value> {
    let mut top = serde_json::Map::new();
    let mut ae = serde_json::Map::new();
    let mut put = |map: &mut serde_json::Map<String, serde_json::Value>,
                   key: &str,
                   value: Option<serde_json::Value>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    put(&mut top, "segment_length", args.segment_length.map(Into::into));
    put(&mut top, "hop", args.hop.map(Into::into));
    put(&mut top, "seed", args.seed.map(Into::into));
    put(&mut ae, "hidden_size", args.hidden_size.map(Into::into));
    put(&mut ae, "lambda", args.lambda.map(Into::into));
    put(
        &mut ae,
        "sparsity_proportion",
        args.sparsity_proportion.map(Into::into),
    );
    put(&mut ae, "sparsity_weight", args.sparsity_weight.map(Into::into));
    put(&mut ae, "max_iters", args.max_iters.map(Into::into));
    put(&mut ae, "grad_tol", args.grad_tol.map(Into::into));
    if !ae.is_empty() {
        top.insert("autoencoder".into(), serde_json::Value::Object(ae));
    }
    Ok(serde_json::Value::Object(top))
}

fn load_segments(input: &PathBuf, length: usize, hop: usize) -> CliResult<Vec<IqSegment>> {
    require_file(input, "input")?;
    let signal = read_iq_file(input)?;
    Ok(segment(&signal, length, hop)?)
}

fn run_train(args: TrainArgs) -> CliResult<i32> {
    let flags = train_flags(&args)?;
    let config: DetectTrainConfig = resolve(args.config.as_deref(), &flags)?;
    let segments = load_segments(&args.input, config.segment_length, config.hop)?;
    let (model, _history) = SparseAutoencoder::train(&segments, &config.autoencoder, config.seed)?;
    write_annotated_json(&args.out, model.to_json_value(), &config)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub segment_length: usize,
    pub hop: usize,
    pub thresholds: DetectorThresholds,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            segment_length: clearsky_core::SEGMENT_LEN,
            hop: clearsky_core::SEGMENT_LEN,
            thresholds: DetectorThresholds::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Trained detector model (JSON)
    #[arg(long)]
    model: PathBuf,

    /// Clean IQ capture for the baseline
    #[arg(long)]
    input: PathBuf,

    /// Output calibration path (JSON)
    #[arg(long)]
    out: PathBuf,

    #[arg(long)]
    segment_length: Option<usize>,

    #[arg(long)]
    hop: Option<usize>,

    /// Relative variance increase threshold
    #[arg(long)]
    variance_threshold: Option<f64>,

    /// Relative skewness increase threshold
    #[arg(long)]
    skewness_threshold: Option<f64>,

    /// JSON config file (flags override it)
    #[arg(long)]
    config: Option<PathBuf>,
}

fn calibrate_flags(args: &CalibrateArgs) -> serde_json::Value {
    let mut top = serde_json::Map::new();
    if let Some(v) = args.segment_length {
        top.insert("segment_length".into(), v.into());
    }
    if let Some(v) = args.hop {
        top.insert("hop".into(), v.into());
    }
    let mut thresholds = serde_json::Map::new();
    if let Some(v) = args.variance_threshold {
        thresholds.insert("variance_threshold".into(), v.into());
    }
    if let Some(v) = args.skewness_threshold {
        thresholds.insert("skewness_threshold".into(), v.into());
    }
    if !thresholds.is_empty() {
        top.insert("thresholds".into(), serde_json::Value::Object(thresholds));
    }
    serde_json::Value::Object(top)
}

fn run_calibrate(args: CalibrateArgs) -> CliResult<i32> {
    let flags = calibrate_flags(&args);
    let config: CalibrateConfig = resolve(args.config.as_deref(), &flags)?;
    require_file(&args.model, "model")?;
    let model = SparseAutoencoder::load_json(&args.model)?;
    let segments = load_segments(&args.input, config.segment_length, config.hop)?;
    let calibration = calibrate(&model, &segments, &config.thresholds)?;
    write_annotated_json(&args.out, serde_json::to_value(&calibration)?, &config)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectRunConfig {
    pub segment_length: usize,
    pub hop: usize,
}

impl Default for DetectRunConfig {
    fn default() -> Self {
        Self {
            segment_length: clearsky_core::SEGMENT_LEN,
            hop: clearsky_core::SEGMENT_LEN,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    /// Trained detector model (JSON)
    #[arg(long)]
    #[serde(skip)]
    model: PathBuf,

    /// Detector calibration (JSON)
    #[arg(long)]
    #[serde(skip)]
    calibration: PathBuf,

    /// IQ capture to test
    #[arg(long)]
    #[serde(skip)]
    input: PathBuf,

    /// Output decision report path (JSON)
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    segment_length: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hop: Option<usize>,

    /// JSON config file (flags override it)
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

fn run_run(args: RunArgs) -> CliResult<i32> {
    let config: DetectRunConfig = resolve(args.config.as_deref(), &args)?;
    require_file(&args.model, "model")?;
    require_file(&args.calibration, "calibration")?;
    let model = SparseAutoencoder::load_json(&args.model)?;
    let calibration: DetectorCalibration =
        serde_json::from_slice(&std::fs::read(&args.calibration)?)?;
    let segments = load_segments(&args.input, config.segment_length, config.hop)?;
    let decision = detect(&model, &calibration, &segments)?;
    let detected = decision.interference_detected;
    write_annotated_json(&args.out, serde_json::to_value(&decision)?, &config)?;
    Ok(if detected { EXIT_DETECTED } else { EXIT_OK })
}

pub fn run(command: DetectCommand) -> CliResult<i32> {
    match command {
        DetectCommand::Train(args) => run_train(args),
        DetectCommand::Calibrate(args) => run_calibrate(args),
        DetectCommand::Run(args) => run_run(args),
    }
}
