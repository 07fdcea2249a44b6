//! `synth`: waveform capture and labeled dataset generation.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use clearsky_core::iqfile::write_iq_file;
use clearsky_core::wavegen::{
    build_dataset, generate, mix, ManifestRecord, MixSpec, WaveformKind, WaveformParams,
    WaveformSpec,
};

use crate::config::{resolve, write_run_config};
use crate::errors::{CliError, CliResult, EXIT_OK};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Capture mode: waveform kind to generate.
    pub kind: Option<WaveformKind>,
    /// Capture mode: optional interferer mixed into the capture.
    pub interferer: Option<WaveformKind>,
    /// Dataset mode: interferer classes (label order).
    pub classes: Vec<WaveformKind>,
    pub intended: WaveformKind,
    pub num_samples: usize,
    pub segment_length: usize,
    pub segments_per_point: usize,
    pub sir_list_db: Vec<f64>,
    pub sir_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub sample_rate_hz: f64,
    pub seed: u64,
    pub params: WaveformParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            kind: None,
            interferer: None,
            classes: Vec::new(),
            intended: WaveformKind::Dvbs2Like,
            num_samples: 102_400,
            segment_length: clearsky_core::SEGMENT_LEN,
            segments_per_point: 100,
            sir_list_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            sir_db: None,
            snr_db: None,
            sample_rate_hz: 10.0e6,
            seed: 0,
            params: WaveformParams::default(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Waveform kind for a single capture (conflicts with --classes)
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<WaveformKind>,

    /// Interferer kind mixed into the capture (requires --snr-db)
    #[arg(long, value_enum, requires = "snr_db", conflicts_with = "classes")]
    #[serde(skip_serializing_if = "Option::is_none")]
    interferer: Option<WaveformKind>,

    /// Dataset mode: comma-separated interferer classes
    #[arg(long, value_enum, value_delimiter = ',', conflicts_with = "kind")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    classes: Vec<WaveformKind>,

    /// Intended (carrier) waveform kind
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    intended: Option<WaveformKind>,

    /// Capture length in samples
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    num_samples: Option<usize>,

    /// Dataset segment length in samples
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    segment_length: Option<usize>,

    /// Dataset segments per (class, SIR) point
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    segments_per_point: Option<usize>,

    /// Dataset SIR points in dB, comma-separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    sir_list_db: Option<Vec<f64>>,

    /// Capture-mode SIR in dB (requires --interferer)
    #[arg(long, requires = "interferer")]
    #[serde(skip_serializing_if = "Option::is_none")]
    sir_db: Option<f64>,

    /// SNR in dB against unit-power noise
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    snr_db: Option<f64>,

    /// Sample rate in Hz
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_rate_hz: Option<f64>,

    /// Master seed for all randomness
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,

    /// Tone frequency offset in Hz
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "nested_tone")]
    tone_freq_hz: Option<f64>,

    /// JSON config file (flags override it)
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, default_value = "synth_out")]
    #[serde(skip)]
    out: PathBuf,
}

// --tone-freq-hz lives under params.tone_freq_hz in the config schema
fn nested_tone<S: serde::Serializer>(v: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = ser.serialize_map(Some(1))?;
    map.serialize_entry("tone_freq_hz", v)?;
    map.end()
}

// flatten the tone override into params before resolution
fn flags_value(args: &SynthArgs) -> CliResult<serde_json::Value> {
    let mut value = serde_json::to_value(args).map_err(CliError::from)?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(tone) = obj.remove("tone_freq_hz") {
            obj.insert("params".into(), tone);
        }
    }
    Ok(value)
}

pub fn run(args: SynthArgs) -> CliResult<i32> {
    let flags = flags_value(&args)?;
    let config: SynthConfig = resolve(args.config.as_deref(), &flags)?;

    match (&config.kind, config.classes.is_empty()) {
        (Some(_), false) => {
            return Err(CliError::usage(
                "choose either --kind (capture) or --classes (dataset), not both",
            ))
        }
        (None, true) => {
            return Err(CliError::usage(
                "nothing to synthesize: pass --kind for a capture or --classes for a dataset",
            ))
        }
        _ => {}
    }

    fs::create_dir_all(&args.out)?;

    if let Some(kind) = config.kind {
        run_capture(&args, &config, kind)?;
    } else {
        run_dataset(&args, &config)?;
    }
    write_run_config(&args.out, "synth", &config)?;
    Ok(EXIT_OK)
}

fn run_capture(args: &SynthArgs, config: &SynthConfig, kind: WaveformKind) -> CliResult<()> {
    let spec = WaveformSpec {
        kind,
        num_samples: config.num_samples,
        sample_rate_hz: config.sample_rate_hz,
        seed: clearsky_core::wavegen::derive_seed(config.seed, 0),
        params: config.params,
    };
    let clean = generate(&spec)?;

    if config.sir_db.is_some() && config.interferer.is_none() {
        return Err(CliError::usage("--sir-db requires --interferer"));
    }

    let (capture, sir_db) = match (config.snr_db, config.interferer) {
        (None, None) => (clean, f64::INFINITY),
        (None, Some(_)) => {
            return Err(CliError::usage("--interferer mixing requires --snr-db"));
        }
        (Some(snr_db), interferer) => {
            let sir_db = match interferer {
                Some(_) => config.sir_db.unwrap_or(f64::INFINITY),
                None => f64::INFINITY,
            };
            let other = WaveformSpec {
                kind: interferer.unwrap_or(WaveformKind::Tone),
                num_samples: config.num_samples,
                sample_rate_hz: config.sample_rate_hz,
                seed: clearsky_core::wavegen::derive_seed(config.seed, 1),
                params: config.params,
            };
            let interference = generate(&other)?;
            let (mixed, _beta) = mix(
                &clean,
                &interference,
                &MixSpec { snr_db, sir_db },
                clearsky_core::wavegen::derive_seed(config.seed, 2),
            )?;
            (mixed, sir_db)
        }
    };

    let file = "capture.iq";
    write_iq_file(args.out.join(file), &capture)?;
    let record = ManifestRecord {
        class: config
            .interferer
            .map(|k| k.class_name().to_string())
            .unwrap_or_else(|| "NONE".to_string()),
        sir_db,
        seed: config.seed,
        file: file.to_string(),
    };
    let manifest = serde_json::to_string_pretty(&vec![record])?;
    fs::write(args.out.join("manifest.json"), manifest)?;
    Ok(())
}

fn run_dataset(args: &SynthArgs, config: &SynthConfig) -> CliResult<()> {
    let class_specs: Vec<WaveformSpec> = config
        .classes
        .iter()
        .map(|&kind| WaveformSpec {
            kind,
            num_samples: config.segment_length,
            sample_rate_hz: config.sample_rate_hz,
            seed: 0,
            params: config.params,
        })
        .collect();
    let intended = WaveformSpec {
        kind: config.intended,
        num_samples: config.segment_length,
        sample_rate_hz: config.sample_rate_hz,
        seed: 0,
        params: config.params,
    };
    let dataset = build_dataset(
        &class_specs,
        &intended,
        config.snr_db.unwrap_or(20.0),
        &config.sir_list_db,
        config.segments_per_point,
        config.seed,
    )?;
    dataset.save_to_dir(&args.out)?;
    Ok(())
}
