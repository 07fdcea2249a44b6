// Scratch experiment driver used while tuning defaults. Not part of the
// public surface.

use std::time::Instant;

use clearsky_core::autodetect::{
    calibrate, detect, AutoencoderConfig, DetectorThresholds, SparseAutoencoder,
};
use clearsky_core::iq::IqSegment;
use clearsky_core::lstmclass::{evaluate, sir_sweep, train_classifier, TrainConfig};
use clearsky_core::wavegen::{
    build_dataset, derive_seed, generate, mix, MixSpec, WaveformKind, WaveformSpec,
};
use clearsky_core::SEGMENT_LEN;

const FS: f64 = 10.0e6;

fn clean_segments(count: usize, snr_db: f64, seed: u64) -> Vec<IqSegment> {
    let spec = WaveformSpec::new(WaveformKind::Dvbs2Like, SEGMENT_LEN, FS, 0);
    let dummy = WaveformSpec::new(WaveformKind::Tone, SEGMENT_LEN, FS, 0);
    (0..count)
        .map(|k| {
            let s = derive_seed(seed, k as u64);
            let x = generate(&spec.with_seed(derive_seed(s, 0))).unwrap();
            let i = generate(&dummy.with_seed(derive_seed(s, 1))).unwrap();
            let (y, _) = mix(
                &x,
                &i,
                &MixSpec {
                    snr_db,
                    sir_db: f64::INFINITY,
                },
                derive_seed(s, 2),
            )
            .unwrap();
            y
        })
        .collect()
}

fn tone_segments(
    count: usize,
    snr_db: f64,
    sir_db: f64,
    seed: u64,
    random_freq: bool,
) -> Vec<IqSegment> {
    let spec = WaveformSpec::new(WaveformKind::Dvbs2Like, SEGMENT_LEN, FS, 0);
    let mut tone = WaveformSpec::new(WaveformKind::Tone, SEGMENT_LEN, FS, 0);
    (0..count)
        .map(|k| {
            let s = derive_seed(seed, k as u64);
            let x = generate(&spec.with_seed(derive_seed(s, 0))).unwrap();
            if random_freq {
                // uniform in-band frequency from the per-segment seed
                let u = derive_seed(s, 3) as f64 / u64::MAX as f64;
                tone.params.tone_freq_hz = Some((u * 0.3 - 0.15) * FS);
            }
            let i = generate(&tone.with_seed(derive_seed(s, 1))).unwrap();
            let (y, _) = mix(&x, &i, &MixSpec { snr_db, sir_db }, derive_seed(s, 2)).unwrap();
            y
        })
        .collect()
}

fn pilot_detection() {
    println!("=== detection pilot ===");
    for random_freq in [false, true] {
        println!("--- per-segment random tone frequency: {random_freq} ---");
        for seed in 0..5u64 {
            let t0 = Instant::now();
            let train = clean_segments(200, 20.0, derive_seed(seed, 100));
            let calib = clean_segments(200, 20.0, derive_seed(seed, 200));
            let clean_test = clean_segments(200, 20.0, derive_seed(seed, 300));
            let tone_test = tone_segments(200, 20.0, 10.0, derive_seed(seed, 400), random_freq);

            let config = AutoencoderConfig::default();
            let (model, history) = SparseAutoencoder::train(&train, &config, seed).unwrap();
            let cal = calibrate(&model, &calib, &DetectorThresholds::default()).unwrap();
            let on_clean = detect(&model, &cal, &clean_test).unwrap();
            let on_tone = detect(&model, &cal, &tone_test).unwrap();
            println!(
                "seed {seed}: loss->{:.2e} | base skew {:+.3} | clean det={} skew {:+.3} dvar={:+.3} dskew={:+.3} | tone det={} skew {:+.3} dmean={:+.3} dvar={:+.3} dskew={:+.3} dkurt={:+.3} | {:.1}s",
                history.last().unwrap(),
                cal.baseline.skewness,
                on_clean.interference_detected,
                on_clean.observed.skewness,
                on_clean.relative_increase.variance,
                on_clean.relative_increase.skewness,
                on_tone.interference_detected,
                on_tone.observed.skewness,
                on_tone.relative_increase.mean,
                on_tone.relative_increase.variance,
                on_tone.relative_increase.skewness,
                on_tone.relative_increase.kurtosis,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}

fn pilot_classification() {
    println!("=== classification pilot ===");
    let lr: f64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1e-3);
    let epochs: usize = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(8);
    println!("lr {lr} epochs {epochs}");
    let classes = vec![
        WaveformSpec::new(WaveformKind::LteLike, SEGMENT_LEN, FS, 0),
        WaveformSpec::new(WaveformKind::UmtsLike, SEGMENT_LEN, FS, 0),
        WaveformSpec::new(WaveformKind::GsmLike, SEGMENT_LEN, FS, 0),
    ];
    let intended = WaveformSpec::new(WaveformKind::Dvbs2Like, SEGMENT_LEN, FS, 0);

    let t0 = Instant::now();
    // 200 per (class, SIR) x 3 classes x 3 SIRs = 1800 segments
    let train_set = build_dataset(&classes, &intended, 20.0, &[0.0, 5.0, 10.0], 200, 1).unwrap();
    println!("dataset built: {} segments in {:.1}s", train_set.len(), t0.elapsed().as_secs_f64());

    let config = TrainConfig {
        epochs,
        seed: 1,
        adam: clearsky_core::lstmclass::AdamHyper {
            alpha: lr,
            ..Default::default()
        },
        ..Default::default()
    };
    let t0 = Instant::now();
    let (model, history) = train_classifier(&train_set, &config).unwrap();
    println!(
        "trained {} epochs in {:.1}s; loss {:?}",
        config.epochs,
        t0.elapsed().as_secs_f64(),
        history
            .epoch_loss
            .iter()
            .map(|l| format!("{l:.3}"))
            .collect::<Vec<_>>()
    );
    println!(
        "holdout acc {:?}",
        history
            .holdout_accuracy
            .iter()
            .map(|a| format!("{a:.3}"))
            .collect::<Vec<_>>()
    );

    let t0 = Instant::now();
    let eval_set = build_dataset(&classes, &intended, 20.0, &[0.0], 50, 999).unwrap();
    let report = evaluate(&model, &eval_set).unwrap();
    println!(
        "eval at 0 dB: accuracy {:.3} rmse {:.3} ({} segments, {:.1}s)",
        report.accuracy_overall,
        report.rmse,
        report.total,
        t0.elapsed().as_secs_f64()
    );

    let t0 = Instant::now();
    let series = sir_sweep(&model, &classes, &intended, 20.0, &[0.0, 10.0, 20.0, 30.0], 50, 7).unwrap();
    for (sir, rep) in &series {
        println!(
            "sweep {sir} dB: acc {:.3} rmse {:.3} per-class acc {:?}",
            rep.accuracy_overall,
            rep.rmse,
            rep.accuracy_per_class
                .iter()
                .map(|a| format!("{a:.2}"))
                .collect::<Vec<_>>()
        );
    }
    println!("sweep took {:.1}s", t0.elapsed().as_secs_f64());
}

fn dump_mse_vectors() {
    use clearsky_core::autodetect::mse_vector;
    use std::io::Write;
    let seed = 0u64;
    let train = clean_segments(200, 20.0, derive_seed(seed, 100));
    let calib = clean_segments(200, 20.0, derive_seed(seed, 200));
    let clean_test = clean_segments(200, 20.0, derive_seed(seed, 300));
    let tone_fixed = tone_segments(200, 20.0, 10.0, derive_seed(seed, 400), false);
    let tone_rand = tone_segments(200, 20.0, 10.0, derive_seed(seed, 400), true);

    let config = AutoencoderConfig::default();
    let (model, _) = SparseAutoencoder::train(&train, &config, seed).unwrap();
    let mut out = std::fs::File::create("/tmp/mse_dump.csv").unwrap();
    writeln!(out, "set,mse").unwrap();
    for (name, segs) in [
        ("train", &train),
        ("calib", &calib),
        ("clean", &clean_test),
        ("tone_fixed", &tone_fixed),
        ("tone_rand", &tone_rand),
    ] {
        let v = mse_vector(&model, segs).unwrap();
        for mse in v.values() {
            writeln!(out, "{name},{mse:e}").unwrap();
        }
    }
    println!("wrote /tmp/mse_dump.csv");
}

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_default();
    match arg.as_str() {
        "detect" => pilot_detection(),
        "classify" => pilot_classification(),
        "dump" => dump_mse_vectors(),
        _ => {
            pilot_detection();
            pilot_classification();
        }
    }
}
