// temporary probe used while tuning defaults
use clearsky_core::autodetect::*;
use clearsky_core::iq::IqSegment;
use clearsky_core::wavegen::{derive_seed, generate, mix, MixSpec, WaveformKind, WaveformSpec};
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
            let (y, _) = mix(&x, &i, &MixSpec { snr_db, sir_db: f64::INFINITY }, derive_seed(s, 2)).unwrap();
            y
        })
        .collect()
}

fn tone_segments(count: usize, sir_db: f64, seed: u64) -> Vec<IqSegment> {
    let spec = WaveformSpec::new(WaveformKind::Dvbs2Like, SEGMENT_LEN, FS, 0);
    let tone = WaveformSpec::new(WaveformKind::Tone, SEGMENT_LEN, FS, 0);
    (0..count)
        .map(|k| {
            let s = derive_seed(seed, k as u64);
            let x = generate(&spec.with_seed(derive_seed(s, 0))).unwrap();
            let i = generate(&tone.with_seed(derive_seed(s, 1))).unwrap();
            let (y, _) = mix(&x, &i, &MixSpec { snr_db: 20.0, sir_db }, derive_seed(s, 2)).unwrap();
            y
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn main() {
    let configs: Vec<(String, AutoencoderConfig)> = vec![
        ("h16 b1.0 r0.10 800".into(), AutoencoderConfig { hidden_size: 16, lambda: 1e-6, sparsity_weight: 1.0, sparsity_proportion: 0.10, max_iters: 800, ..Default::default() }),
    ];
    for (label, config) in configs {
        let mut base_skews = Vec::new();
        let mut clean_false = 0;
        let (mut dvars, mut dskews, mut dmeans) = (Vec::new(), Vec::new(), Vec::new());
        let t0 = std::time::Instant::now();
        for seed in 0..10u64 {
            let train = clean_segments(200, 20.0, derive_seed(seed, 100));
            let calib = clean_segments(200, 20.0, derive_seed(seed, 200));
            let clean_test = clean_segments(200, 20.0, derive_seed(seed, 300));
            let tone_test = tone_segments(200, 10.0, derive_seed(seed, 400));
            let (model, _) = SparseAutoencoder::train(&train, &config, seed).unwrap();
            let thresholds = DetectorThresholds {
                variance_threshold: 0.20,
                skewness_threshold: 2.0,
            };
            let cal = calibrate(&model, &calib, &thresholds).unwrap();
            let on_clean = detect(&model, &cal, &clean_test).unwrap();
            let on_tone = detect(&model, &cal, &tone_test).unwrap();
            base_skews.push(cal.baseline.skewness);
            if !on_clean.interference_detected {
                clean_false += 1;
            } else {
                println!(
                    "    seed {seed} clean FIRED: dvar {:+.2} dskew {:+.2}",
                    on_clean.relative_increase.variance, on_clean.relative_increase.skewness
                );
            }
            dvars.push(on_tone.relative_increase.variance);
            dskews.push(on_tone.relative_increase.skewness);
            dmeans.push(on_tone.relative_increase.mean);
        }
        let first5 = |v: &Vec<f64>| median(v[..5].to_vec());
        println!(
            "{label}: base_sk {:?} | clean_false {}/10 | med(0..5) dvar {:+.2} dskew {:+.2} dmean {:+.3} | med(all) dvar {:+.2} dskew {:+.2} | dvars {:?} | dskews {:?} | {:.0}s",
            base_skews.iter().map(|s| format!("{s:+.2}")).collect::<Vec<_>>(),
            clean_false,
            first5(&dvars),
            first5(&dskews),
            first5(&dmeans),
            median(dvars.clone()),
            median(dskews.clone()),
            dvars.iter().map(|s| format!("{s:+.2}")).collect::<Vec<_>>(),
            dskews.iter().map(|s| format!("{s:+.2}")).collect::<Vec<_>>(),
            t0.elapsed().as_secs_f64()
        );
    }
}
