//! Deterministic surrogate waveform synthesis and the SNR/SIR channel model.
//!
//! Six waveform families stand in for captured air interfaces at desk scale:
//!
//! * `dvbs2_like` — root-raised-cosine filtered QPSK (roll-off 0.25, 4
//!   samples/symbol), the intended downlink signal.
//! * `lte_like` — cyclic-prefix OFDM, 128-point FFT with 64 active
//!   QPSK-modulated subcarriers, CP length 9, raised-cosine edge taper.
//! * `umts_like` — direct-sequence spread QPSK, spreading factor 8, chip
//!   rate at half the sample rate.
//! * `gsm_like` — Gaussian minimum-shift keying, BT = 0.3, 4 samples/symbol,
//!   constant envelope.
//! * `tone` — complex exponential at a configurable frequency offset.
//! * `awgn` — circularly-symmetric complex Gaussian noise.
//!
//! Every generated waveform is normalized to unit mean power. All randomness
//! flows from `ChaCha8Rng::seed_from_u64`, a portable seedable generator, so
//! identical specs produce bitwise-identical samples on every platform.
//!
//! [`mix`] combines an intended signal with an interferer:
//! `y = sqrt(rho) * (x + sqrt(beta) * i) + w`, where `rho` is the linear SNR
//! against unit-power noise `w` and `beta` scales the interferer so the
//! measured-power ratio matches the requested SIR exactly.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::iq::{measure_power, IqSegment};
use crate::iqfile;

/// Waveform family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Dvbs2Like,
    LteLike,
    UmtsLike,
    GsmLike,
    Tone,
    Awgn,
}

impl WaveformKind {
    /// Class label used in dataset manifests and classifier outputs.
    pub fn class_name(self) -> &'static str {
        match self {
            WaveformKind::Dvbs2Like => "DVBS2",
            WaveformKind::LteLike => "LTE",
            WaveformKind::UmtsLike => "UMTS",
            WaveformKind::GsmLike => "GSM",
            WaveformKind::Tone => "TONE",
            WaveformKind::Awgn => "AWGN",
        }
    }
}

impl std::str::FromStr for WaveformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dvbs2_like" => Ok(WaveformKind::Dvbs2Like),
            "lte_like" => Ok(WaveformKind::LteLike),
            "umts_like" => Ok(WaveformKind::UmtsLike),
            "gsm_like" => Ok(WaveformKind::GsmLike),
            "tone" => Ok(WaveformKind::Tone),
            "awgn" => Ok(WaveformKind::Awgn),
            other => Err(Error::InvalidSpec(format!("unknown waveform kind {other:?}"))),
        }
    }
}

/// Kind-specific shape parameters. Only the fields relevant to the selected
/// kind are consulted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformParams {
    /// RRC roll-off for `dvbs2_like`.
    pub rrc_rolloff: f64,
    /// Samples per symbol for `dvbs2_like`.
    pub rrc_sps: usize,
    /// RRC filter span in symbols on each side.
    pub rrc_span: usize,
    /// OFDM FFT size for `lte_like`.
    pub ofdm_fft_size: usize,
    /// Number of active subcarriers for `lte_like`.
    pub ofdm_active: usize,
    /// Cyclic prefix length in samples for `lte_like`.
    pub ofdm_cp_len: usize,
    /// Raised-cosine edge taper length for `lte_like` symbols; confines the
    /// occupied band without changing the symbol period.
    pub ofdm_taper_len: usize,
    /// Chips per data symbol for `umts_like`.
    pub dsss_spread_factor: usize,
    /// Samples per chip for `umts_like` (chip rate = sample_rate / this).
    pub dsss_samples_per_chip: usize,
    /// Gaussian filter bandwidth-time product for `gsm_like`.
    pub gmsk_bt: f64,
    /// Samples per symbol for `gsm_like`.
    pub gmsk_sps: usize,
    /// Tone frequency offset in Hz; `None` defaults to sample_rate / 10.
    pub tone_freq_hz: Option<f64>,
}

impl Default for WaveformParams {
    fn default() -> Self {
        Self {
            rrc_rolloff: 0.25,
            rrc_sps: 4,
            rrc_span: 8,
            ofdm_fft_size: 128,
            ofdm_active: 64,
            ofdm_cp_len: 9,
            ofdm_taper_len: 8,
            dsss_spread_factor: 8,
            dsss_samples_per_chip: 2,
            gmsk_bt: 0.3,
            gmsk_sps: 4,
            tone_freq_hz: None,
        }
    }
}

/// Full description of one waveform realization. Identical specs (including
/// the seed) generate bitwise-identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    pub num_samples: usize,
    pub sample_rate_hz: f64,
    pub seed: u64,
    #[serde(default)]
    pub params: WaveformParams,
}

impl WaveformSpec {
    pub fn new(kind: WaveformKind, num_samples: usize, sample_rate_hz: f64, seed: u64) -> Self {
        Self {
            kind,
            num_samples,
            sample_rate_hz,
            seed,
            params: WaveformParams::default(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_num_samples(&self, num_samples: usize) -> Self {
        Self {
            num_samples,
            ..self.clone()
        }
    }
}

/// Stable seed derivation for counter-indexed sub-streams (SplitMix64
/// finalizer over master XOR golden-ratio multiples).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn qpsk_symbol(rng: &mut ChaCha8Rng) -> Complex64 {
    let re = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let im = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Generates the waveform described by `spec`, normalized to unit mean power.
pub fn generate(spec: &WaveformSpec) -> Result<IqSegment> {
    if spec.num_samples == 0 {
        return Err(Error::InvalidSpec("num_samples must be positive".into()));
    }
    if !(spec.sample_rate_hz.is_finite() && spec.sample_rate_hz > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "sample rate must be positive, got {}",
            spec.sample_rate_hz
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = match spec.kind {
        WaveformKind::Dvbs2Like => gen_rrc_qpsk(spec, &mut rng)?,
        WaveformKind::LteLike => gen_ofdm(spec, &mut rng)?,
        WaveformKind::UmtsLike => gen_dsss(spec, &mut rng)?,
        WaveformKind::GsmLike => gen_gmsk(spec, &mut rng)?,
        WaveformKind::Tone => gen_tone(spec, &mut rng)?,
        WaveformKind::Awgn => (0..spec.num_samples).map(|_| complex_gaussian(&mut rng)).collect(),
    };
    normalize_unit_power(&mut samples);
    IqSegment::new(samples, spec.sample_rate_hz)
}

fn normalize_unit_power(samples: &mut [Complex64]) {
    let power: f64 =
        samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    if power > 0.0 {
        let scale = 1.0 / power.sqrt();
        for s in samples.iter_mut() {
            *s *= scale;
        }
    }
}

/// Root-raised-cosine taps with `span` symbols on each side.
fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let half = span * sps;
    (0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 + rolloff * (4.0 / PI - 1.0)
            } else if (t.abs() - 1.0 / (4.0 * rolloff)).abs() < 1e-9 {
                let a = PI / (4.0 * rolloff);
                (rolloff / 2f64.sqrt())
                    * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
            } else {
                let num = (PI * t * (1.0 - rolloff)).sin()
                    + 4.0 * rolloff * t * (PI * t * (1.0 + rolloff)).cos();
                let den = PI * t * (1.0 - (4.0 * rolloff * t).powi(2));
                num / den
            }
        })
        .collect()
}

fn gen_rrc_qpsk(spec: &WaveformSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    let p = &spec.params;
    if p.rrc_sps == 0 || p.rrc_span == 0 {
        return Err(Error::InvalidSpec("rrc_sps and rrc_span must be positive".into()));
    }
    if !(p.rrc_rolloff > 0.0 && p.rrc_rolloff <= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "rrc_rolloff must be in (0, 1], got {}",
            p.rrc_rolloff
        )));
    }
    let taps = rrc_taps(p.rrc_rolloff, p.rrc_sps, p.rrc_span);
    let num_symbols = (spec.num_samples + taps.len()) / p.rrc_sps + 2;
    let mut shaped = vec![Complex64::default(); num_symbols * p.rrc_sps + taps.len()];
    for k in 0..num_symbols {
        let sym = qpsk_symbol(rng);
        let base = k * p.rrc_sps;
        for (j, &tap) in taps.iter().enumerate() {
            shaped[base + j] += sym * tap;
        }
    }
    // skip the fill-in transient of the first taps.len() samples
    let start = taps.len();
    Ok(shaped[start..start + spec.num_samples].to_vec())
}

fn gen_ofdm(spec: &WaveformSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    let p = &spec.params;
    let n = p.ofdm_fft_size;
    if n == 0 || p.ofdm_active == 0 {
        return Err(Error::InvalidSpec("ofdm sizes must be positive".into()));
    }
    if p.ofdm_active >= n {
        return Err(Error::InvalidSpec(format!(
            "occupied bandwidth exceeds sample rate: {} active of {} subcarriers",
            p.ofdm_active, n
        )));
    }
    if p.ofdm_cp_len >= n || p.ofdm_taper_len > p.ofdm_cp_len {
        return Err(Error::InvalidSpec(
            "ofdm_cp_len must be below fft size and at least the taper length".into(),
        ));
    }
    let period = n + p.ofdm_cp_len;
    let taper = p.ofdm_taper_len;
    let count = spec.num_samples / period + 3;

    // active bins +/-1..active/2 around DC (DC itself unmodulated)
    let half_active = p.ofdm_active / 2;
    let bins: Vec<usize> = (1..=half_active)
        .chain((n - (p.ofdm_active - half_active))..n)
        .collect();

    let ifft = rustfft::FftPlanner::new().plan_fft_inverse(n);
    let ramp: Vec<f64> = (0..taper)
        .map(|i| 0.5 * (1.0 - (PI * (i as f64 + 0.5) / taper as f64).cos()))
        .collect();

    let mut out = vec![Complex64::default(); count * period + taper + 1];
    let mut freq = vec![Complex64::default(); n];
    for m in 0..count {
        for slot in freq.iter_mut() {
            *slot = Complex64::default();
        }
        for &k in &bins {
            freq[k] = qpsk_symbol(rng);
        }
        let mut time = freq.clone();
        ifft.process(&mut time);
        // CP + body + cyclic suffix, raised-cosine edges, overlap-add
        let sym_len = p.ofdm_cp_len + n + taper;
        let base = m * period;
        for j in 0..sym_len {
            let src = if j < p.ofdm_cp_len {
                n - p.ofdm_cp_len + j
            } else {
                (j - p.ofdm_cp_len) % n
            };
            let mut v = time[src];
            if j < taper {
                v *= ramp[j];
            } else if j >= sym_len - taper {
                v *= ramp[sym_len - 1 - j];
            }
            out[base + j] += v;
        }
    }
    let start = period; // skip the first, partially-tapered symbol
    Ok(out[start..start + spec.num_samples].to_vec())
}

fn gen_dsss(spec: &WaveformSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    let p = &spec.params;
    if p.dsss_spread_factor == 0 || p.dsss_samples_per_chip == 0 {
        return Err(Error::InvalidSpec("dsss parameters must be positive".into()));
    }
    let spc = p.dsss_samples_per_chip;
    let num_chips = spec.num_samples / spc + 1;
    let num_syms = num_chips / p.dsss_spread_factor + 1;
    let symbols: Vec<Complex64> = (0..num_syms).map(|_| qpsk_symbol(rng)).collect();
    let mut out = Vec::with_capacity(spec.num_samples);
    'outer: for c in 0..num_chips {
        let chip = qpsk_symbol(rng); // scrambling chip
        let value = symbols[c / p.dsss_spread_factor] * chip * 2f64.sqrt();
        for _ in 0..spc {
            out.push(value);
            if out.len() == spec.num_samples {
                break 'outer;
            }
        }
    }
    Ok(out)
}

fn gen_gmsk(spec: &WaveformSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    let p = &spec.params;
    if p.gmsk_sps == 0 {
        return Err(Error::InvalidSpec("gmsk_sps must be positive".into()));
    }
    if !(p.gmsk_bt > 0.0 && p.gmsk_bt.is_finite()) {
        return Err(Error::InvalidSpec(format!("gmsk_bt must be positive, got {}", p.gmsk_bt)));
    }
    let sps = p.gmsk_sps as f64;
    // Gaussian frequency pulse: rect(T) convolved with a Gaussian of
    // sigma = sqrt(ln 2) / (2 pi BT) symbol periods; sum normalized to 1 so
    // each bit advances the phase by pi/2 (modulation index 0.5).
    let sigma_samples = (2f64.ln()).sqrt() / (2.0 * PI * p.gmsk_bt) * sps;
    let half_kernel = (4.0 * sigma_samples).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * half_kernel)
        .map(|i| {
            let t = i as f64 - half_kernel as f64;
            (-0.5 * (t / sigma_samples).powi(2)).exp()
        })
        .collect();
    let mut pulse = vec![0.0; kernel.len() + p.gmsk_sps - 1];
    for j in 0..p.gmsk_sps {
        for (i, &k) in kernel.iter().enumerate() {
            pulse[i + j] += k;
        }
    }
    let total: f64 = pulse.iter().sum();
    for v in pulse.iter_mut() {
        *v /= total;
    }

    let num_bits = spec.num_samples / p.gmsk_sps + pulse.len() / p.gmsk_sps + 4;
    let mut freq = vec![0.0f64; num_bits * p.gmsk_sps + pulse.len()];
    for k in 0..num_bits {
        let bit = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let base = k * p.gmsk_sps;
        for (j, &g) in pulse.iter().enumerate() {
            freq[base + j] += bit * g;
        }
    }
    let start = pulse.len();
    let mut phase = 0.0f64;
    Ok(freq[start..start + spec.num_samples]
        .iter()
        .map(|&f| {
            phase += PI * 0.5 * f;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect())
}

fn gen_tone(spec: &WaveformSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Complex64>> {
    let f0 = spec
        .params
        .tone_freq_hz
        .unwrap_or(spec.sample_rate_hz / 10.0);
    if !f0.is_finite() || f0.abs() >= spec.sample_rate_hz / 2.0 {
        return Err(Error::InvalidSpec(format!(
            "occupied bandwidth exceeds sample rate: tone at {} Hz with sample rate {} Hz",
            f0, spec.sample_rate_hz
        )));
    }
    let phase0 = rng.gen::<f64>() * 2.0 * PI;
    let step = 2.0 * PI * f0 / spec.sample_rate_hz;
    Ok((0..spec.num_samples)
        .map(|n| {
            let phase = phase0 + step * n as f64;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect())
}

/// Channel parameters of the mixing model: SNR against unit-power noise and
/// the target signal-to-interference ratio. `sir_db = +inf` means no
/// interference; the mixer then uses scale `beta = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub snr_db: f64,
    #[serde(with = "sir_db_serde")]
    pub sir_db: f64,
}

/// JSON mapping for SIR values: `null` encodes +inf (no interference).
pub mod sir_db_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && *value > 0.0 {
            ser.serialize_none()
        } else {
            ser.serialize_some(value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        let opt = Option::<f64>::deserialize(de)?;
        Ok(opt.unwrap_or(f64::INFINITY))
    }
}

/// Mixes `interference` into `intended` at the requested SIR and SNR.
///
/// `beta = P_x / (10^(sir/10) * P_i)` is computed from measured powers, so
/// the realized measured-power ratio equals the request exactly. The output
/// is `y = sqrt(rho) * (x + sqrt(beta) * i) + w` with `rho = 10^(snr/10)` and
/// `w` fresh unit-power complex white Gaussian noise drawn from `seed`.
/// Returns the mixed segment and the realized `beta`.
pub fn mix(
    intended: &IqSegment,
    interference: &IqSegment,
    spec: &MixSpec,
    seed: u64,
) -> Result<(IqSegment, f64)> {
    if intended.len() != interference.len() {
        return Err(Error::MismatchedInputs(format!(
            "lengths {} vs {}",
            intended.len(),
            interference.len()
        )));
    }
    if intended.sample_rate_hz() != interference.sample_rate_hz() {
        return Err(Error::MismatchedInputs(format!(
            "sample rates {} vs {}",
            intended.sample_rate_hz(),
            interference.sample_rate_hz()
        )));
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidSpec(format!("snr_db must be finite, got {}", spec.snr_db)));
    }
    if spec.sir_db.is_nan() || spec.sir_db == f64::NEG_INFINITY {
        return Err(Error::InvalidSpec(format!(
            "sir_db must be finite or +inf, got {}",
            spec.sir_db
        )));
    }

    let beta = if spec.sir_db == f64::INFINITY {
        0.0
    } else {
        let p_x = measure_power(intended).mean_power;
        let p_i = measure_power(interference).mean_power;
        if p_i == 0.0 {
            return Err(Error::InvalidSpec(
                "interference has zero power; finite SIR unrealizable".into(),
            ));
        }
        p_x / (10f64.powf(spec.sir_db / 10.0) * p_i)
    };

    let rho_sqrt = 10f64.powf(spec.snr_db / 20.0);
    let beta_sqrt = beta.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Complex64> = intended
        .samples()
        .iter()
        .zip(interference.samples())
        .map(|(x, i)| rho_sqrt * (x + beta_sqrt * i) + complex_gaussian(&mut rng))
        .collect();
    Ok((IqSegment::new(samples, intended.sample_rate_hz())?, beta))
}

/// One labeled mixed segment of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub class_index: usize,
    pub sir_db: f64,
    pub seed: u64,
    pub segment: IqSegment,
}

/// A labeled dataset of mixed segments with a fixed class ordering.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub class_names: Vec<String>,
    pub records: Vec<DatasetRecord>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Deterministic Fisher-Yates shuffle of the record order.
    pub fn shuffle(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.records.shuffle(&mut rng);
    }
}

/// Manifest entry schema: `{class, sir_db, seed, file}`. A `null` SIR encodes
/// +inf (no interference).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub class: String,
    #[serde(with = "sir_db_serde")]
    pub sir_db: f64,
    pub seed: u64,
    pub file: String,
}

/// Builds a labeled dataset of mixed segments.
///
/// For every SIR in `sir_list_db` and every repetition, one segment per class
/// is emitted in class order, so labels cycle through `classes` exactly as
/// listed. Per-segment seeds derive from `seed` by counter, making
/// construction deterministic and order-independent. Class template seeds are
/// ignored; their `num_samples`/`sample_rate_hz` must match the intended
/// spec.
pub fn build_dataset(
    classes: &[WaveformSpec],
    intended: &WaveformSpec,
    snr_db: f64,
    sir_list_db: &[f64],
    segments_per_point: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes.is_empty() {
        return Err(Error::InvalidSpec("classes must be non-empty".into()));
    }
    if sir_list_db.is_empty() {
        return Err(Error::InvalidSpec("sir list must be non-empty".into()));
    }
    for c in classes {
        if c.num_samples != intended.num_samples || c.sample_rate_hz != intended.sample_rate_hz {
            return Err(Error::MismatchedInputs(
                "class specs must match the intended num_samples and sample rate".into(),
            ));
        }
    }

    let class_names: Vec<String> = classes.iter().map(|c| c.kind.class_name().to_string()).collect();
    let mut records =
        Vec::with_capacity(sir_list_db.len() * segments_per_point * classes.len());
    let mut counter = 0u64;
    for &sir_db in sir_list_db {
        for _ in 0..segments_per_point {
            for (class_index, class_spec) in classes.iter().enumerate() {
                let record_seed = derive_seed(seed, counter);
                counter += 1;
                let x = generate(&intended.with_seed(derive_seed(record_seed, 0)))?;
                let i = generate(&class_spec.with_seed(derive_seed(record_seed, 1)))?;
                let (segment, _beta) =
                    mix(&x, &i, &MixSpec { snr_db, sir_db }, derive_seed(record_seed, 2))?;
                records.push(DatasetRecord {
                    class_index,
                    sir_db,
                    seed: record_seed,
                    segment,
                });
            }
        }
    }
    Ok(LabeledDataset {
        class_names,
        records,
    })
}

impl LabeledDataset {
    /// Writes all segments as IQ files into `dir` plus a `manifest.json`
    /// holding the JSON array of manifest records.
    pub fn save_to_dir<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = Vec::with_capacity(self.records.len());
        for (i, rec) in self.records.iter().enumerate() {
            let file = format!("seg_{i:05}.iq");
            iqfile::write_iq_file(dir.join(&file), &rec.segment)?;
            manifest.push(ManifestRecord {
                class: self.class_names[rec.class_index].clone(),
                sir_db: rec.sir_db,
                seed: rec.seed,
                file,
            });
        }
        let json = serde_json::to_vec_pretty(&manifest)?;
        fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }

    /// Loads a dataset from a manifest file; IQ paths resolve relative to the
    /// manifest's directory. Class ordering follows first appearance.
    pub fn load_from_manifest<P: AsRef<Path>>(manifest_path: P) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let bytes = fs::read(manifest_path)?;
        let manifest: Vec<ManifestRecord> = serde_json::from_slice(&bytes)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let mut class_names: Vec<String> = Vec::new();
        let mut records = Vec::with_capacity(manifest.len());
        for rec in manifest {
            let class_index = match class_names.iter().position(|c| *c == rec.class) {
                Some(i) => i,
                None => {
                    class_names.push(rec.class.clone());
                    class_names.len() - 1
                }
            };
            let segment = iqfile::read_iq_file(base.join(&rec.file))?;
            records.push(DatasetRecord {
                class_index,
                sir_db: rec.sir_db,
                seed: rec.seed,
                segment,
            });
        }
        Ok(Self {
            class_names,
            records,
        })
    }
}
