//! Bit-exact IQ capture files.
//!
//! Raw format `cf32le`: interleaved 32-bit little-endian IEEE-754 floats,
//! I then Q for each sample (8 bytes per complex sample). A mandatory JSON
//! sidecar at `<path>.json` declares the format, sample rate and sample
//! count:
//!
//! ```json
//! {"format":"cf32le","sample_rate_hz":10000000.0,"num_samples":512}
//! ```
//!
//! Samples are held as 64-bit floats in memory; writing truncates to 32-bit.
//! A file read back and rewritten reproduces identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iq::IqSegment;

pub const IQ_FORMAT: &str = "cf32le";
/// Bytes per complex sample (two f32 values).
pub const BYTES_PER_SAMPLE: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    sample_rate_hz: f64,
    num_samples: u64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Encodes samples as interleaved little-endian f32 pairs.
pub fn encode_cf32le(samples: &[Complex64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(samples.len() * BYTES_PER_SAMPLE);
    for s in samples {
        bytes.extend_from_slice(&(s.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    bytes
}

/// Decodes interleaved little-endian f32 pairs. The byte length must be a
/// multiple of the 8-byte record size.
pub fn decode_cf32le(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % BYTES_PER_SAMPLE != 0 {
        return Err(Error::MalformedIqFile(format!(
            "length {} is not a multiple of the {}-byte record size",
            bytes.len(),
            BYTES_PER_SAMPLE
        )));
    }
    Ok(bytes
        .chunks_exact(BYTES_PER_SAMPLE)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            Complex64::new(re, im)
        })
        .collect())
}

/// Writes `segment` as a cf32le raw file plus its JSON sidecar.
pub fn write_iq_file<P: AsRef<Path>>(path: P, segment: &IqSegment) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cf32le(segment.samples()))?;
    let sidecar = Sidecar {
        format: IQ_FORMAT.to_string(),
        sample_rate_hz: segment.sample_rate_hz(),
        num_samples: segment.len() as u64,
    };
    fs::write(sidecar_path(path), serde_json::to_vec(&sidecar)?)?;
    Ok(())
}

/// Reads a cf32le raw file and its JSON sidecar back into a segment.
pub fn read_iq_file<P: AsRef<Path>>(path: P) -> Result<IqSegment> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let sidecar_bytes = fs::read(&side).map_err(|e| {
        Error::MissingMetadata(format!("sidecar {}: {}", side.display(), e))
    })?;
    let sidecar: Sidecar = serde_json::from_slice(&sidecar_bytes)
        .map_err(|e| Error::MissingMetadata(format!("sidecar {}: {}", side.display(), e)))?;
    if sidecar.format != IQ_FORMAT {
        return Err(Error::MissingMetadata(format!(
            "unsupported format {:?}, expected {:?}",
            sidecar.format, IQ_FORMAT
        )));
    }

    let bytes = fs::read(path)?;
    let samples = decode_cf32le(&bytes)?;
    if samples.len() as u64 != sidecar.num_samples {
        return Err(Error::MalformedIqFile(format!(
            "file holds {} samples but sidecar declares {}",
            samples.len(),
            sidecar.num_samples
        )));
    }
    IqSegment::new(samples, sidecar.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_f32_samples(n: usize, seed: u64) -> Vec<Complex64> {
        // f32-representable values so the 32-bit file round-trips exactly
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Complex64::new(
                    rng.gen_range(-4.0f32..4.0) as f64,
                    rng.gen_range(-4.0f32..4.0) as f64,
                )
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("capture.iq");
        let seg = IqSegment::new(random_f32_samples(512, 9), 1e6).unwrap();
        write_iq_file(&path, &seg).unwrap();
        let back = read_iq_file(&path).unwrap();
        assert_eq!(back.sample_rate_hz(), 1e6);
        assert_eq!(back.len(), 512);
        for (a, b) in back.samples().iter().zip(seg.samples()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn file_length_is_eight_bytes_per_sample() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.iq");
        let seg = IqSegment::new(random_f32_samples(123, 3), 2.0).unwrap();
        write_iq_file(&path, &seg).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 8 * 123);
    }

    #[test]
    fn truncated_raw_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.iq");
        fs::write(&path, [0u8; 12]).unwrap();
        fs::write(
            sidecar_path(&path),
            br#"{"format":"cf32le","sample_rate_hz":1.0,"num_samples":2}"#,
        )
        .unwrap();
        let err = read_iq_file(&path).unwrap_err();
        assert!(err.to_string().starts_with("malformed IQ file"), "{err}");
    }

    #[test]
    fn missing_sidecar_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orphan.iq");
        fs::write(&path, [0u8; 16]).unwrap();
        let err = read_iq_file(&path).unwrap_err();
        assert!(err.to_string().starts_with("missing metadata"), "{err}");
    }

    #[test]
    fn invalid_sidecar_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("odd.iq");
        fs::write(&path, [0u8; 16]).unwrap();
        fs::write(sidecar_path(&path), b"not json").unwrap();
        assert!(matches!(
            read_iq_file(&path),
            Err(Error::MissingMetadata(_))
        ));
    }

    #[test]
    fn sample_count_mismatch_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.iq");
        fs::write(&path, [0u8; 16]).unwrap();
        fs::write(
            sidecar_path(&path),
            br#"{"format":"cf32le","sample_rate_hz":1.0,"num_samples":99}"#,
        )
        .unwrap();
        assert!(matches!(read_iq_file(&path), Err(Error::MalformedIqFile(_))));
    }

    proptest! {
        #[test]
        fn encode_decode_identity(values in proptest::collection::vec(any::<(f32, f32)>(), 0..128)) {
            let finite: Vec<Complex64> = values
                .into_iter()
                .filter(|(r, i)| r.is_finite() && i.is_finite())
                .map(|(r, i)| Complex64::new(r as f64, i as f64))
                .collect();
            let decoded = decode_cf32le(&encode_cf32le(&finite)).unwrap();
            prop_assert_eq!(decoded.len(), finite.len());
            for (a, b) in decoded.iter().zip(&finite) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
