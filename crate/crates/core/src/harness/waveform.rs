//! Raw waveform files: little-endian `f32` samples with a JSON sidecar
//! (`<file>.json`) recording how they were made.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigsynth::{ModulationScheme, RealSignal};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 16_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformMeta {
    pub sample_rate_hz: f64,
    pub num_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<ModulationScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Absent for a noiseless waveform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_waveform(signal: &RealSignal, meta: &WaveformMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = signal.samples.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))
}

/// Reads a raw waveform. Without a sidecar the sample rate defaults to
/// 16 kHz.
pub fn read_waveform(path: impl AsRef<Path>) -> Result<(RealSignal, Option<WaveformMeta>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % 4 != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: (bytes.len() - bytes.len() % 4) as u64,
            message: "length is not a positive multiple of 4 bytes".into(),
        });
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{}: sample {i} is not finite", path.display())));
    }
    let side = sidecar_path(path);
    let meta = match std::fs::read_to_string(&side) {
        Ok(text) => Some(serde_json::from_str::<WaveformMeta>(&text).map_err(|e| Error::Format {
            path: side.clone(),
            offset: 0,
            message: e.to_string(),
        })?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&side, e)),
    };
    let fs = meta.as_ref().map_or(DEFAULT_SAMPLE_RATE_HZ, |m| m.sample_rate_hz);
    if !(fs > 0.0) {
        return Err(Error::data(format!("{}: sample rate must be positive", side.display())));
    }
    Ok((RealSignal::new(samples, fs), meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.f32");
        let sig = RealSignal::new(vec![0.5, -0.25, 1.0], 8000.0);
        let meta = WaveformMeta {
            sample_rate_hz: 8000.0,
            num_samples: 3,
            scheme: Some("2psk".parse().unwrap()),
            seed: Some(7),
            snr_db: None,
        };
        write_waveform(&sig, &meta, &path).unwrap();
        let (back, m) = read_waveform(&path).unwrap();
        assert_eq!(back, sig);
        assert_eq!(m.unwrap(), meta);
        assert!(!std::fs::read_to_string(sidecar_path(&path)).unwrap().contains("snr_db"));

        std::fs::remove_file(sidecar_path(&path)).unwrap();
        assert_eq!(read_waveform(&path).unwrap().0.sample_rate_hz, DEFAULT_SAMPLE_RATE_HZ);
    }

    #[test]
    fn bad_lengths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.f32");
        std::fs::write(&path, [0u8; 6]).unwrap();
        assert!(matches!(read_waveform(&path), Err(Error::Format { offset: 4, .. })));
        assert!(matches!(read_waveform(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
