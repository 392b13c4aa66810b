use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A complex baseband capture.
///
/// Samples are the down-converted representation of `x(t)` around
/// `carrier_freq`; the carrier itself is carried as metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IqRecord {
    pub samples: Vec<Complex32>,
    pub sample_rate: f64,
    pub carrier_freq: f64,
    pub label: Option<String>,
    pub source_id: String,
}

impl IqRecord {
    pub fn new(
        samples: Vec<Complex32>,
        sample_rate: f64,
        carrier_freq: f64,
        label: Option<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("I/Q record has no samples"));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample_rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::NonFinite(format!("I/Q sample {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            carrier_freq,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One line of a dataset manifest (JSON Lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sample_rate: f64,
    pub carrier_freq: f64,
    pub label: Option<String>,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

impl ManifestEntry {
    /// Resolves `path` against the directory holding the manifest.
    pub fn resolve(&self, manifest_dir: &Path) -> PathBuf {
        let p = Path::new(&self.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_dir.join(p)
        }
    }
}

/// Reads an interleaved little-endian float32 I/Q file.
pub fn ingest_iq(path: &Path, entry: &ManifestEntry) -> Result<IqRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyInput("I/Q file is empty"));
    }
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "{}: {} bytes is not a whole number of complex float32 samples",
            path.display(),
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex32::new(re, im)
        })
        .collect();
    IqRecord::new(
        samples,
        entry.sample_rate,
        entry.carrier_freq,
        entry.label.clone(),
        entry.source_id.clone(),
    )
}

pub fn write_iq(path: &Path, record: &IqRecord) -> Result<()> {
    let mut bytes = Vec::with_capacity(record.samples.len() * 8);
    for s in &record.samples {
        bytes.extend_from_slice(&s.re.to_le_bytes());
        bytes.extend_from_slice(&s.im.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
