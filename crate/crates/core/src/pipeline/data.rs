use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::signal::{ingest_iq, read_manifest, stft_spectrogram, ManifestEntry};

/// Flattened spectrograms of one dataset split, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSplit {
    pub inputs: Array2<f64>,
    pub labels: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl LoadedSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct labels in order of first appearance.
    pub fn class_order(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.labels {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }
}

/// Reads every manifest row whose split is in `splits` and converts it to
/// a spectrogram with the configured STFT settings.
pub fn load_split(
    dataset_dir: &Path,
    manifest: &str,
    splits: &[&str],
    cfg: &PipelineConfig,
) -> Result<LoadedSplit> {
    let entries: Vec<ManifestEntry> = read_manifest(&super::require(&dataset_dir.join(manifest))?)?
        .into_iter()
        .filter(|e| e.split.as_deref().is_some_and(|s| splits.contains(&s)))
        .collect();
    let sig = &cfg.signal;
    let rows: Vec<(Vec<f64>, String)> = entries
        .par_iter()
        .map(|entry| {
            let label = entry.label.clone().ok_or_else(|| {
                Error::Format(format!("manifest row {} has no label", entry.path))
            })?;
            let record = ingest_iq(&entry.resolve(dataset_dir), entry)?;
            let spec = stft_spectrogram(&record, sig.fft_size, sig.frame_hop, &sig.window)?;
            Ok((spec.flatten(), label))
        })
        .collect::<Result<_>>()?;
    let width = rows.first().map_or(0, |r| r.0.len());
    if let Some(bad) = rows.iter().find(|r| r.0.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: bad.0.len(),
        });
    }
    let inputs = Array2::from_shape_fn((rows.len(), width), |(i, j)| rows[i].0[j]);
    Ok(LoadedSplit {
        inputs,
        labels: rows.into_iter().map(|r| r.1).collect(),
        entries,
    })
}
