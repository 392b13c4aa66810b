use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create_dir, write_json, write_run_manifest, write_timing, RunLayout};
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::signal::{write_iq, write_manifest, BurstGenerator, IqRecord, ManifestEntry};

#[derive(Debug, Clone)]
pub struct SynthRecord {
    pub entry: ManifestEntry,
    pub record: IqRecord,
    pub known: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub classes: usize,
    pub records: usize,
    pub known_records: usize,
    pub unknown_records: usize,
}

/// Split of the `i`-th of `n` records of a class.
fn split_for(i: usize, n: usize, known: bool, cfg: &PipelineConfig) -> &'static str {
    let n_train = if known {
        (cfg.signal.train_fraction * n as f64).round() as usize
    } else {
        0
    };
    let n_test = (cfg.signal.test_fraction * n as f64).round() as usize;
    if i < n_train {
        "train"
    } else if i < n_train + n_test {
        "test"
    } else {
        "stream"
    }
}

/// All synthetic records, in profile order, then SNR order, then index.
/// Record `i` of class `c` at SNR index `s` uses seed
/// `derive_seed(root, "record/c/s/i")`.
pub fn synthesize(cfg: &PipelineConfig) -> Result<Vec<SynthRecord>> {
    cfg.signal.validate()?;
    let sig = &cfg.signal;
    let generator = BurstGenerator::new(sig.sample_rate, sig.carrier_freq, sig.fft_size);
    let n = sig.records_per_class;
    let mut jobs = Vec::new();
    for (profile, known) in sig.profiles() {
        for (s, &snr) in sig.snr_db.iter().enumerate() {
            for i in 0..n {
                jobs.push((profile, known, s, snr, i));
            }
        }
    }
    jobs.par_iter()
        .map(|&(profile, known, s, snr, i)| {
            let seed = cfg.stage_seed(&format!("record/{}/{s}/{i}", profile.class_id));
            let record = generator.generate(profile, sig.duration, snr, seed)?;
            let entry = ManifestEntry {
                path: format!(
                    "data/{}/{}_{s}_{i:05}.iq",
                    profile.class_id, profile.class_id
                ),
                sample_rate: sig.sample_rate,
                carrier_freq: sig.carrier_freq,
                label: Some(profile.class_id.clone()),
                source_id: record.source_id.clone(),
                snr_db: Some(snr),
                split: Some(split_for(i, n, known, cfg).to_string()),
            };
            Ok(SynthRecord {
                entry,
                record,
                known,
            })
        })
        .collect()
}

/// Writes the synthetic dataset: one `.iq` file per record, the full
/// manifest and the known/unknown sub-manifests.
pub fn cmd_generate(cfg: &PipelineConfig, out: &Path) -> Result<GenerateSummary> {
    let started = Instant::now();
    cfg.validate_settings()?;
    let layout = RunLayout::new(out);
    let dir = layout.dataset_dir(cfg);
    let records = synthesize(cfg)?;
    for (profile, _) in cfg.signal.profiles() {
        create_dir(&dir.join("data").join(&profile.class_id))?;
    }
    records
        .par_iter()
        .map(|r| write_iq(&r.entry.resolve(&dir), &r.record))
        .collect::<Result<Vec<()>>>()?;
    let all: Vec<ManifestEntry> = records.iter().map(|r| r.entry.clone()).collect();
    let known: Vec<ManifestEntry> = records
        .iter()
        .filter(|r| r.known)
        .map(|r| r.entry.clone())
        .collect();
    let unknown: Vec<ManifestEntry> = records
        .iter()
        .filter(|r| !r.known)
        .map(|r| r.entry.clone())
        .collect();
    let mut files: Vec<PathBuf> = Vec::new();
    for (name, rows) in [
        ("manifest.jsonl", &all),
        ("known.jsonl", &known),
        ("unknown.jsonl", &unknown),
    ] {
        let p = dir.join(name);
        write_manifest(&p, rows)?;
        files.push(p);
    }
    let summary = GenerateSummary {
        classes: cfg.signal.known.len() + cfg.signal.unknown.len(),
        records: all.len(),
        known_records: known.len(),
        unknown_records: unknown.len(),
    };
    let config_path = dir.join("config.toml");
    super::write_text(&config_path, &cfg.to_toml_string()?)?;
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    files.extend([config_path, summary_path]);
    files.extend(all.iter().map(|e| e.resolve(&dir)));
    write_run_manifest(&dir, "generate", cfg.seed, &files)?;
    write_timing(&dir, started.elapsed().as_secs_f64())?;
    Ok(summary)
}
