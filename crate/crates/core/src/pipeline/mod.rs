//! The file-driven commands behind the CLI.
//!
//! Every command works inside a run directory (`--out`):
//!
//! ```text
//! <out>/dataset/   manifest.jsonl, known.jsonl, unknown.jsonl, data/<class>/*.iq
//! <out>/model/     checkpoint.owck, training.json
//! <out>/eval/      report.json, confusion.csv, projection.csv
//! <out>/stream/    session_log.jsonl, checkpoint.owck, cluster_report_<r>.json,
//!                  cluster_scores_<r>.csv, buffer_<r>.json, summary.json
//! <out>/discover/  cluster_report_<r>.json, cluster_scores_<r>.csv
//! ```
//!
//! Each command directory also receives `run_manifest.json` listing the files
//! it produced, and `timing.json` with wall-clock durations (kept out of the
//! reports so reruns are byte-identical).

mod data;
mod discover;
mod eval;
mod generate;
mod stream;
mod train;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::embedding::{load_checkpoint, Checkpoint};
use crate::error::{Error, Result};

pub use data::{load_split, LoadedSplit};
pub use discover::cmd_discover;
pub use eval::{cmd_eval, evaluate_split};
pub use generate::{cmd_generate, synthesize, GenerateSummary, SynthRecord};
pub use stream::{cmd_stream, StreamSummary};
pub use train::{cmd_train, TrainSummary};

pub const CHECKPOINT_FILE: &str = "checkpoint.owck";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducedFile {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub files: Vec<ProducedFile>,
}

/// Where each command reads and writes under a run directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub out: PathBuf,
}

impl RunLayout {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into() }
    }

    pub fn dataset_dir(&self, cfg: &PipelineConfig) -> PathBuf {
        cfg.paths
            .dataset
            .clone()
            .unwrap_or_else(|| self.out.join("dataset"))
    }

    pub fn model_dir(&self) -> PathBuf {
        self.out.join("model")
    }

    pub fn checkpoint(&self, cfg: &PipelineConfig) -> PathBuf {
        cfg.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.model_dir().join(CHECKPOINT_FILE))
    }

    pub fn command_dir(&self, command: &str) -> PathBuf {
        self.out.join(command)
    }
}

/// `path` itself, or `MissingArtifact` when it does not exist.
pub(crate) fn require(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

pub(crate) fn load_model(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(&require(path)?)
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Records `files` (relative to `dir`) in `dir/run_manifest.json`.
pub(crate) fn write_run_manifest(
    dir: &Path,
    command: &str,
    seed: u64,
    files: &[PathBuf],
) -> Result<()> {
    let mut produced = Vec::with_capacity(files.len());
    for f in files {
        let meta = std::fs::metadata(f).map_err(|e| Error::io(f, e))?;
        let rel = f.strip_prefix(dir).unwrap_or(f);
        produced.push(ProducedFile {
            path: rel.to_string_lossy().replace('\\', "/"),
            bytes: meta.len(),
        });
    }
    write_json(
        &dir.join("run_manifest.json"),
        &RunManifest {
            command: command.to_string(),
            seed,
            files: produced,
        },
    )
}

pub(crate) fn write_timing(dir: &Path, seconds: f64) -> Result<()> {
    write_json(
        &dir.join("timing.json"),
        &serde_json::json!({ "wall_time": seconds }),
    )
}
