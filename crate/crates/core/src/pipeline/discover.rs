use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{create_dir, require, write_run_manifest, write_timing, RunLayout};
use crate::config::PipelineConfig;
use crate::discovery::ClusterReport;
use crate::error::{Error, Result};
use crate::incremental::BufferSnapshot;

/// Reruns discovery on every buffer snapshot left by `stream`, using the
/// configuration recorded in each snapshot. The reports are identical to the
/// ones written during the session.
pub fn cmd_discover(cfg: &PipelineConfig, out: &Path) -> Result<Vec<ClusterReport>> {
    let started = Instant::now();
    let layout = RunLayout::new(out);
    let source = layout.command_dir("stream");
    let first = require(&source.join("buffer_0.json"))?;
    let dir = layout.command_dir("discover");
    create_dir(&dir)?;
    let mut reports = Vec::new();
    let mut files: Vec<PathBuf> = Vec::new();
    let mut path = first;
    for r in 1.. {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let snapshot: BufferSnapshot = serde_json::from_str(&text)?;
        let report = snapshot.rerun()?;
        let report_path = dir.join(format!("cluster_report_{}.json", snapshot.round));
        report.write_json(&report_path)?;
        let scores_path = dir.join(format!("cluster_scores_{}.csv", snapshot.round));
        report.write_scores_csv(&scores_path)?;
        files.extend([report_path, scores_path]);
        reports.push(report);
        path = source.join(format!("buffer_{r}.json"));
        if !path.exists() {
            break;
        }
    }
    write_run_manifest(&dir, "discover", cfg.seed, &files)?;
    write_timing(&dir, started.elapsed().as_secs_f64())?;
    Ok(reports)
}
