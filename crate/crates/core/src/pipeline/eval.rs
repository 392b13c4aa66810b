use std::path::Path;
use std::time::Instant;

use ndarray::Array2;

use super::{
    create_dir, load_model, load_split, write_run_manifest, write_timing, LoadedSplit, RunLayout,
};
use crate::config::PipelineConfig;
use crate::embedding::Checkpoint;
use crate::error::{Error, Result};
use crate::evaluation::{project_2d, score_session, EvalReport, UNKNOWN};
use crate::openset::decide;

/// Scores a labeled split. With `open_set` each sample goes through the
/// Mahalanobis gate; otherwise the head's argmax is taken as is.
/// Returns the report, the embeddings and the per-sample predictions.
pub fn evaluate_split(
    ckpt: &Checkpoint,
    split: &LoadedSplit,
    open_set: bool,
) -> Result<(EvalReport, Array2<f64>, Vec<Option<usize>>)> {
    let z = ckpt.state.embed_batch(split.inputs.view())?;
    let predictions: Vec<Option<usize>> = if open_set {
        z.rows()
            .into_iter()
            .map(|row| Ok(decide(row, &ckpt.stats)?.predicted.class()))
            .collect::<Result<_>>()?
    } else {
        ckpt.state.predict(z.view()).into_iter().map(Some).collect()
    };
    let report = score_session(&predictions, &split.labels, &ckpt.classes)?;
    Ok((report, z, predictions))
}

/// Open-set evaluation of a checkpoint on one split (default `test`).
pub fn cmd_eval(cfg: &PipelineConfig, out: &Path, split_name: &str) -> Result<EvalReport> {
    let started = Instant::now();
    cfg.validate()?;
    let layout = RunLayout::new(out);
    let ckpt = load_model(&layout.checkpoint(cfg))?;
    let split = load_split(
        &layout.dataset_dir(cfg),
        "manifest.jsonl",
        &[split_name],
        cfg,
    )?;
    if split.is_empty() {
        return Err(Error::EmptyInput("evaluation split"));
    }
    let (report, z, predictions) = evaluate_split(&ckpt, &split, true)?;

    let dir = layout.command_dir("eval");
    create_dir(&dir)?;
    let report_path = dir.join("report.json");
    report.write_json(&report_path)?;
    let confusion_path = dir.join("confusion.csv");
    report.confusion.write_csv(&confusion_path)?;
    let mut files = vec![report_path, confusion_path];
    if z.nrows() >= 3 {
        let names: Vec<String> = predictions
            .iter()
            .map(|p| p.map_or(UNKNOWN.to_string(), |c| ckpt.classes.name(c).to_string()))
            .collect();
        let projection_path = dir.join("projection.csv");
        project_2d(z.view())?.write_csv(&projection_path, &split.labels, &names)?;
        files.push(projection_path);
    }
    write_run_manifest(&dir, "eval", cfg.seed, &files)?;
    write_timing(&dir, started.elapsed().as_secs_f64())?;
    Ok(report)
}
