use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::train::label_indices;
use super::{
    create_dir, load_model, load_split, write_json, write_run_manifest, write_timing, RunLayout,
    CHECKPOINT_FILE,
};
use crate::config::PipelineConfig;
use crate::embedding::{save_checkpoint, Dataset};
use crate::error::Result;
use crate::evaluation::{ClusteringSummary, EvalReport};
use crate::incremental::{process_stream, SessionState, StreamSample, UpdateOutcome};
use crate::seed::rng_from_seed;

pub const NO_DISCOVERY: &str = "no discovery triggered";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub stream_samples: usize,
    pub rejected: usize,
    pub rounds: u32,
    pub classes: Vec<String>,
    pub updates: Vec<UpdateOutcome>,
    pub memory_total: usize,
    pub memory_max_per_class: usize,
    /// Gate-based scores on the test split after the session.
    pub open_set: EvalReport,
    /// Head argmax scores on the test split after the session.
    pub closed_set: EvalReport,
    pub notes: Vec<String>,
}

/// Runs the streaming session over the shuffled `stream` split, then scores
/// the updated model on the `test` split.
pub fn cmd_stream(cfg: &PipelineConfig, out: &Path) -> Result<StreamSummary> {
    let started = Instant::now();
    cfg.validate()?;
    let layout = RunLayout::new(out);
    let dataset = layout.dataset_dir(cfg);
    let ckpt = load_model(&layout.checkpoint(cfg))?;

    let train = load_split(&dataset, "manifest.jsonl", &["train"], cfg)?;
    let train_labels = label_indices(&train.labels, &ckpt.classes)?;
    let train_data = Dataset::new(train.inputs, train_labels)?;
    let memory = SessionState::initial_memory(
        &ckpt.state,
        &train_data,
        &train.labels,
        ckpt.classes.len(),
        &cfg.incremental,
    )?;

    let dir = layout.command_dir("stream");
    create_dir(&dir)?;
    let mut state = SessionState::new(
        ckpt,
        memory,
        cfg.incremental.clone(),
        cfg.discovery.clone(),
        cfg.training.loss,
        cfg.openset.shrinkage,
        cfg.stage_seed("stream"),
    )?;
    state.checkpoint_dir = Some(dir.clone());

    let split = load_split(&dataset, "manifest.jsonl", &["stream"], cfg)?;
    let mut order: Vec<usize> = (0..split.len()).collect();
    order.shuffle(&mut rng_from_seed(cfg.stage_seed("stream/order")));
    let stream: Vec<StreamSample> = order
        .iter()
        .map(|&i| StreamSample {
            input: split.inputs.row(i).to_vec(),
            truth: Some(split.labels[i].clone()),
        })
        .collect();
    let decisions = process_stream(&mut state, &stream)?;

    let mut notes = Vec::new();
    if state.round == 0 {
        notes.push(NO_DISCOVERY.to_string());
        state.log.note(NO_DISCOVERY);
    }
    let mut files: Vec<PathBuf> = Vec::new();
    for (report, snapshot) in state.reports.iter().zip(&state.snapshots) {
        let r = snapshot.round;
        let report_path = dir.join(format!("cluster_report_{r}.json"));
        report.write_json(&report_path)?;
        let scores_path = dir.join(format!("cluster_scores_{r}.csv"));
        report.write_scores_csv(&scores_path)?;
        let buffer_path = dir.join(format!("buffer_{r}.json"));
        write_json(&buffer_path, snapshot)?;
        files.extend([report_path, scores_path, buffer_path]);
    }
    for outcome in &state.updates {
        files.push(dir.join(format!("checkpoint_round_{}.owck", outcome.round)));
    }

    let final_ckpt = state.checkpoint();
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt_path, &final_ckpt)?;
    let log_path = dir.join("session_log.jsonl");
    state.log.write_jsonl(&log_path)?;

    let test = load_split(&dataset, "manifest.jsonl", &["test"], cfg)?;
    let (mut open_set, _, _) = super::evaluate_split(&final_ckpt, &test, true)?;
    let (closed_set, _, _) = super::evaluate_split(&final_ckpt, &test, false)?;
    if let (Some(report), Some(snapshot)) = (state.reports.last(), state.snapshots.last()) {
        open_set.clustering = Some(ClusteringSummary::from_report(
            report,
            snapshot.truth.as_deref(),
        ));
    }

    let summary = StreamSummary {
        stream_samples: stream.len(),
        rejected: decisions.iter().filter(|d| !d.decision.accepted).count(),
        rounds: state.round,
        classes: state
            .classes
            .entries()
            .iter()
            .map(|e| e.name.clone())
            .collect(),
        updates: state.updates.clone(),
        memory_total: state.memory.total(),
        memory_max_per_class: state.memory.max_per_class(),
        open_set,
        closed_set,
        notes,
    };
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    files.extend([ckpt_path, log_path, summary_path]);
    write_run_manifest(&dir, "stream", cfg.seed, &files)?;
    write_timing(&dir, started.elapsed().as_secs_f64())?;
    Ok(summary)
}
