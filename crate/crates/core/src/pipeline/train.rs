use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    create_dir, load_split, write_json, write_run_manifest, write_timing, RunLayout,
    CHECKPOINT_FILE,
};
use crate::config::PipelineConfig;
use crate::embedding::{
    save_checkpoint, train_model, Checkpoint, ClassRegistry, Dataset, EpochSummary, TrainState,
};
use crate::error::{Error, Result};
use crate::incremental::fit_statistics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub classes: Vec<String>,
    pub n_train: usize,
    pub input_dims: (usize, usize),
    pub embed_dim: usize,
    pub epochs: Vec<EpochSummary>,
    pub thresholds: Vec<f64>,
}

/// Maps labels to indices of `classes`.
pub(crate) fn label_indices(labels: &[String], classes: &ClassRegistry) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            classes
                .index_of(l)
                .ok_or_else(|| Error::UnknownLabel(l.clone()))
        })
        .collect()
}

/// Trains the encoder on the `train` split and fits the open-set
/// statistics. Classes are indexed in order of first appearance in the
/// manifest.
pub fn cmd_train(cfg: &PipelineConfig, out: &Path) -> Result<TrainSummary> {
    let started = Instant::now();
    cfg.validate()?;
    let layout = RunLayout::new(out);
    let split = load_split(&layout.dataset_dir(cfg), "manifest.jsonl", &["train"], cfg)?;
    if split.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let classes = ClassRegistry::from_labels(&split.class_order())?;
    let labels = label_indices(&split.labels, &classes)?;
    let data = Dataset::new(split.inputs, labels)?;

    let mut state = TrainState::new(cfg.encoder_config(), classes.len())?;
    let epochs = train_model(&mut state, &data, &cfg.training, cfg.stage_seed("train"))?;
    let stats = fit_statistics(
        &state,
        data.inputs.view(),
        &data.labels,
        &classes,
        cfg.openset.shrinkage,
    )?;

    let summary = TrainSummary {
        classes: classes.entries().iter().map(|e| e.name.clone()).collect(),
        n_train: data.len(),
        input_dims: state.config.input_dims,
        embed_dim: state.embed_dim(),
        epochs,
        thresholds: stats.iter().map(|s| s.tau).collect(),
    };
    let dir = layout.model_dir();
    create_dir(&dir)?;
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            state,
            classes,
            stats,
        },
    )?;
    let summary_path = dir.join("training.json");
    write_json(&summary_path, &summary)?;
    let config_path = dir.join("config.toml");
    super::write_text(&config_path, &cfg.to_toml_string()?)?;
    write_run_manifest(
        &dir,
        "train",
        cfg.seed,
        &[ckpt_path, summary_path, config_path],
    )?;
    write_timing(&dir, started.elapsed().as_secs_f64())?;
    Ok(summary)
}
