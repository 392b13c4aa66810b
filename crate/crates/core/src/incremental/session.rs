use std::path::PathBuf;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::buffer::{BufferedSample, UnknownBuffer};
use super::config::{IncrementalConfig, NMin};
use super::log::{SessionEvent, SessionLog};
use super::memory::{select_exemplars, Exemplar, ReplayMemory};
use crate::discovery::{discover, ClusterReport, DiscoveryConfig};
use crate::embedding::{
    balanced_batches, class_means, save_checkpoint, train_batches, Checkpoint, ClassEntry,
    ClassOrigin, ClassRegistry, Dataset, LossConfig, TrainState,
};
use crate::error::{Error, Result};
use crate::openset::{decide, fit_class_stats, ClassSamples, ClassStatistics, OpenSetDecision};
use crate::seed::derive_seed;
use crate::signal::Spectrogram;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample {
    pub input: Vec<f64>,
    pub truth: Option<String>,
}

impl StreamSample {
    pub fn from_spectrogram(spec: &Spectrogram) -> Self {
        Self {
            input: spec.flatten(),
            truth: spec.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamDecision {
    pub arrival: u64,
    pub decision: OpenSetDecision,
}

/// Exact discovery input of one round, enough to rerun it offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferSnapshot {
    pub round: u32,
    pub config: DiscoveryConfig,
    pub embeddings: Vec<Vec<f64>>,
    pub truth: Option<Vec<String>>,
}

impl BufferSnapshot {
    pub fn matrix(&self) -> Array2<f64> {
        let d = self.embeddings.first().map_or(0, Vec::len);
        Array2::from_shape_fn((self.embeddings.len(), d), |(i, j)| self.embeddings[i][j])
    }

    pub fn rerun(&self) -> Result<ClusterReport> {
        discover(self.matrix().view(), self.truth.as_deref(), &self.config)
    }
}

/// Members of one accepted cluster, ready to become a class.
#[derive(Debug, Clone, PartialEq)]
pub struct NewClassSamples {
    pub entry: ClassEntry,
    pub samples: Vec<BufferedSample>,
}

/// Mixed training set for one incremental update. Labels below
/// `n_old_classes` are replayed exemplars; the rest index `new_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSet {
    pub data: Dataset,
    pub arrivals: Vec<u64>,
    pub truth: Vec<Option<String>>,
    pub n_old_classes: usize,
    pub new_classes: Vec<ClassEntry>,
    pub old_samples: usize,
    pub new_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub round: u32,
    pub new_classes: Vec<String>,
    pub old_samples: usize,
    pub new_samples: usize,
    pub epochs: usize,
    pub steps: u64,
    pub epoch_losses: Vec<f64>,
    /// Old classes whose statistics could not be refit (no exemplars).
    pub stale_classes: Vec<String>,
}

pub struct SessionState {
    pub model: TrainState,
    pub stats: Vec<ClassStatistics>,
    pub classes: ClassRegistry,
    pub memory: ReplayMemory,
    pub buffer: UnknownBuffer,
    pub log: SessionLog,
    pub config: IncrementalConfig,
    pub discovery: DiscoveryConfig,
    pub loss: LossConfig,
    pub shrinkage: f64,
    pub seed: u64,
    /// Discovery rounds run so far; new class ids carry the round number.
    pub round: u32,
    pub next_arrival: u64,
    pub reports: Vec<ClusterReport>,
    pub snapshots: Vec<BufferSnapshot>,
    pub updates: Vec<UpdateOutcome>,
    /// When set, a checkpoint `checkpoint_round_<r>.owck` is written here
    /// after every update.
    pub checkpoint_dir: Option<PathBuf>,
}

impl SessionState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        checkpoint: Checkpoint,
        memory: ReplayMemory,
        config: IncrementalConfig,
        discovery: DiscoveryConfig,
        loss: LossConfig,
        shrinkage: f64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        discovery.validate()?;
        loss.validate()?;
        let Checkpoint {
            state,
            classes,
            stats,
        } = checkpoint;
        if stats.len() != classes.len() || state.n_classes != classes.len() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint has {} classes, {} statistics and a {}-way head",
                classes.len(),
                stats.len(),
                state.n_classes
            )));
        }
        memory.check()?;
        Ok(Self {
            model: state,
            stats,
            classes,
            memory,
            buffer: UnknownBuffer::new(config.n_min),
            log: SessionLog::default(),
            config,
            discovery,
            loss,
            shrinkage,
            seed,
            round: 0,
            next_arrival: 0,
            reports: Vec::new(),
            snapshots: Vec::new(),
            updates: Vec::new(),
            checkpoint_dir: None,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            state: self.model.clone(),
            classes: self.classes.clone(),
            stats: self.stats.clone(),
        }
    }

    /// Builds the initial replay memory from the base training set.
    pub fn initial_memory(
        model: &TrainState,
        data: &Dataset,
        truth: &[String],
        n_classes: usize,
        config: &IncrementalConfig,
    ) -> Result<ReplayMemory> {
        let cap = config.per_class_cap(n_classes);
        let mut memory = ReplayMemory::new(config.old_max, config.m_max);
        let z = model.embed_batch(data.inputs.view())?;
        for c in 0..n_classes {
            let idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == c).collect();
            let arrivals: Vec<u64> = idx.iter().map(|&i| i as u64).collect();
            let picked = select_exemplars(z.select(Axis(0), &idx).view(), &arrivals, cap);
            let exemplars = picked
                .into_iter()
                .map(|p| {
                    let i = idx[p];
                    Exemplar {
                        input: data.inputs.row(i).to_vec(),
                        embedding: z.row(i).to_vec(),
                        arrival: i as u64,
                        truth: truth.get(i).cloned(),
                    }
                })
                .collect();
            memory.set_class(c, exemplars);
        }
        memory.check()?;
        Ok(memory)
    }
}

/// Embeds `inputs` and fits statistics for every registered class.
pub fn fit_statistics(
    model: &TrainState,
    inputs: ArrayView2<'_, f64>,
    labels: &[usize],
    classes: &ClassRegistry,
    shrinkage: f64,
) -> Result<Vec<ClassStatistics>> {
    let z = model.embed_batch(inputs)?;
    let groups: Vec<Array2<f64>> = (0..classes.len())
        .map(|c| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            z.select(Axis(0), &idx)
        })
        .collect();
    let samples: Vec<ClassSamples<'_>> = groups
        .iter()
        .enumerate()
        .map(|(c, g)| ClassSamples {
            class_index: c,
            class_id: classes.name(c).to_string(),
            embeddings: g.view(),
        })
        .collect();
    fit_class_stats(&samples, shrinkage)
}

/// Gates every sample, buffering rejections and running discovery plus an
/// update whenever the buffer reaches `n_min`. At the end of the stream a
/// buffer holding at least `2·s_min` (but fewer than `n_min`) samples is
/// flushed through discovery as well.
pub fn process_stream(
    state: &mut SessionState,
    stream: &[StreamSample],
) -> Result<Vec<StreamDecision>> {
    let mut decisions = Vec::with_capacity(stream.len());
    for sample in stream {
        let arrival = state.next_arrival;
        state.next_arrival += 1;
        let (z, decision) = gate_one(state, sample).map_err(|e| e.at_stream(arrival))?;
        let nearest = decision.nearest;
        let stats = &state.stats[nearest];
        state.log.push(SessionEvent::Decision {
            arrival,
            predicted: decision
                .predicted
                .class()
                .map(|c| state.classes.name(c).to_string()),
            nearest: stats.class_id.clone(),
            distance: decision.distances[nearest],
            tau: stats.tau,
            truth: sample.truth.clone(),
        });
        if !decision.accepted {
            state.buffer.push(BufferedSample {
                input: sample.input.clone(),
                embedding: z.to_vec(),
                arrival,
                truth: sample.truth.clone(),
            });
            if state.buffer.is_full() {
                run_discovery(state, "threshold").map_err(|e| e.at_stream(arrival))?;
            }
        }
        decisions.push(StreamDecision { arrival, decision });
    }
    let pending = state.buffer.len();
    if state.config.n_min != NMin::Never && pending > 0 && pending >= 2 * state.discovery.s_min {
        run_discovery(state, "flush")?;
    }
    Ok(decisions)
}

fn embed_one(model: &TrainState, input: &[f64]) -> Result<Array1<f64>> {
    let row = ArrayView2::from_shape((1, input.len()), input)
        .map_err(|e| Error::InvalidArgument(format!("stream sample shape: {e}")))?;
    Ok(model.embed_batch(row)?.row(0).to_owned())
}

fn gate_one(state: &SessionState, sample: &StreamSample) -> Result<(Array1<f64>, OpenSetDecision)> {
    let z = embed_one(&state.model, &sample.input)?;
    let decision = decide(z.view(), &state.stats)?;
    Ok((z, decision))
}

fn run_discovery(state: &mut SessionState, reason: &str) -> Result<()> {
    let round = state.round;
    state.round += 1;
    state.log.push(SessionEvent::DiscoveryTrigger {
        round,
        buffer_size: state.buffer.len(),
        reason: reason.to_string(),
    });
    let config = DiscoveryConfig {
        seed: derive_seed(state.seed, &format!("discovery/{round}")),
        ..state.discovery.clone()
    };
    let snapshot = BufferSnapshot {
        round,
        config,
        embeddings: state
            .buffer
            .entries()
            .iter()
            .map(|e| e.embedding.clone())
            .collect(),
        truth: state.buffer.truth(),
    };
    let report = snapshot.rerun()?;
    let samples = state.buffer.drain();
    state.log.push(SessionEvent::DiscoveryResult {
        round,
        k_star: report.k_star,
        chosen_model: report.chosen_model.clone(),
        accepted: report.accepted_clusters.len(),
        rejected: report.clusters.len() - report.accepted_clusters.len(),
    });
    let new_classes: Vec<NewClassSamples> = report
        .accepted_clusters
        .iter()
        .map(|c| NewClassSamples {
            entry: ClassEntry {
                name: format!("novel-{round}-{}", c.cluster),
                origin: ClassOrigin::Discovered {
                    session: round,
                    cluster: c.cluster,
                    majority_truth: c.majority_truth.clone(),
                },
            },
            samples: c.members.iter().map(|&i| samples[i].clone()).collect(),
        })
        .collect();
    state.snapshots.push(snapshot);
    state.reports.push(report);
    if new_classes.is_empty() {
        state.log.note(format!(
            "round {round}: no cluster accepted, model unchanged"
        ));
        return Ok(());
    }
    let set = assemble_update_set(
        &new_classes,
        &state.memory,
        state.classes.len(),
        &state.config,
    )?;
    let outcome = incremental_update(state, &set, round)?;
    state.updates.push(outcome);
    if let Some(dir) = &state.checkpoint_dir {
        save_checkpoint(
            &dir.join(format!("checkpoint_round_{round}.owck")),
            &state.checkpoint(),
        )?;
    }
    Ok(())
}

/// Mixes up to `old_max` replayed exemplars per old class with up to
/// `new_max` samples per new cluster, the latter taken nearest the cluster
/// centroid in embedding space.
pub fn assemble_update_set(
    new_clusters: &[NewClassSamples],
    memory: &ReplayMemory,
    n_old_classes: usize,
    config: &IncrementalConfig,
) -> Result<UpdateSet> {
    if new_clusters.is_empty() {
        return Err(Error::EmptyInput("no accepted clusters to learn"));
    }
    let mut rows: Vec<&[f64]> = Vec::new();
    let mut labels = Vec::new();
    let mut arrivals = Vec::new();
    let mut truth = Vec::new();
    for c in 0..n_old_classes {
        for ex in memory.class(c).iter().take(config.old_max) {
            rows.push(&ex.input);
            labels.push(c);
            arrivals.push(ex.arrival);
            truth.push(ex.truth.clone());
        }
    }
    let old_samples = rows.len();
    for (j, cluster) in new_clusters.iter().enumerate() {
        let d = cluster.samples.first().map_or(0, |s| s.embedding.len());
        let z = Array2::from_shape_fn((cluster.samples.len(), d), |(i, k)| {
            cluster.samples[i].embedding[k]
        });
        let arr: Vec<u64> = cluster.samples.iter().map(|s| s.arrival).collect();
        for i in select_exemplars(z.view(), &arr, config.new_max) {
            let s = &cluster.samples[i];
            rows.push(&s.input);
            labels.push(n_old_classes + j);
            arrivals.push(s.arrival);
            truth.push(s.truth.clone());
        }
    }
    let width = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: bad.len(),
        });
    }
    let inputs = Array2::from_shape_fn((rows.len(), width), |(i, k)| rows[i][k]);
    Ok(UpdateSet {
        new_samples: rows.len() - old_samples,
        data: Dataset::new(inputs, labels)?,
        arrivals,
        truth,
        n_old_classes,
        new_classes: new_clusters.iter().map(|c| c.entry.clone()).collect(),
        old_samples,
    })
}

/// Grows the head, fine-tunes on the mixed set with class-balanced batches,
/// refits statistics and refreshes the replay memory.
///
/// The planned step count (epochs × batches per epoch) is checked against
/// `max_update_steps` before any state changes.
pub fn incremental_update(
    state: &mut SessionState,
    set: &UpdateSet,
    round: u32,
) -> Result<UpdateOutcome> {
    let n_old = state.classes.len();
    if set.n_old_classes != n_old {
        return Err(Error::InvalidArgument(format!(
            "update set built for {} classes, session has {n_old}",
            set.n_old_classes
        )));
    }
    if set.new_classes.is_empty() {
        state.log.note(format!(
            "round {round}: update without new classes, model unchanged"
        ));
        return Ok(UpdateOutcome {
            round,
            new_classes: Vec::new(),
            old_samples: set.old_samples,
            new_samples: 0,
            epochs: 0,
            steps: 0,
            epoch_losses: Vec::new(),
            stale_classes: Vec::new(),
        });
    }
    let cfg = state.config.clone();
    let epoch_seed = |e: usize| derive_seed(state.seed, &format!("update/{round}/epoch={e}"));
    let per_epoch = balanced_batches(&set.data.labels, cfg.batch_size, epoch_seed(0)).len() as u64;
    let planned = per_epoch * cfg.epochs as u64;
    if planned > cfg.max_update_steps {
        return Err(Error::BudgetExceeded {
            needed: planned,
            cap: cfg.max_update_steps,
        });
    }

    let n_total = n_old + set.new_classes.len();
    let z = state.model.embed_batch(set.data.inputs.view())?;
    let fallback = Array2::zeros((n_total, state.model.embed_dim()));
    let means = class_means(z.view(), &set.data.labels, fallback.view());
    state.model.grow_head(
        means.slice(ndarray::s![n_old.., ..]),
        derive_seed(state.seed, &format!("head/{round}")),
    )?;
    for entry in &set.new_classes {
        state.classes.push(entry.clone())?;
    }

    let start = state.model.step_count;
    let mut losses = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for e in 0..cfg.epochs {
        let batches = balanced_batches(&set.data.labels, cfg.batch_size, epoch_seed(e));
        let summary = train_batches(
            &mut state.model,
            &set.data,
            &batches,
            &state.loss,
            cfg.learning_rate,
        )?;
        losses.push(summary.loss.total);
        if summary.loss.total < best - cfg.min_delta {
            best = summary.loss.total;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let steps = state.model.step_count - start;
    if steps > cfg.max_update_steps {
        return Err(Error::BudgetExceeded {
            needed: steps,
            cap: cfg.max_update_steps,
        });
    }

    // Refit statistics from re-embedded exemplars and new samples.
    let mut stale = Vec::new();
    let mut stats = Vec::with_capacity(n_total);
    for c in 0..n_total {
        let inputs = class_inputs(state, set, c, n_old);
        if c < n_old && inputs.nrows() < 2 {
            stale.push(state.classes.name(c).to_string());
            stats.push(state.stats[c].clone());
            continue;
        }
        let zc = state.model.embed_batch(inputs.view())?;
        let fitted = fit_class_stats(
            &[ClassSamples {
                class_index: c,
                class_id: state.classes.name(c).to_string(),
                embeddings: zc.view(),
            }],
            state.shrinkage,
        )?;
        stats.extend(fitted);
    }
    state.stats = stats;
    if !stale.is_empty() {
        state.log.note(format!(
            "round {round}: {} old classes have no exemplars, statistics kept from before the update",
            stale.len()
        ));
    }

    // Refresh the memory over every class with the updated encoder.
    let cap = cfg.per_class_cap(n_total);
    let mut memory = ReplayMemory::new(cfg.old_max, cfg.m_max);
    for c in 0..n_total {
        let pool: Vec<Exemplar> = if c < n_old {
            state.memory.class(c).to_vec()
        } else {
            (0..set.data.len())
                .filter(|&i| set.data.labels[i] == c)
                .map(|i| Exemplar {
                    input: set.data.inputs.row(i).to_vec(),
                    embedding: Vec::new(),
                    arrival: set.arrivals[i],
                    truth: set.truth[i].clone(),
                })
                .collect()
        };
        if pool.is_empty() || cap == 0 {
            memory.set_class(c, Vec::new());
            continue;
        }
        let width = pool[0].input.len();
        let inputs = Array2::from_shape_fn((pool.len(), width), |(i, k)| pool[i].input[k]);
        let zc = state.model.embed_batch(inputs.view())?;
        let arrivals: Vec<u64> = pool.iter().map(|e| e.arrival).collect();
        let kept = select_exemplars(zc.view(), &arrivals, cap)
            .into_iter()
            .map(|i| Exemplar {
                embedding: zc.row(i).to_vec(),
                ..pool[i].clone()
            })
            .collect();
        memory.set_class(c, kept);
    }
    memory.check()?;
    state.memory = memory;

    let outcome = UpdateOutcome {
        round,
        new_classes: set.new_classes.iter().map(|c| c.name.clone()).collect(),
        old_samples: set.old_samples,
        new_samples: set.new_samples,
        epochs: losses.len(),
        steps,
        epoch_losses: losses,
        stale_classes: stale,
    };
    state.log.push(SessionEvent::UpdateSummary {
        round,
        new_classes: outcome.new_classes.clone(),
        old_samples: outcome.old_samples,
        new_samples: outcome.new_samples,
        epochs: outcome.epochs,
        steps,
        final_loss: outcome.epoch_losses.last().copied().unwrap_or(0.0),
        memory_total: state.memory.total(),
        memory_max_per_class: state.memory.max_per_class(),
    });
    Ok(outcome)
}

/// Inputs that define class `c` after an update: stored exemplars for old
/// classes, update-set samples for new ones.
fn class_inputs(state: &SessionState, set: &UpdateSet, c: usize, n_old: usize) -> Array2<f64> {
    if c < n_old {
        let ex = state.memory.class(c);
        let width = set.data.inputs.ncols();
        Array2::from_shape_fn((ex.len(), width), |(i, k)| ex[i].input[k])
    } else {
        let idx: Vec<usize> = (0..set.data.len())
            .filter(|&i| set.data.labels[i] == c)
            .collect();
        set.data.inputs.select(Axis(0), &idx)
    }
}
