//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! any of them fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use ndarray::{Array1, Array2};
use owrf::config::PipelineConfig;
use owrf::discovery::{
    composite_score, detect_elbow, gmm_fit, kmeans_fit, pairwise_distances, select_k,
    silhouette_samples, SelectionRule, ValidityScores,
};
use owrf::embedding::{
    batch_loss, loss_and_gradient, Activation, EncoderConfig, LossConfig, TrainState,
};
use owrf::incremental::NMin;
use owrf::openset::{decide, fit_class_stats, ClassSamples, ClassStatistics};
use owrf::pipeline::{cmd_generate, cmd_stream, cmd_train, StreamSummary};
use owrf::seed::rng_from_seed;
use owrf::signal::{read_manifest, write_manifest};
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// A session run kept for the budget check.
struct Session {
    label: String,
    cfg: PipelineConfig,
    dir: PathBuf,
    summary: StreamSummary,
}

fn criterion_1() -> Outcome {
    let kmeans = composite_score(0.444, 1399.6, 0.947, 0.698);
    let gmm = composite_score(0.388, 1222.7, 1.234, 0.702);
    ensure!(
        (kmeans - 0.770).abs() <= 1e-3,
        "K-Means row Q={kmeans:.4}, want 0.770"
    );
    ensure!(
        (gmm - 0.682).abs() <= 1e-3,
        "GMM row Q={gmm:.4}, want 0.682"
    );
    Ok(format!(
        "Q_kmeans={kmeans:.4} Q_gmm={gmm:.4} (tolerance 0.001)"
    ))
}

fn criterion_2(root: &Path, sessions: &mut Vec<Session>) -> Outcome {
    let start = Instant::now();
    let cfg = ok(PipelineConfig::from_toml_str(include_str!(
        "fixtures/ablation.toml"
    )))?;
    let base = root.join("ablation");
    ok(cmd_generate(&cfg, &base))?;
    ok(cmd_train(&cfg, &base))?;

    // Known-class stream records are held back so the stream carries only
    // the two novel classes and triggers exactly one update.
    let manifest = base.join("dataset/manifest.jsonl");
    let known: HashSet<&str> = cfg
        .signal
        .known
        .iter()
        .map(|p| p.class_id.as_str())
        .collect();
    let mut rows = ok(read_manifest(&manifest))?;
    let mut novel = 0;
    for row in &mut rows {
        if row.split.as_deref() != Some("stream") {
            continue;
        }
        if known.contains(row.label.as_deref().unwrap_or("")) {
            row.split = Some("holdout".into());
        } else {
            novel += 1;
        }
    }
    ok(write_manifest(&manifest, &rows))?;

    let mut acc = BTreeMap::new();
    for old_max in [0usize, 5, 10] {
        let mut c = cfg.clone();
        c.incremental.old_max = old_max;
        c.incremental.n_min = NMin::At(novel);
        c.paths.dataset = Some(base.join("dataset"));
        c.paths.checkpoint = Some(base.join("model/checkpoint.owck"));
        let dir = root.join(format!("ablation-old{old_max}"));
        let summary = ok(cmd_stream(&c, &dir))?;
        ensure!(
            summary.updates.len() == 1,
            "old_max={old_max}: {} updates, want 1",
            summary.updates.len()
        );
        let old = summary.closed_set.acc_old.unwrap_or(f64::NAN);
        let new = summary.closed_set.acc_new.unwrap_or(f64::NAN);
        acc.insert(old_max, (old, new));
        sessions.push(Session {
            label: format!("ablation old_max={old_max}"),
            cfg: c,
            dir: dir.join("stream"),
            summary,
        });
    }
    let line = acc
        .iter()
        .map(|(m, (o, n))| format!("old_max={m}: Acc_old {o:.1}% Acc_new {n:.1}%"))
        .collect::<Vec<_>>()
        .join("; ");
    let line = format!("{line} ({:.0}s)", start.elapsed().as_secs_f64());
    let (old0, _) = acc[&0];
    ensure!(old0 <= 20.0, "{line}: Acc_old at old_max=0 above 20%");
    for m in [5, 10] {
        let (o, n) = acc[&m];
        ensure!(
            o >= 95.0 && n >= 90.0,
            "{line}: old_max={m} below 95% old / 90% new"
        );
    }
    Ok(line)
}

fn one_class(x: &Array2<f64>) -> Result<Vec<ClassStatistics>, String> {
    ok(fit_class_stats(
        &[ClassSamples {
            class_index: 0,
            class_id: "c".into(),
            embeddings: x.view(),
        }],
        0.1,
    ))
}

fn criterion_3() -> Outcome {
    let d = 8;
    let mut rng = rng_from_seed(303);
    let mix = Array2::from_shape_fn((d, d), |(i, j)| {
        if i == j {
            1.0
        } else {
            0.3 * (rng.random::<f64>() - 0.5)
        }
    });
    let train = blob(&vec![0.0; d], 500, 1.0, 11).dot(&mix.t());
    let stats = one_class(&train)?;
    let mut self_rejected = 0;
    for z in train.rows() {
        if !ok(decide(z, &stats))?.accepted {
            self_rejected += 1;
        }
    }
    ensure!(self_rejected <= 10, "(a) {self_rejected}/500 self-rejected");

    let centers: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..d).map(|j| if j == c { 10.0 } else { 0.0 }).collect())
        .collect();
    let groups: Vec<Array2<f64>> = centers
        .iter()
        .enumerate()
        .map(|(c, m)| blob(m, 300, 1.0, 20 + c as u64))
        .collect();
    let samples: Vec<ClassSamples<'_>> = groups
        .iter()
        .enumerate()
        .map(|(c, g)| ClassSamples {
            class_index: c,
            class_id: format!("k{c}"),
            embeddings: g.view(),
        })
        .collect();
    let known = ok(fit_class_stats(&samples, 0.1))?;
    // 10 sigma from every known mean.
    let far: Vec<f64> = (0..d).map(|j| if j < 3 { -10.0 } else { 10.0 }).collect();
    let unknown = blob(&far, 1000, 1.0, 31);
    let mut rejected = 0;
    for z in unknown.rows() {
        if !ok(decide(z, &known))?.accepted {
            rejected += 1;
        }
    }
    ensure!(rejected >= 950, "(b) {rejected}/1000 rejected");

    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let x = blob(&vec![1.0; d], 200, 1.0, 40 + trial);
        let a = Array2::from_shape_fn((d, d), |_| rng.random::<f64>() - 0.5)
            + Array2::<f64>::eye(d) * 2.0;
        let ax = x.dot(&a.t());
        let s0 = ok(fit_class_stats(
            &[ClassSamples {
                class_index: 0,
                class_id: "c".into(),
                embeddings: x.view(),
            }],
            0.0,
        ))?;
        let s1 = ok(fit_class_stats(
            &[ClassSamples {
                class_index: 0,
                class_id: "c".into(),
                embeddings: ax.view(),
            }],
            0.0,
        ))?;
        for _ in 0..20 {
            let z = Array1::from_shape_fn(d, |_| 4.0 * (rng.random::<f64>() - 0.5));
            let d0 = ok(s0[0].squared_distance(z.view()))?;
            let d1 = ok(s1[0].squared_distance(a.dot(&z).view()))?;
            worst = worst.max((d0 - d1).abs() / d0.max(1.0));
        }
    }
    ensure!(worst <= 1e-6, "(c) invariance error {worst:e}");
    Ok(format!(
        "(a) {self_rejected}/500 self-rejected (max 10); (b) {rejected}/1000 rejected (min 950); \
         (c) max invariance error {worst:.1e} (max 1e-6)"
    ))
}

fn criterion_4() -> Outcome {
    let corpus = small_corpus();
    for (i, (x, k)) in corpus.iter().enumerate() {
        let fit = ok(kmeans_fit(x.view(), *k, 2 * x.nrows(), i as u64))?;
        let oracle = brute_force_inertia(x, *k);
        ensure!(
            (fit.inertia - oracle).abs() <= 1e-9 * oracle.max(1.0),
            "instance {i}: K-Means {} vs brute force {oracle}",
            fit.inertia
        );
    }
    let mut runs = 0;
    for (i, (x, k)) in corpus.iter().enumerate() {
        let Ok(fit) = gmm_fit(x.view(), *k, 200, 1e-10, 4, i as u64) else {
            continue;
        };
        runs += 1;
        for w in fit.objective_history.windows(2) {
            ensure!(
                w[1] >= w[0] - 1e-9,
                "instance {i}: EM objective {} -> {}",
                w[0],
                w[1]
            );
        }
    }
    ensure!(runs > 0, "no EM run completed");

    let x = ndarray::array![[0.0], [0.1], [10.0], [10.1]];
    let s = ok(silhouette_samples(
        pairwise_distances(x.view()).view(),
        &[0, 0, 1, 1],
    ))?;
    let mean = s.iter().sum::<f64>() / 4.0;
    let hand = (2.0 * (1.0 - 0.1 / 10.05) + 2.0 * (1.0 - 0.1 / 9.95)) / 4.0;
    ensure!(
        (mean - hand).abs() <= 1e-6,
        "silhouette {mean} vs hand {hand}"
    );
    Ok(format!(
        "{} instances match brute force; {runs} EM runs monotone (slack 1e-9); silhouette {mean:.6} vs {hand:.6}",
        corpus.len()
    ))
}

fn criterion_5() -> Outcome {
    let cfg = EncoderConfig {
        input_dims: DIMS,
        hidden_widths: vec![6],
        embed_dim: 3,
        activation: Activation::Tanh,
        seed: 55,
    };
    let mut state = ok(TrainState::new(cfg, 3))?;
    let mut rng = rng_from_seed(56);
    // Centers closer than the margin keep the separation term active.
    state.class_centers = Array2::from_shape_fn((3, 3), |_| 0.4 * (rng.random::<f64>() - 0.5));
    let inputs = Array2::from_shape_fn((12, WIDTH), |_| rng.random::<f64>() * 2.0 - 1.0);
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let loss = LossConfig::default();
    let grads = ok(loss_and_gradient(&state, inputs.view(), &labels, &loss))?;
    let b = grads.breakdown;
    ensure!(
        b.center > 0.0 && b.separation > 0.0 && b.cross_entropy > 0.0,
        "inactive loss term: {b:?}"
    );

    let h = 1e-5;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    let total = |s: &TrainState| batch_loss(s, inputs.view(), &labels, &loss).map(|l| l.total);
    let mut worst: f64 = 0.0;
    for i in 0..state.parameters.len() {
        let mut s = state.clone();
        let p = s.parameters[i];
        s.parameters[i] = p + h;
        let up = ok(total(&s))?;
        s.parameters[i] = p - h;
        let down = ok(total(&s))?;
        worst = worst.max(rel(grads.parameters[i], (up - down) / (2.0 * h)));
    }
    let n_params = state.parameters.len();
    for idx in ndarray::indices(state.class_centers.dim()) {
        let mut s = state.clone();
        let c = s.class_centers[idx];
        s.class_centers[idx] = c + h;
        let up = ok(total(&s))?;
        s.class_centers[idx] = c - h;
        let down = ok(total(&s))?;
        worst = worst.max(rel(grads.centers[idx], (up - down) / (2.0 * h)));
    }
    ensure!(worst < 1e-4, "max relative error {worst:e}");
    Ok(format!(
        "{} coordinates, max relative error {worst:.1e} (max 1e-4)",
        n_params + 9
    ))
}

fn scores(q: &[(usize, f64)]) -> Vec<ValidityScores> {
    q.iter()
        .map(|&(k, composite)| ValidityScores {
            k,
            model: "kmeans".into(),
            silhouette: 0.0,
            calinski_harabasz: 0.0,
            davies_bouldin: 0.0,
            explained_variance: 0.0,
            composite,
            inertia: 0.0,
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let ks: Vec<usize> = (1..=6).collect();
    let e1 = ok(detect_elbow(&ks, &[100.0, 50.0, 25.0, 24.0, 23.0, 22.0]))?.k;
    ensure!(
        e1 == 3,
        "elbow of [100, 50, 25, 24, 23, 22] is {e1}, want 3"
    );
    let e2 = ok(detect_elbow(&ks[..4], &[90.0, 30.0, 28.0, 27.0]))?.k;
    ensure!(e2 == 2, "elbow of [90, 30, 28, 27] is {e2}, want 2");

    let keep = ok(select_k(&scores(&[(2, 0.72), (3, 0.77)]), Some(2), 0.9))?;
    ensure!(
        keep.k_star == 2 && keep.rule == SelectionRule::Elbow,
        "0.72 vs 0.77 chose {keep:?}"
    );
    let swap = ok(select_k(&scores(&[(2, 0.60), (3, 0.77)]), Some(2), 0.9))?;
    ensure!(
        swap.k_star == 3 && swap.rule == SelectionRule::Score,
        "0.60 vs 0.77 chose {swap:?}"
    );
    let same = ok(select_k(&scores(&[(2, 0.10), (3, 0.77)]), Some(3), 0.9))?;
    ensure!(
        same.k_star == 3 && same.rule == SelectionRule::Coincident,
        "coincident candidates chose {same:?}"
    );
    Ok("elbow cases k=3 and k=2; ratio rule kept elbow, switched to score, coincident".into())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.json" {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_7(root: &Path, sessions: &mut Vec<Session>) -> Outcome {
    let cfg = ok(PipelineConfig::from_toml_str(include_str!(
        "fixtures/small.toml"
    )))?;
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out = root.join(format!("determinism-{run}"));
        ok(cmd_generate(&cfg, &out))?;
        ok(cmd_train(&cfg, &out))?;
        let summary = ok(cmd_stream(&cfg, &out))?;
        ensure!(summary.rounds > 0, "run {run}: no discovery round");
        trees.push(snapshot(&out));
        sessions.push(Session {
            label: format!("determinism run {run}"),
            cfg: cfg.clone(),
            dir: out.join("stream"),
            summary,
        });
    }
    let (a, b) = (&trees[0], &trees[1]);
    ensure!(
        a.keys().eq(b.keys()),
        "file sets differ: {:?} vs {:?}",
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>()
    );
    for (path, bytes) in a {
        ensure!(&b[path] == bytes, "{path} differs between runs");
    }
    for required in [
        "stream/session_log.jsonl",
        "stream/cluster_report_0.json",
        "stream/checkpoint.owck",
        "model/checkpoint.owck",
    ] {
        ensure!(a.contains_key(required), "{required} missing");
    }
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn criterion_8(sessions: &[Session]) -> Outcome {
    ensure!(!sessions.is_empty(), "no session runs to check");
    let mut updates = 0;
    for s in sessions {
        let inc = &s.cfg.incremental;
        let log =
            std::fs::read_to_string(s.dir.join("session_log.jsonl")).map_err(|e| e.to_string())?;
        for line in log.lines() {
            let event: serde_json::Value = ok(serde_json::from_str(line))?;
            if event["event"] != "update_summary" {
                continue;
            }
            updates += 1;
            let total = event["memory_total"].as_u64().unwrap_or(u64::MAX) as usize;
            let per_class = event["memory_max_per_class"].as_u64().unwrap_or(u64::MAX) as usize;
            let steps = event["steps"].as_u64().unwrap_or(u64::MAX);
            ensure!(
                total <= inc.m_max,
                "{}: |M|={total} > {}",
                s.label,
                inc.m_max
            );
            ensure!(
                per_class <= inc.old_max,
                "{}: per-class {per_class} > {}",
                s.label,
                inc.old_max
            );
            ensure!(
                steps <= inc.max_update_steps,
                "{}: {steps} steps > {}",
                s.label,
                inc.max_update_steps
            );
        }
        let m = &s.summary;
        ensure!(
            m.memory_total <= inc.m_max,
            "{}: final |M|={}",
            s.label,
            m.memory_total
        );
        ensure!(
            m.memory_max_per_class <= inc.old_max,
            "{}: final per-class {}",
            s.label,
            m.memory_max_per_class
        );
        for u in &m.updates {
            ensure!(
                u.steps <= inc.max_update_steps,
                "{}: round {} took {} steps",
                s.label,
                u.round,
                u.steps
            );
        }
    }
    Ok(format!(
        "{} session runs, {updates} updates within memory and step budgets",
        sessions.len()
    ))
}

fn report(n: usize, outcome: std::thread::Result<Outcome>) -> bool {
    let outcome = outcome.unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {n}: PASS {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {n}: FAIL {detail}");
            false
        }
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let mut sessions = Vec::new();
    let passed = [
        report(1, catch_unwind(criterion_1)),
        report(
            2,
            catch_unwind(AssertUnwindSafe(|| criterion_2(root, &mut sessions))),
        ),
        report(3, catch_unwind(criterion_3)),
        report(4, catch_unwind(criterion_4)),
        report(5, catch_unwind(criterion_5)),
        report(6, catch_unwind(criterion_6)),
        report(
            7,
            catch_unwind(AssertUnwindSafe(|| criterion_7(root, &mut sessions))),
        ),
        report(8, catch_unwind(AssertUnwindSafe(|| criterion_8(&sessions)))),
    ];
    let failed = passed.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        passed.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
