mod common;

use common::*;
use owrf::discovery::DiscoveryConfig;
use owrf::embedding::{ClassEntry, ClassOrigin};
use owrf::incremental::{
    assemble_update_set, process_stream, BufferedSample, Exemplar, IncrementalConfig, NMin,
    NewClassSamples, ReplayMemory, SessionEvent,
};
use owrf::ErrorKind;

fn novel_stream(n_each: usize, seed: u64) -> Vec<owrf::incremental::StreamSample> {
    let a = samples(&blob(&axis_center(4, 12.0), n_each, 0.5, seed), "n0");
    let b = samples(&blob(&axis_center(5, 12.0), n_each, 0.5, seed + 1), "n1");
    a.into_iter().zip(b).flat_map(|(x, y)| [x, y]).collect()
}

fn triggers(state: &owrf::incremental::SessionState) -> usize {
    state
        .log
        .entries()
        .iter()
        .filter(|e| matches!(e.event, SessionEvent::DiscoveryTrigger { .. }))
        .count()
}

#[test]
fn known_stream_is_classified() {
    let mut state = session(IncrementalConfig::default(), DiscoveryConfig::default(), 3);
    let mut stream = Vec::new();
    for c in 0..3 {
        stream.extend(samples(
            &blob(&axis_center(c, 6.0), 40, 0.5, 100 + c as u64),
            &format!("k{c}"),
        ));
    }
    let decisions = process_stream(&mut state, &stream).unwrap();
    let correct = decisions
        .iter()
        .zip(&stream)
        .filter(|(d, s)| {
            d.decision
                .predicted
                .class()
                .is_some_and(|c| Some(state.classes.name(c)) == s.truth.as_deref())
        })
        .count();
    assert!(
        correct as f64 >= 0.95 * stream.len() as f64,
        "{correct}/{}",
        stream.len()
    );
    assert_eq!(state.round, 0);
    assert_eq!(triggers(&state), 0);
}

#[test]
fn trigger_fires_exactly_at_n_min() {
    let cfg = IncrementalConfig {
        n_min: NMin::At(5),
        ..IncrementalConfig::default()
    };
    let mut state = session(cfg, DiscoveryConfig::default(), 4);
    let stream = samples(&blob(&axis_center(4, 30.0), 5, 0.5, 9), "n0");
    let decisions = process_stream(&mut state, &stream).unwrap();
    assert!(decisions.iter().all(|d| !d.decision.accepted));
    assert_eq!(triggers(&state), 1);
    assert_eq!(state.round, 1);
    assert_eq!(state.buffer.len(), 0);
}

#[test]
fn disabled_discovery_leaves_the_model_alone() {
    let cfg = IncrementalConfig {
        n_min: NMin::Never,
        ..IncrementalConfig::default()
    };
    let mut state = session(cfg, DiscoveryConfig::default(), 5);
    let before = state.checkpoint();
    let decisions = process_stream(&mut state, &novel_stream(40, 11)).unwrap();
    assert_eq!(decisions.len(), 80);
    assert_eq!(state.checkpoint(), before);
    assert_eq!(state.round, 0);
    assert!(state
        .log
        .entries()
        .iter()
        .all(|e| matches!(e.event, SessionEvent::Decision { .. })));
}

#[test]
fn update_adds_classes_within_budgets() {
    let cfg = IncrementalConfig {
        n_min: NMin::At(60),
        learning_rate: 1e-3,
        ..IncrementalConfig::default()
    };
    let mut state = session(cfg.clone(), DiscoveryConfig::default(), 6);
    process_stream(&mut state, &novel_stream(30, 21)).unwrap();
    assert_eq!(state.round, 1);
    assert_eq!(state.updates.len(), 1);
    let n = state.classes.len();
    assert!(n > 3, "no class was added");
    assert_eq!(state.stats.len(), n);
    assert_eq!(state.model.n_classes, n);
    assert!(state.memory.total() <= cfg.m_max);
    assert!(state.memory.max_per_class() <= cfg.old_max);
    assert!(state.updates[0].steps <= cfg.max_update_steps);
    for (i, e) in state.classes.entries().iter().enumerate().skip(3) {
        assert!(e.name.starts_with("novel-0-"));
        assert_eq!(state.stats[i].class_id, e.name);
    }
}

#[test]
fn budget_is_checked_before_the_model_changes() {
    let cfg = IncrementalConfig {
        n_min: NMin::At(60),
        max_update_steps: 1,
        ..IncrementalConfig::default()
    };
    let mut state = session(cfg, DiscoveryConfig::default(), 6);
    let before = state.checkpoint();
    let err = process_stream(&mut state, &novel_stream(30, 21)).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Budget);
    assert_eq!(state.checkpoint(), before);
}

#[test]
fn sessions_are_reproducible() {
    let cfg = IncrementalConfig {
        n_min: NMin::At(60),
        learning_rate: 1e-3,
        ..IncrementalConfig::default()
    };
    let run = || {
        let mut s = session(cfg.clone(), DiscoveryConfig::default(), 8);
        process_stream(&mut s, &novel_stream(30, 31)).unwrap();
        (s.log.to_jsonl().unwrap(), s.checkpoint())
    };
    assert_eq!(run(), run());
}

fn exemplar(class: usize, i: usize) -> Exemplar {
    Exemplar {
        input: vec![class as f64; WIDTH],
        embedding: vec![class as f64, i as f64],
        arrival: (class * 100 + i) as u64,
        truth: Some(format!("k{class}")),
    }
}

fn cluster(name: &str, size: usize) -> NewClassSamples {
    NewClassSamples {
        entry: ClassEntry {
            name: name.into(),
            origin: ClassOrigin::Discovered {
                session: 0,
                cluster: 0,
                majority_truth: None,
            },
        },
        samples: (0..size)
            .map(|i| BufferedSample {
                input: vec![i as f64; WIDTH],
                embedding: vec![i as f64, 0.0],
                arrival: i as u64,
                truth: None,
            })
            .collect(),
    }
}

fn memory(n_classes: usize, per_class: usize) -> ReplayMemory {
    let mut m = ReplayMemory::new(per_class, 2000);
    for c in 0..n_classes {
        m.set_class(c, (0..per_class).map(|i| exemplar(c, i)).collect());
    }
    m
}

#[test]
fn update_set_counts() {
    let cfg = IncrementalConfig::default();
    let clusters: Vec<_> = (0..6)
        .map(|j| cluster(&format!("novel-0-{j}"), 75))
        .collect();
    let set = assemble_update_set(&clusters, &memory(18, 5), 18, &cfg).unwrap();
    assert_eq!((set.old_samples, set.new_samples), (90, 360));
    assert_eq!(set.data.len(), 450);

    let no_replay = IncrementalConfig {
        old_max: 0,
        ..IncrementalConfig::default()
    };
    let set = assemble_update_set(&clusters, &memory(18, 5), 18, &no_replay).unwrap();
    assert_eq!(set.old_samples, 0);
    assert!(set.data.labels.iter().all(|&l| l >= 18));

    let set = assemble_update_set(&[cluster("novel-0-0", 40)], &memory(2, 5), 2, &cfg).unwrap();
    assert_eq!(set.new_samples, 40);
}

#[test]
fn update_set_needs_a_cluster() {
    let err =
        assemble_update_set(&[], &memory(2, 5), 2, &IncrementalConfig::default()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}
