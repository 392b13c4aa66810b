mod common;

use common::*;
use ndarray::Array2;
use num_complex::Complex32;
use owrf::config::PipelineConfig;
use owrf::discovery::{
    composite_score, detect_elbow, gmm_fit, kmeans_fit, pairwise_distances, select_k,
    validity_scores, ValidityScores,
};
use owrf::embedding::{
    composite_loss, shuffled_batches, train_batches, Activation, ClassRegistry, Dataset,
    EncoderConfig, LossConfig, TrainState,
};
use owrf::evaluation::{project_2d, score_session};
use owrf::incremental::select_exemplars;
use owrf::openset::{decide, fit_class_stats, ClassSamples};
use owrf::signal::{stft_spectrogram, IqRecord};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn one_class(x: &Array2<f64>) -> Vec<ClassSamples<'_>> {
    vec![ClassSamples {
        class_index: 0,
        class_id: "c".into(),
        embeddings: x.view(),
    }]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrogram_is_min_max_normalized(
        samples in proptest::collection::vec((-1.0f32..1.0, -1.0f32..1.0), 64..256),
    ) {
        let iq: Vec<Complex32> = samples.iter().map(|&(re, im)| Complex32::new(re, im)).collect();
        let rec = IqRecord::new(iq, 1e6, 0.0, None, "p").unwrap();
        let spec = stft_spectrogram(&rec, 32, 16, "hann").unwrap();
        let lo = spec.values.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = spec.values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        prop_assert!(lo >= 0.0 && hi <= 1.0);
        if hi > lo {
            prop_assert_eq!(lo, 0.0);
            prop_assert_eq!(hi, 1.0);
        }
    }

    #[test]
    fn mahalanobis_is_invariant_under_linear_maps(
        x in matrix(12, 3),
        a in matrix(3, 3),
        probes in matrix(5, 3),
    ) {
        let a = a + Array2::<f64>::eye(3) * 25.0;
        let before = fit_class_stats(&one_class(&x), 0.0);
        prop_assume!(before.is_ok());
        let before = before.unwrap();
        let y = x.dot(&a.t());
        let after = fit_class_stats(&one_class(&y), 0.0).unwrap();
        for p in probes.rows() {
            let q = a.dot(&p);
            let d0 = before[0].squared_distance(p).unwrap().sqrt();
            let d1 = after[0].squared_distance(q.view()).unwrap().sqrt();
            prop_assert!((d0 - d1).abs() <= 1e-6 * d0.max(1.0), "{} vs {}", d0, d1);
        }
    }

    #[test]
    fn precision_inverts_covariance(x in matrix(20, 4), shrinkage in 0.01f64..1.0) {
        let stats = fit_class_stats(&one_class(&x), shrinkage).unwrap();
        let prod = stats[0].sigma_inv.dot(&stats[0].sigma);
        let err = (&prod - &Array2::<f64>::eye(4)).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
        prop_assert!(err <= 1e-8, "max-abs error {}", err);
    }

    #[test]
    fn gaussian_self_rejection_is_small(seed in 0u64..1000) {
        let x = blob(&[0.0; 6], 500, 1.0, seed);
        let stats = fit_class_stats(&one_class(&x), 0.0).unwrap();
        let rejected = x.rows().into_iter().filter(|z| !decide(*z, &stats).unwrap().accepted).count();
        prop_assert!(rejected <= 10, "{} of 500 rejected", rejected);
    }

    #[test]
    fn composite_recomputes_from_sub_indices(x in matrix(16, 2), k in 2usize..5, seed in 0u64..100) {
        let fit = kmeans_fit(x.view(), k, 3, seed).unwrap();
        let used: std::collections::BTreeSet<_> = fit.labels.iter().collect();
        prop_assume!(used.len() >= 2);
        let dist = pairwise_distances(x.view());
        let (s, _) = validity_scores(x.view(), dist.view(), &fit.labels, fit.inertia, "kmeans").unwrap();
        let q = composite_score(s.silhouette, s.calinski_harabasz, s.davies_bouldin, s.explained_variance);
        prop_assert!((q - s.composite).abs() <= 1e-9);
        prop_assert!((-1.0..=1.0).contains(&s.silhouette));
    }

    #[test]
    fn kmeans_restarts_and_lloyd_steps(x in matrix(20, 2), k in 1usize..5, seed in 0u64..100) {
        let fit = kmeans_fit(x.view(), k, 6, seed).unwrap();
        for w in fit.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        for &r in &fit.restart_inertia {
            prop_assert!(fit.inertia <= r);
        }
    }

    #[test]
    fn em_is_monotone_with_spd_covariances(x in matrix(24, 2), k in 1usize..4, seed in 0u64..100) {
        let fit = gmm_fit(x.view(), k, 100, 1e-10, 2, seed).unwrap();
        for w in fit.objective_history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        for cov in &fit.covariances {
            prop_assert!(jacobi_eigenvalues(cov).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn elbow_and_selection_are_pure(
        inertia in proptest::collection::vec(0.0f64..100.0, 3..10),
        q in proptest::collection::vec(-1.0f64..2.0, 2..9),
    ) {
        let ks: Vec<usize> = (1..=inertia.len()).collect();
        prop_assert_eq!(detect_elbow(&ks, &inertia).unwrap(), detect_elbow(&ks, &inertia).unwrap());
        let per_k: Vec<ValidityScores> = q
            .iter()
            .enumerate()
            .map(|(i, &c)| ValidityScores {
                k: i + 2,
                model: "kmeans".into(),
                silhouette: 0.0,
                calinski_harabasz: 0.0,
                davies_bouldin: 0.0,
                explained_variance: 0.0,
                composite: c,
                inertia: 0.0,
            })
            .collect();
        let a = select_k(&per_k, Some(2), 0.9).unwrap();
        prop_assert_eq!(&a, &select_k(&per_k, Some(2), 0.9).unwrap());
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if q[0] >= 0.9 * best {
            prop_assert_eq!(a.k_star, 2);
        } else {
            prop_assert_eq!(a.k_star, a.k_score);
        }
    }

    #[test]
    fn loss_total_is_the_weighted_sum(
        z in matrix(9, 3),
        logits in matrix(9, 3),
        centers in matrix(3, 3),
        eta in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
    ) {
        let cfg = LossConfig { eta1: eta.0, eta2: eta.1, eta3: eta.2, margin: 1.0 };
        let labels: Vec<usize> = (0..9).map(|i| i % 3).collect();
        let l = composite_loss(z.view(), logits.view(), &labels, centers.view(), &cfg).unwrap();
        let want = eta.0 * l.center + eta.1 * l.separation + eta.2 * l.cross_entropy;
        prop_assert!((l.total - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn replaying_the_same_batches_gives_the_same_model(seed in 0u64..1000) {
        let (data, _) = known_data(12, seed);
        let cfg = EncoderConfig {
            input_dims: DIMS,
            hidden_widths: vec![8],
            embed_dim: 3,
            activation: Activation::Tanh,
            seed,
        };
        let batches = shuffled_batches(data.len(), 7, seed);
        let run = || {
            let mut s = TrainState::new(cfg.clone(), 3).unwrap();
            train_batches(&mut s, &data, &batches, &LossConfig::default(), 1e-2).unwrap();
            s
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn exemplar_selection_respects_the_cap(z in matrix(15, 2), cap in 0usize..20) {
        let arrivals: Vec<u64> = (0..15).collect();
        let picked = select_exemplars(z.view(), &arrivals, cap);
        prop_assert_eq!(picked.len(), cap.min(15));
        let unique: std::collections::BTreeSet<_> = picked.iter().collect();
        prop_assert_eq!(unique.len(), picked.len());
    }

    #[test]
    fn confusion_matrix_agrees_with_accuracies(
        cells in proptest::collection::vec((0usize..4, 0usize..3), 1..60),
    ) {
        // truth index 0..4 over {a, b, x, y}; prediction 0 = rejected, 1 = a, 2 = b.
        let names = ["a", "b", "x", "y"];
        let reg = ClassRegistry::from_labels(&["a", "b"]).unwrap();
        let truth: Vec<String> = cells.iter().map(|&(t, _)| names[t].to_string()).collect();
        let preds: Vec<Option<usize>> = cells.iter().map(|&(_, p)| p.checked_sub(1)).collect();
        let r = score_session(&preds, &truth, &reg).unwrap();
        let m = &r.confusion;
        prop_assert_eq!(m.total(), cells.len() as u64);
        let overall = 100.0 * m.trace() as f64 / m.total() as f64;
        prop_assert!((overall - r.overall_accuracy).abs() <= 1e-9);
        let weighted = r.acc_old.unwrap_or(0.0) * r.n_old as f64 + r.acc_new.unwrap_or(0.0) * r.n_new as f64;
        prop_assert!((weighted / cells.len() as f64 - r.overall_accuracy).abs() <= 1e-9);
        let unknown = m.unknown_column();
        let rej_old: u64 = unknown[..2].iter().sum();
        let rej_new: u64 = unknown[2..].iter().sum();
        if r.n_old > 0 {
            prop_assert!((r.rejection_rate_known.unwrap() - 100.0 * rej_old as f64 / r.n_old as f64).abs() <= 1e-9);
        }
        if r.n_new > 0 {
            prop_assert!((r.rejection_rate_unknown.unwrap() - 100.0 * rej_new as f64 / r.n_new as f64).abs() <= 1e-9);
        }
    }

    #[test]
    fn projection_ignores_input_negation(x in matrix(10, 4)) {
        let p = project_2d(x.view());
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        let q = project_2d((-&x).view()).unwrap();
        let err = (&p.coords - &q.coords).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
        prop_assert!(err <= 1e-9 * p.coords.mapv(f64::abs).fold(1.0f64, |m, &v| m.max(v)));
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        shrinkage in 0.0f64..1.0,
        tau_p in 0.0f64..1.0,
        old_max in prop_oneof![Just(0usize), 2usize..50],
        n_min in 2usize..500,
    ) {
        let mut cfg: PipelineConfig = PipelineConfig::from_toml_str(
            "[signal]\n[[signal.known]]\nclass_id = \"a\"\ntone_set = [1000.0]\n[[signal.known]]\nclass_id = \"b\"\ntone_set = [2000.0]\n",
        ).unwrap();
        cfg.seed = seed;
        cfg.openset.shrinkage = shrinkage;
        cfg.discovery.tau_p = tau_p;
        cfg.incremental.old_max = old_max;
        cfg.incremental.n_min = owrf::incremental::NMin::At(n_min);
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn dataset_rows_stay_aligned() {
    let (data, _) = known_data(5, 1);
    let sub = data.select(&[0, 14]);
    assert_eq!(sub.labels, vec![0, 2]);
    assert_eq!(sub.inputs.row(1), data.inputs.row(14));
    assert!(Dataset::new(Array2::zeros((2, WIDTH)), vec![0]).is_err());
}
