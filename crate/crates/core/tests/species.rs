use featurelab::alloc::Partition;
use featurelab::harness::{permutations, restricted_growth_strings};
use featurelab::numerics::log_pochhammer;
use featurelab::species::*;
use featurelab::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn py_log_v(sigma: f64, theta: f64) -> impl Fn(usize, usize) -> f64 + Send + Sync + 'static {
    move |n, k| {
        let num: f64 = (1..k).map(|i| (theta + i as f64 * sigma).ln()).sum();
        num - log_pochhammer(theta + 1.0, n as f64 - 1.0).unwrap()
    }
}

#[test]
fn predictive_examples() {
    let d = GibbsModel::dirichlet(1.0).unwrap();
    let law = gibbs_predictive(&d, &Partition::new(1, vec![1]).unwrap()).unwrap();
    assert!((law.p_new - 0.5).abs() < 1e-15);
    assert!((law.p_old[0] - 0.5).abs() < 1e-15);
    let py = GibbsModel::pitman_yor(0.5, 0.5).unwrap();
    let law = gibbs_predictive(&py, &Partition::new(2, vec![2]).unwrap()).unwrap();
    assert!((law.p_new - 0.4).abs() < 1e-15);
    assert!((law.p_old[0] - 0.6).abs() < 1e-15);
    let first = gibbs_predictive(&py, &Partition::empty()).unwrap();
    assert_eq!(first.p_new, 1.0);
}

#[test]
fn exhaustive_form_checks_up_to_eight() {
    let (theta, sigma) = (1.3, 0.4);
    let d = GibbsModel::dirichlet(theta).unwrap();
    let py = GibbsModel::pitman_yor(sigma, theta).unwrap();
    for n in 1..=8 {
        for labels in restricted_growth_strings(n) {
            let part = Partition::from_labels(&labels);
            let k = part.k() as f64;
            let nf = n as f64;

            let law = gibbs_predictive(&d, &part).unwrap();
            assert!((law.p_new - theta / (theta + nf)).abs() < 1e-14);
            for (p, &b) in law.p_old.iter().zip(&part.blocks) {
                assert!((p - b as f64 / (theta + nf)).abs() < 1e-14);
            }

            let law = gibbs_predictive(&py, &part).unwrap();
            assert!((law.p_new - (theta + k * sigma) / (theta + nf)).abs() < 1e-14);
            for (p, &b) in law.p_old.iter().zip(&part.blocks) {
                assert!((p - (b as f64 - sigma) / (theta + nf)).abs() < 1e-14);
            }

            // second route: ratios of the partition probabilities
            let base = eppf_log_prob(&py, &labels).unwrap();
            let mut grown = labels.clone();
            grown.push(part.k());
            assert!(((eppf_log_prob(&py, &grown).unwrap() - base).exp() - law.p_new).abs() < 1e-12);
            for (i, p) in law.p_old.iter().enumerate() {
                let mut grown = labels.clone();
                grown.push(i);
                assert!(((eppf_log_prob(&py, &grown).unwrap() - base).exp() - p).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn custom_weights_agree_with_catalog() {
    let (sigma, theta) = (0.3, 2.0);
    let custom = GibbsModel::custom(sigma, py_log_v(sigma, theta), None).unwrap();
    let py = GibbsModel::pitman_yor(sigma, theta).unwrap();
    assert!(custom.recorded_residual().unwrap() < RECURSION_TOL);
    for labels in restricted_growth_strings(6) {
        let part = Partition::from_labels(&labels);
        let a = gibbs_predictive(&custom, &part).unwrap();
        let b = gibbs_predictive(&py, &part).unwrap();
        assert!((a.p_new - b.p_new).abs() < 1e-13);
        assert!((eppf_log_prob(&custom, &labels).unwrap() - eppf_log_prob(&py, &labels).unwrap()).abs() < 1e-12);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    assert_eq!(sample_labels(&mut rng, &custom, 40).unwrap().len(), 40);
}

#[test]
fn recursion_residuals() {
    assert!(check_v_recursion(&GibbsModel::dirichlet(2.0).unwrap(), 30).unwrap() < 1e-12);
    assert!(check_v_recursion(&GibbsModel::pitman_yor(0.5, 1.0).unwrap(), 30).unwrap() < 1e-12);
    assert!(check_v_recursion(&GibbsModel::pitman_yor(-0.5, 1.5).unwrap(), 30).unwrap() < 1e-12);
    // Dirichlet weights paired with the wrong σ break the recursion
    let bad = GibbsModel::custom(0.5, |n, k| (k as f64 - 1.0) * 2f64.ln() - log_pochhammer(3.0, n as f64 - 1.0).unwrap(), None).unwrap();
    assert!(bad.recorded_residual().unwrap() > 1e-3);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    assert!(matches!(sample_labels(&mut rng, &bad, 5), Err(Error::RecursionViolated { .. })));
    // predictives stay available and normalized
    let law = gibbs_predictive(&bad, &Partition::new(3, vec![2, 1]).unwrap()).unwrap();
    assert!(law.p_new.is_finite());
}

#[test]
fn normalization_up_to_two_hundred() {
    let models = [
        GibbsModel::dirichlet(0.7).unwrap(),
        GibbsModel::pitman_yor(0.5, 1.0).unwrap(),
        GibbsModel::pitman_yor(0.9, 0.1).unwrap(),
        GibbsModel::pitman_yor(-0.25, 1.0).unwrap(),
        GibbsModel::custom(0.3, py_log_v(0.3, 2.0), None).unwrap(),
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for model in &models {
        for n in 0..=200 {
            for _ in 0..3 {
                let labels = sample_labels(&mut rng, model, n).unwrap();
                let law = gibbs_predictive(model, &Partition::from_labels(&labels)).unwrap();
                let total = law.p_new + law.p_old.iter().sum::<f64>();
                assert!((total - 1.0).abs() < 1e-12, "{model:?} n={n}: {total}");
            }
        }
    }
}

#[test]
fn negative_sigma_caps_the_species() {
    let model = GibbsModel::pitman_yor(-0.5, 1.5).unwrap();
    assert_eq!(model.max_blocks(), Some(3));
    let law = gibbs_predictive(&model, &Partition::new(5, vec![2, 2, 1]).unwrap()).unwrap();
    assert_eq!(law.p_new, 0.0);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..200 {
        let labels = sample_labels(&mut rng, &model, 30).unwrap();
        assert!(labels.iter().all(|&l| l < 3));
    }
    assert!(GibbsModel::pitman_yor(-0.5, 1.2).is_err());
    assert!(GibbsModel::pitman_yor(0.5, -0.6).is_err());
    assert!(GibbsModel::pitman_yor(1.0, 1.0).is_err());
    assert!(GibbsModel::dirichlet(0.0).is_err());
}

#[test]
fn eppf_examples_and_invariance() {
    let d = GibbsModel::dirichlet(1.0).unwrap();
    assert!((eppf_log_prob(&d, &[0, 0]).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    assert!((eppf_log_prob(&d, &[0, 1]).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    for model in [d, GibbsModel::pitman_yor(0.5, 1.0).unwrap()] {
        for n in 1..=5 {
            let perms = permutations(n);
            let mut total = 0.0;
            for labels in restricted_growth_strings(n) {
                let base = eppf_log_prob(&model, &labels).unwrap();
                total += base.exp();
                for p in &perms {
                    let moved: Vec<usize> = p.iter().map(|&i| labels[i]).collect();
                    assert!((eppf_log_prob(&model, &moved).unwrap() - base).abs() < 1e-12);
                }
                let part = Partition::from_labels(&labels);
                assert!((partition_log_eppf(&model, &part).unwrap() - base).abs() < 1e-12);
            }
            // sequences in first-appearance form cover every partition once
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn block_counts() {
    let theta = 2.0;
    let d = GibbsModel::dirichlet(theta).unwrap();
    let closed = dirichlet_expected_blocks(theta, 50);
    let curve = expected_block_curve(&d, 50).unwrap();
    for (j, (a, b)) in closed.iter().zip(&curve).enumerate() {
        let want: f64 = (0..=j).map(|i| theta / (theta + i as f64)).sum();
        assert!((a - want).abs() < 1e-12 && (b - want).abs() < 1e-10);
    }
    let py = GibbsModel::pitman_yor(0.5, 1.0).unwrap();
    let dist = block_count_distribution(&py, 12).unwrap();
    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mean: f64 = dist.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    assert!((mean - expected_num_blocks(&py, 12).unwrap()).abs() < 1e-10);
    let one = sample_partition(&mut ChaCha20Rng::seed_from_u64(0), &py, 1).unwrap();
    assert_eq!(one.blocks, vec![1]);
}

#[test]
fn empirical_block_count() {
    let theta = 1.5;
    let d = GibbsModel::dirichlet(theta).unwrap();
    let (n, reps) = (50, 10_000);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let ks: Vec<f64> = (0..reps)
        .map(|_| sample_partition(&mut rng, &d, n).unwrap().k() as f64)
        .collect();
    let mean = ks.iter().sum::<f64>() / reps as f64;
    let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let want: f64 = (0..n).map(|j| theta / (theta + j as f64)).sum();
    assert!((mean - want).abs() < 3.0 * (var / reps as f64).sqrt(), "{mean} vs {want}");
    let a = sample_labels(&mut ChaCha20Rng::seed_from_u64(8), &d, 100).unwrap();
    let b = sample_labels(&mut ChaCha20Rng::seed_from_u64(8), &d, 100).unwrap();
    assert_eq!(a, b);
}

#[test]
fn json_round_trip() {
    let py = GibbsModel::pitman_yor(0.5, 1.0).unwrap();
    let v = py.to_json().unwrap();
    assert_eq!(GibbsModel::from_json(&v).unwrap().to_json().unwrap(), v);
    let alias = serde_json::json!({"kind": "pitman-yor", "params": {"sigma": 0.5, "theta": 1.0}});
    assert_eq!(GibbsModel::from_json(&alias).unwrap().to_json().unwrap(), v);
    let custom = GibbsModel::custom(0.3, py_log_v(0.3, 2.0), None).unwrap();
    assert!(custom.to_json().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predictive_is_normalized(
        sigma in -0.9f64..0.95,
        theta_raw in 0.01f64..10.0,
        seed in any::<u64>(),
        n in 0usize..60,
    ) {
        let model = if sigma < 0.0 {
            let m = 1.0 + (theta_raw * 2.0).floor();
            GibbsModel::pitman_yor(sigma, m * -sigma).unwrap()
        } else {
            GibbsModel::pitman_yor(sigma, theta_raw - sigma * 0.99).unwrap()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let labels = sample_labels(&mut rng, &model, n).unwrap();
        let law = gibbs_predictive(&model, &Partition::from_labels(&labels)).unwrap();
        let total = law.p_new + law.p_old.iter().sum::<f64>();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(law.p_new >= 0.0 && law.p_old.iter().all(|&p| p > 0.0));
    }
}
