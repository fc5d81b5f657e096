use featurelab::alloc::{FeatureAllocation, SuffStats};
use featurelab::crm::*;
use featurelab::harness::permutations;
use featurelab::{EvalConfig, LevyIntensity};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn sb() -> LevyIntensity {
    LevyIntensity::stable_beta(2.0, 1.0, 0.5).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn predictive_examples() {
    let cfg = EvalConfig::default();
    let law = predictive(&sb(), &SuffStats::new(10, vec![3]).unwrap(), &cfg).unwrap();
    assert!(rel(law.known_probs[0], 2.5 / 11.0) < 1e-14);
    let quad = predictive(&sb(), &SuffStats::new(10, vec![3]).unwrap(), &EvalConfig::quadrature_only()).unwrap();
    assert!(rel(quad.known_probs[0], 2.5 / 11.0) < 1e-9);
    for alpha in [0.5, 2.0, 7.0] {
        let lam = LevyIntensity::stable_beta(alpha, 1.3, 0.2).unwrap();
        let law = predictive(&lam, &SuffStats::new(0, vec![]).unwrap(), &cfg).unwrap();
        assert!(rel(law.new_rate, alpha) < 1e-14);
    }
    let two = predictive(&sb(), &SuffStats::new(2, vec![]).unwrap(), &cfg).unwrap();
    assert!(rel(two.new_rate, 1.25) < 1e-14);
    // degenerate m = n
    let full = predictive(&sb(), &SuffStats::new(4, vec![4]).unwrap(), &cfg).unwrap();
    assert!(rel(full.known_probs[0], 3.5 / 5.0) < 1e-14);
}

#[test]
fn first_customer_count_is_poisson_alpha() {
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let reps = 100_000;
    let cfg = EvalConfig::default();
    let law = predictive(&sb(), &SuffStats::new(0, vec![]).unwrap(), &cfg).unwrap();
    let total: usize = (0..reps)
        .map(|_| sample_from_law(&mut rng, &FeatureAllocation::empty(), &law).unwrap().k())
        .sum();
    let mean = total as f64 / reps as f64;
    let se = (2.0 / reps as f64).sqrt();
    assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");
}

#[test]
fn one_step_inclusion_frequency() {
    let mut rng = ChaCha20Rng::seed_from_u64(102);
    let z = FeatureAllocation::from_columns(1, vec![vec![0]]).unwrap();
    let law = predictive(&sb(), &z.suff_stats(), &EvalConfig::default()).unwrap();
    let reps = 100_000;
    let hits = (0..reps)
        .filter(|_| {
            let next = sample_from_law(&mut rng, &z, &law).unwrap();
            next.suff_stats().m.iter().any(|&m| m == 2)
        })
        .count();
    let p = 0.25;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((hits as f64 / reps as f64 - p).abs() < 3.0 * se);
}

#[test]
fn sampling_is_deterministic() {
    let cfg = EvalConfig::default();
    let a = sample_allocation(&mut ChaCha20Rng::seed_from_u64(9), &sb(), 20, &cfg).unwrap();
    let b = sample_allocation(&mut ChaCha20Rng::seed_from_u64(9), &sb(), 20, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n(), 20);
    let empty = sample_allocation(&mut ChaCha20Rng::seed_from_u64(9), &sb(), 0, &cfg).unwrap();
    assert_eq!(empty, FeatureAllocation::empty());
}

#[test]
fn expected_counts() {
    let cfg = EvalConfig::default();
    assert_eq!(expected_num_features(&sb(), 0, &cfg).unwrap(), 0.0);
    assert!(rel(expected_num_features(&sb(), 1, &cfg).unwrap(), 2.0) < 1e-14);
    assert!(rel(expected_num_features(&sb(), 3, &cfg).unwrap(), 4.75) < 1e-14);
    let curve = expected_feature_curve(&sb(), 3, &EvalConfig::quadrature_only()).unwrap();
    for (got, want) in curve.iter().zip([2.0, 3.5, 4.75]) {
        assert!(rel(*got, want) < 1e-9);
    }
}

#[test]
fn empirical_feature_count_matches_expectation() {
    let cfg = EvalConfig::default();
    let n = 10;
    let reps = 10_000;
    let mut rng = ChaCha20Rng::seed_from_u64(103);
    let ks: Vec<f64> = (0..reps)
        .map(|_| sample_allocation(&mut rng, &sb(), n, &cfg).unwrap().k() as f64)
        .collect();
    let mean = ks.iter().sum::<f64>() / reps as f64;
    let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let want = expected_num_features(&sb(), n, &cfg).unwrap();
    assert!((mean - want).abs() < 3.0 * (var / reps as f64).sqrt(), "{mean} vs {want}");
}

#[test]
fn log_prob_examples() {
    let cfg = EvalConfig::default();
    let lam = sb();
    let l0 = lam.moment(1.0, 0.0, &cfg).unwrap();
    let l1 = lam.moment(1.0, 1.0, &cfg).unwrap();
    let l2 = lam.moment(1.0, 2.0, &cfg).unwrap();
    let m2 = lam.moment(2.0, 0.0, &cfg).unwrap();

    let single = FeatureAllocation::from_columns(1, vec![vec![0]]).unwrap();
    assert!((allocation_log_prob(&lam, &single, &cfg).unwrap() - (l0.ln() - l0)).abs() < 1e-13);

    let blank = FeatureAllocation::with_empty_customers(3);
    assert!((allocation_log_prob(&lam, &blank, &cfg).unwrap() + l0 + l1 + l2).abs() < 1e-13);

    let want = -l0 - l1 + m2.ln() + l1.ln();
    let z = FeatureAllocation::from_columns(2, vec![vec![0, 1], vec![1]]).unwrap();
    for p in permutations(2) {
        let moved = z.permute_customers(&p).unwrap();
        assert!((allocation_log_prob(&lam, &moved, &cfg).unwrap() - want).abs() < 1e-13);
        let q = allocation_log_prob(&lam, &moved, &EvalConfig::quadrature_only()).unwrap();
        assert!((q - want).abs() < 1e-8);
    }
}

#[test]
fn log_probs_sum_to_one_over_small_support() {
    // left-ordered classes of two customers with at most 8 features carry
    // almost all the mass
    let cfg = EvalConfig::default();
    let lam = LevyIntensity::stable_beta(0.3, 1.0, 0.5).unwrap();
    let mut total = 0.0;
    for a in 0..=8usize {
        for b in 0..=8usize {
            for c in 0..=8usize {
                if a + b + c > 8 {
                    continue;
                }
                // a features held by customer 0 only, b by both, c by customer 1 only
                let mut cols = vec![vec![0]; a];
                cols.extend(vec![vec![0, 1]; b]);
                cols.extend(vec![vec![1]; c]);
                let z = FeatureAllocation::from_columns(2, cols).unwrap();
                total += allocation_log_prob(&lam, &z, &cfg).unwrap().exp();
            }
        }
    }
    assert!((total - 1.0).abs() < 1e-6, "total {total}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_quadrature(
        alpha in 0.1f64..5.0,
        c in 0.1f64..4.0,
        sigma in 0.05f64..0.95,
        n in 1usize..30,
        frac in 0.0f64..1.0,
    ) {
        let m = 1 + ((n - 1) as f64 * frac) as usize;
        let stats = SuffStats::new(n, vec![m, 1]).unwrap();
        let exact = stable_beta_predictive(alpha, c, sigma, &stats).unwrap();
        let quad = predictive(&LevyIntensity::stable_beta(alpha, c, sigma).unwrap(), &stats, &EvalConfig::quadrature_only()).unwrap();
        prop_assert!(rel(quad.new_rate, exact.new_rate) < 1e-8);
        for (q, e) in quad.known_probs.iter().zip(&exact.known_probs) {
            prop_assert!(rel(*q, *e) < 1e-8);
        }
    }
}
