//! Feature-sampling models with a completely random measure prior.
//!
//! Given `n` customers and `k` features with frequencies `m_i`, the next
//! customer takes a Poisson number of new features with mean
//! `∫ s(1−s)^n λ(s) ds` and holds each known feature independently with
//! probability `∫ s^{m+1}(1−s)^{n−m} λ / ∫ s^m (1−s)^{n−m} λ`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{FeatureAllocation, SuffStats};
use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::levy::{LevyIntensity, LevyKind};
use crate::numerics::special::{ln_factorial, log_pochhammer};
use crate::numerics::sample_poisson;

/// Law of the next customer: Poisson mean for new features and inclusion
/// probabilities for the known ones, aligned with feature ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveLaw {
    pub new_rate: f64,
    pub known_probs: Vec<f64>,
}

fn require_unit_support(lam: &LevyIntensity) -> Result<()> {
    if lam.upper() > 1.0 {
        return Err(Error::UnsupportedIntensity(format!(
            "a {} intensity with support up to {} is not a feature prior; restrict it to (0, 1) first",
            lam.kind_name(),
            lam.upper()
        )));
    }
    Ok(())
}

/// Closed-form predictive of the stable Beta process.
pub fn stable_beta_predictive(alpha: f64, c: f64, sigma: f64, stats: &SuffStats) -> Result<PredictiveLaw> {
    let n = stats.n as f64;
    let new_rate = alpha * (log_pochhammer(c + sigma, n)? - log_pochhammer(c + 1.0, n)?).exp();
    let known_probs = stats.m.iter().map(|&m| (m as f64 - sigma) / (n + c)).collect();
    Ok(PredictiveLaw { new_rate, known_probs })
}

/// Moments keyed by their integer orders, evaluated in one batch.
struct MomentTable {
    values: BTreeMap<(usize, usize), f64>,
}

impl MomentTable {
    fn build(lam: &LevyIntensity, keys: BTreeSet<(usize, usize)>, cfg: &EvalConfig) -> Result<Self> {
        let keys: Vec<(usize, usize)> = keys.into_iter().collect();
        let pairs: Vec<(f64, f64)> = keys.iter().map(|&(p, q)| (p as f64, q as f64)).collect();
        let vals = lam.moments(&pairs, cfg)?;
        Ok(MomentTable {
            values: keys.into_iter().zip(vals).collect(),
        })
    }

    fn get(&self, p: usize, q: usize) -> f64 {
        self.values[&(p, q)]
    }
}

/// Predictive law after observing `stats` under intensity `lam` on `(0, 1)`.
pub fn predictive(lam: &LevyIntensity, stats: &SuffStats, cfg: &EvalConfig) -> Result<PredictiveLaw> {
    require_unit_support(lam)?;
    if cfg.closed_forms_allowed() {
        if let LevyKind::StableBeta { alpha, c, sigma } = *lam.kind() {
            if lam.upper() == 1.0 {
                return stable_beta_predictive(alpha, c, sigma, stats);
            }
        }
    }
    let n = stats.n;
    let mut keys = BTreeSet::from([(1, n)]);
    for &m in &stats.m {
        keys.insert((m, n - m));
        keys.insert((m + 1, n - m));
    }
    let table = MomentTable::build(lam, keys, cfg)?;
    let known_probs = stats
        .m
        .iter()
        .map(|&m| table.get(m + 1, n - m) / table.get(m, n - m))
        .collect();
    Ok(PredictiveLaw {
        new_rate: table.get(1, n),
        known_probs,
    })
}

/// Draws the next customer from a predictive law and appends it to `z`.
pub fn sample_from_law<R: Rng + ?Sized>(rng: &mut R, z: &FeatureAllocation, law: &PredictiveLaw) -> Result<FeatureAllocation> {
    let known: Vec<usize> = law
        .known_probs
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| (rng.gen::<f64>() < p).then_some(i))
        .collect();
    let fresh = sample_poisson(rng, law.new_rate) as usize;
    z.push_customer(&known, fresh)
}

/// Appends one customer drawn from the predictive given `z`.
pub fn sample_next<R: Rng + ?Sized>(
    rng: &mut R,
    lam: &LevyIntensity,
    z: &FeatureAllocation,
    cfg: &EvalConfig,
) -> Result<FeatureAllocation> {
    let law = predictive(lam, &z.suff_stats(), cfg)?;
    sample_from_law(rng, z, &law)
}

/// `n` sequential draws starting from the empty allocation.
pub fn sample_allocation<R: Rng + ?Sized>(
    rng: &mut R,
    lam: &LevyIntensity,
    n: usize,
    cfg: &EvalConfig,
) -> Result<FeatureAllocation> {
    let mut z = FeatureAllocation::empty();
    for _ in 0..n {
        z = sample_next(rng, lam, &z, cfg)?;
    }
    Ok(z)
}

/// New-feature rates `∫ s(1−s)^j λ(s) ds` for `j = 0..n−1`.
pub fn new_feature_rates(lam: &LevyIntensity, n: usize, cfg: &EvalConfig) -> Result<Vec<f64>> {
    require_unit_support(lam)?;
    let pairs: Vec<(f64, f64)> = (0..n).map(|j| (1.0, j as f64)).collect();
    lam.moments(&pairs, cfg)
}

/// `E[K_j]` for `j = 1..=n`.
pub fn expected_feature_curve(lam: &LevyIntensity, n: usize, cfg: &EvalConfig) -> Result<Vec<f64>> {
    let rates = new_feature_rates(lam, n, cfg)?;
    Ok(rates
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect())
}

/// `E[K_n] = Σ_{j<n} ∫ s(1−s)^j λ(s) ds`.
pub fn expected_num_features(lam: &LevyIntensity, n: usize, cfg: &EvalConfig) -> Result<f64> {
    Ok(new_feature_rates(lam, n, cfg)?.iter().sum())
}

/// Log probability of an allocation under the sequential scheme, with the
/// pattern-matching factor that makes it independent of customer order.
///
/// At step `j` the `y_j` features first held by customer `j` are
/// indistinguishable at the time they are drawn; only `y_j!/∏ c_{j,h}!` of
/// their orderings give different allocations, where `c_{j,h}` counts those
/// features sharing the same set of later holders.
pub fn allocation_log_prob(lam: &LevyIntensity, z: &FeatureAllocation, cfg: &EvalConfig) -> Result<f64> {
    require_unit_support(lam)?;
    let n = z.n();
    let columns = z.columns();
    let mut keys: BTreeSet<(usize, usize)> = (0..n).map(|j| (1, j)).collect();
    for holders in &columns {
        let first = holders[0];
        for j in first + 1..n {
            let m = holders.partition_point(|&h| h < j);
            keys.insert((m, j - m));
            keys.insert((m + 1, j - m));
            keys.insert((m, j - m + 1));
        }
    }
    let table = MomentTable::build(lam, keys, cfg)?;

    let mut by_first: Vec<BTreeMap<&[usize], u64>> = vec![BTreeMap::new(); n];
    for holders in &columns {
        *by_first[holders[0]].entry(holders.as_slice()).or_default() += 1;
    }
    let mut total = 0.0;
    for (j, groups) in by_first.iter().enumerate() {
        let rate = table.get(1, j);
        let y: u64 = groups.values().sum();
        if y > 0 {
            total += y as f64 * rate.ln();
        }
        total -= rate;
        total -= groups.values().map(|&c| ln_factorial(c)).sum::<f64>();
    }
    for holders in &columns {
        for j in holders[0] + 1..n {
            let m = holders.partition_point(|&h| h < j);
            let denom = table.get(m, j - m);
            let held = holders.binary_search(&j).is_ok();
            let num = if held { table.get(m + 1, j - m) } else { table.get(m, j - m + 1) };
            total += (num / denom).ln();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sb() -> LevyIntensity {
        LevyIntensity::stable_beta(2.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let cfg = EvalConfig::default();
        let law = predictive(&sb(), &SuffStats::new(10, vec![3]).unwrap(), &cfg).unwrap();
        assert!((law.known_probs[0] - 2.5 / 11.0).abs() < 1e-15);
        let law = predictive(&sb(), &SuffStats::new(0, vec![]).unwrap(), &cfg).unwrap();
        assert!((law.new_rate - 2.0).abs() < 1e-15);
        let law = predictive(&sb(), &SuffStats::new(2, vec![]).unwrap(), &cfg).unwrap();
        assert!((law.new_rate - 1.25).abs() < 1e-14);
    }

    #[test]
    fn quadrature_route_agrees() {
        let q = EvalConfig::quadrature_only();
        let stats = SuffStats::new(10, vec![3, 10, 1]).unwrap();
        let gen = predictive(&sb(), &stats, &q).unwrap();
        let cf = predictive(&sb(), &stats, &EvalConfig::default()).unwrap();
        assert!(((gen.new_rate - cf.new_rate) / cf.new_rate).abs() < 1e-9);
        for (a, b) in gen.known_probs.iter().zip(&cf.known_probs) {
            assert!(((a - b) / b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_unbounded_support() {
        let st = LevyIntensity::stable(1.0, 0.5).unwrap();
        let stats = SuffStats::new(1, vec![1]).unwrap();
        assert!(matches!(
            predictive(&st, &stats, &EvalConfig::default()),
            Err(Error::UnsupportedIntensity(_))
        ));
        let restricted = st.restricted_to(1.0).unwrap();
        let law = predictive(&restricted, &stats, &EvalConfig::default()).unwrap();
        assert!(((law.known_probs[0]) - 0.5 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn expected_features() {
        let cfg = EvalConfig::default();
        assert_eq!(expected_num_features(&sb(), 0, &cfg).unwrap(), 0.0);
        assert!((expected_num_features(&sb(), 1, &cfg).unwrap() - 2.0).abs() < 1e-14);
        assert!((expected_num_features(&sb(), 3, &cfg).unwrap() - 4.75).abs() < 1e-13);
        let curve = expected_feature_curve(&sb(), 3, &cfg).unwrap();
        assert!((curve[1] - 3.5).abs() < 1e-13, "{curve:?}");
    }

    #[test]
    fn log_prob_examples() {
        let cfg = EvalConfig::default();
        let lam = sb();
        let l0 = lam.moment(1.0, 0.0, &cfg).unwrap();
        let l1 = lam.moment(1.0, 1.0, &cfg).unwrap();
        let m2 = lam.moment(2.0, 0.0, &cfg).unwrap();
        let single = FeatureAllocation::from_labels(&[vec![0]]).unwrap().0;
        assert!((allocation_log_prob(&lam, &single, &cfg).unwrap() - (l0.ln() - l0)).abs() < 1e-14);
        let blank = FeatureAllocation::with_empty_customers(3);
        let rates: f64 = new_feature_rates(&lam, 3, &cfg).unwrap().iter().sum();
        assert!((allocation_log_prob(&lam, &blank, &cfg).unwrap() + rates).abs() < 1e-14);
        let z = FeatureAllocation::from_labels(&[vec![0], vec![0, 1]]).unwrap().0;
        let want = -l0 - l1 + m2.ln() + l1.ln();
        let fwd = allocation_log_prob(&lam, &z, &cfg).unwrap();
        let rev = allocation_log_prob(&lam, &z.permute_customers(&[1, 0]).unwrap(), &cfg).unwrap();
        assert!((fwd - want).abs() < 1e-13, "{fwd} vs {want}");
        assert!((rev - want).abs() < 1e-13, "{rev} vs {want}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let cfg = EvalConfig::default();
        let a = sample_allocation(&mut ChaCha20Rng::seed_from_u64(3), &sb(), 20, &cfg).unwrap();
        let b = sample_allocation(&mut ChaCha20Rng::seed_from_u64(3), &sb(), 20, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 20);
        let e = sample_allocation(&mut ChaCha20Rng::seed_from_u64(3), &sb(), 0, &cfg).unwrap();
        assert_eq!(e.n(), 0);
    }
}
