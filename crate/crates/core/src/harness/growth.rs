use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use super::report::{Case, VerificationReport};
use super::{run_replicates, Execution};
use crate::alloc::{FeatureAllocation, SuffStats};
use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::levy::LevyIntensity;
use crate::numerics::{open_unit, sample_poisson};
use crate::sp::{self, SpModel};
use crate::schema::Model;
use crate::species;
use crate::crm;

/// Two-sided level of a single 3-SE check.
fn three_se_level() -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - normal.cdf(3.0))
}

/// Bonferroni critical value keeping the family-wise level of `tests`
/// simultaneous checks at that of one 3-SE check. Equals 3 for one test.
pub fn z_critical(tests: usize) -> f64 {
    if tests <= 1 {
        return 3.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - three_se_level() / (2.0 * tests as f64))
}

/// `E[K_j]`, `j = 1..=n`.
pub fn analytic_curve(model: &Model, n: usize, cfg: &EvalConfig) -> Result<Vec<f64>> {
    match model {
        Model::Crm(lam) => crm::expected_feature_curve(lam, n, cfg),
        Model::Sp(m) => sp::expected_feature_curve(m, n, cfg),
        Model::Species(g) => species::expected_block_curve(g, n),
    }
}

/// `K_1..K_n` along one simulated sequence.
pub fn trajectory<R: rand::Rng + ?Sized>(rng: &mut R, model: &Model, n: usize, cfg: &EvalConfig) -> Result<Vec<usize>> {
    match model {
        Model::Species(g) => {
            let labels = species::sample_labels(rng, g, n)?;
            let mut k = 0;
            Ok(labels
                .iter()
                .map(|&l| {
                    k = k.max(l + 1);
                    k
                })
                .collect())
        }
        Model::Crm(lam) => crm_trajectory(rng, lam, n, cfg),
        Model::Sp(m) => {
            if n == 0 {
                return Ok(Vec::new());
            }
            let a = m.prior.quantile(open_unit(rng))?;
            crm_trajectory(rng, &m.lam.scaled_on_unit(a)?, n, cfg)
        }
    }
}

fn crm_trajectory<R: rand::Rng + ?Sized>(rng: &mut R, lam: &LevyIntensity, n: usize, cfg: &EvalConfig) -> Result<Vec<usize>> {
    let mut z = FeatureAllocation::empty();
    let mut ks = Vec::with_capacity(n);
    for _ in 0..n {
        z = crm::sample_next(rng, lam, &z, cfg)?;
        ks.push(z.k());
    }
    Ok(ks)
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Empirical `E[K_j]` over `replicates` sequences against the analytic
/// curve. Every `|z|` must stay below the Bonferroni critical value for
/// `n` simultaneous checks.
pub fn growth_curve(
    model: &Model,
    n: usize,
    replicates: u64,
    seed: u64,
    exec: Execution,
    cfg: &EvalConfig,
) -> Result<VerificationReport> {
    if replicates < 100 {
        return Err(Error::domain(format!("growth curves need at least 100 replicates, got {replicates}")));
    }
    let analytic = analytic_curve(model, n, cfg)?;
    let runs = run_replicates(seed, replicates, exec, |_, rng| trajectory(rng, model, n, cfg))?;
    let reps = replicates as f64;
    let crit = z_critical(n);
    let mut cases = Vec::with_capacity(n);
    for j in 0..n {
        let mean = runs.iter().map(|r| r[j] as f64).sum::<f64>() / reps;
        let var = runs.iter().map(|r| (r[j] as f64 - mean).powi(2)).sum::<f64>() / (reps - 1.0);
        let se = (var / reps).sqrt();
        let z = z_score(mean - analytic[j], se);
        cases.push(
            Case::below(format!("K_{}", j + 1), "abs_z", z.abs(), crit)
                .with_params(json!({ "j": j + 1, "empirical": mean, "analytic": analytic[j], "se": se, "z": z })),
        );
    }
    Ok(VerificationReport::new(
        format!("growth/{}", model.kind()),
        json!({
            "model": model.to_json().ok(),
            "n": n,
            "replicates": replicates,
            "eval": cfg,
            "z_critical": crit,
            "analytic": analytic,
        }),
        Some(seed),
        cases,
    ))
}

/// Mixed-Poisson new-feature pmf of a scaled process from quadrature against
/// `draws` simulated next steps (scale from its posterior, then a Poisson
/// count). Bins with expected count below 5 are pooled into one tail bin.
pub fn mixed_poisson_check(
    model: &SpModel,
    stats: &SuffStats,
    draws: u64,
    seed: u64,
    exec: Execution,
    cfg: &EvalConfig,
) -> Result<VerificationReport> {
    if draws == 0 {
        return Err(Error::domain("need at least one draw"));
    }
    let post = sp::psi_posterior(model, stats, cfg)?;
    let marg = sp::marginal_from_posterior(model, stats, &post, None, cfg)?;
    let ys = run_replicates(seed, draws, exec, |_, rng| {
        let a = sp::sample_psi_from(rng, &post)?;
        let law = sp::conditional_predictive(model, stats, a, cfg)?;
        Ok(sample_poisson(rng, law.new_rate))
    })?;
    let total = draws as f64;
    let mut counts = vec![0u64; marg.new_pmf.len()];
    let mut beyond = 0u64;
    for &y in &ys {
        match counts.get_mut(y as usize) {
            Some(c) => *c += 1,
            None => beyond += 1,
        }
    }
    let mut bins: Vec<(String, f64, u64)> = Vec::new();
    let (mut pooled_p, mut pooled_count) = (marg.tail_mass, beyond);
    for (y, (&p, &count)) in marg.new_pmf.iter().zip(&counts).enumerate() {
        if p * total >= 5.0 {
            bins.push((format!("Y={y}"), p, count));
        } else {
            pooled_p += p;
            pooled_count += count;
        }
    }
    if pooled_p * total >= 5.0 {
        bins.push(("pooled".into(), pooled_p, pooled_count));
    }
    let crit = z_critical(bins.len());
    let cases = bins
        .into_iter()
        .map(|(label, p, count)| {
            let freq = count as f64 / total;
            let se = (p * (1.0 - p) / total).sqrt();
            let z = z_score(freq - p, se);
            Case::below(label, "abs_z", z.abs(), crit).with_params(json!({ "model_p": p, "empirical_p": freq, "se": se }))
        })
        .collect::<Vec<_>>();
    let mean_y = ys.iter().sum::<u64>() as f64 / total;
    Ok(VerificationReport::new(
        "mixed-poisson",
        json!({
            "model": model.to_json().ok(),
            "stats": stats,
            "draws": draws,
            "eval": cfg,
            "z_critical": crit,
            "mean_rate": marg.mean_rate,
            "empirical_mean": mean_y,
        }),
        Some(seed),
        cases,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_values() {
        assert_eq!(z_critical(1), 3.0);
        assert!((z_critical(2) - 3.205).abs() < 1e-2);
        assert!(z_critical(50) > 3.9 && z_critical(50) < 4.1);
    }

    #[test]
    fn small_growth_is_reproducible() {
        let m = Model::Crm(LevyIntensity::stable_beta(2.0, 1.0, 0.5).unwrap());
        let cfg = EvalConfig::default();
        let a = growth_curve(&m, 5, 200, 3, Execution::Parallel, &cfg).unwrap();
        let b = growth_curve(&m, 5, 200, 3, Execution::Sequential, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.passed, "{}", a.to_text());
        assert!(growth_curve(&m, 0, 100, 3, Execution::Parallel, &cfg).unwrap().cases.is_empty());
    }
}
