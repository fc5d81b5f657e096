use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{Case, VerificationReport};
use crate::alloc::SuffStats;
use crate::config::{EvalConfig, MomentRoute};
use crate::error::{Error, Result};
use crate::levy::LevyIntensity;
use crate::numerics::TabulatedDensity;
use crate::sp::{posterior_grid, psi_posteriors_on, PsiPrior, SpModel};

/// Sup distances at or below this count as equal posteriors.
pub const INDISTINGUISHABLE: f64 = 1e-8;

/// Sup distances at or above this count as different posteriors.
pub const DISTINGUISHABLE: f64 = 1e-6;

/// Which sample statistics the scale posterior responds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    /// `n` only.
    NOnly,
    /// `n` and the number of features.
    NAndK,
    /// The frequencies themselves.
    Frequencies,
}

/// `sup |f − g| / max(sup f, sup g)` over a shared grid.
pub fn sup_distance(f: &TabulatedDensity, g: &TabulatedDensity) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::domain("densities must share a grid"));
    }
    let (df, dg) = (f.density(), g.density());
    let scale = df.iter().chain(&dg).cloned().fold(0.0, f64::max);
    Ok(df.iter().zip(&dg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale)
}

/// Every statistic with `k ≤ k_max` features whose frequencies come from
/// `values` (default `1..=n`), frequencies listed in non-increasing order.
pub fn stats_configs(n: usize, k_max: usize, values: Option<&[usize]>) -> Vec<SuffStats> {
    let mut vals: Vec<usize> = match values {
        Some(v) => v.iter().cloned().filter(|&m| (1..=n).contains(&m)).collect(),
        None => (1..=n).collect(),
    };
    vals.sort_unstable_by(|a, b| b.cmp(a));
    vals.dedup();
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn rec(vals: &[usize], start: usize, k_max: usize, n: usize, stack: &mut Vec<usize>, out: &mut Vec<SuffStats>) {
        out.push(SuffStats::new(n, stack.clone()).expect("frequencies lie in 1..=n"));
        if stack.len() == k_max {
            return;
        }
        for i in start..vals.len() {
            stack.push(vals[i]);
            rec(vals, i, k_max, n, stack, out);
            stack.pop();
        }
    }
    if n == 0 {
        return vec![SuffStats::new(0, Vec::new()).expect("empty statistics")];
    }
    rec(&vals, 0, k_max, n, &mut stack, &mut out);
    out
}

fn same_under(dep: Dependence, a: &SuffStats, b: &SuffStats) -> bool {
    match dep {
        Dependence::NOnly => true,
        Dependence::NAndK => a.k() == b.k(),
        Dependence::Frequencies => a.sorted_m() == b.sorted_m(),
    }
}

/// Coarsest dependence consistent with the pairwise verdicts, or `None` when
/// some distance falls between the two thresholds.
pub fn classify(configs: &[SuffStats], distances: &[(usize, usize, f64)]) -> Option<Dependence> {
    if distances.iter().any(|&(_, _, d)| d > INDISTINGUISHABLE && d < DISTINGUISHABLE) {
        return None;
    }
    let differs = |dep: Dependence| {
        distances
            .iter()
            .any(|&(i, j, d)| same_under(dep, &configs[i], &configs[j]) && d >= DISTINGUISHABLE)
    };
    Some(if !differs(Dependence::NOnly) {
        Dependence::NOnly
    } else if !differs(Dependence::NAndK) {
        Dependence::NAndK
    } else {
        Dependence::Frequencies
    })
}

fn stats_label(s: &SuffStats) -> String {
    format!("n={},k={},m={:?}", s.n, s.k(), s.m)
}

fn generic_cfg(cfg: &EvalConfig) -> EvalConfig {
    cfg.with_route(MomentRoute::QuadratureOnly)
}

/// Pairwise sup distances between the scale posteriors of `configs`, which
/// must share `n`. Every pair must be clearly equal or clearly different;
/// with `expected` set, pairs must also fall on the side it predicts.
pub fn psi_dependence_report(
    name: &str,
    model: &SpModel,
    configs: &[SuffStats],
    expected: Option<Dependence>,
    cfg: &EvalConfig,
) -> VerificationReport {
    let gcfg = generic_cfg(cfg);
    let mut config = json!({
        "model": model.to_json().unwrap_or(serde_json::Value::Null),
        "configs": configs,
        "eval": gcfg,
        "expected": expected,
    });
    let posts = posterior_grid(model, configs, &gcfg).and_then(|grid| psi_posteriors_on(model, configs, &grid, &gcfg));
    let posts = match posts {
        Ok(p) => p,
        Err(e) => {
            let case = Case::failed("posteriors", "sup_distance", INDISTINGUISHABLE, super::Relation::Below, e);
            return VerificationReport::new(name, config, None, vec![case]);
        }
    };
    let mut distances = Vec::new();
    let mut cases = Vec::new();
    for i in 0..configs.len() {
        for j in i + 1..configs.len() {
            let d = sup_distance(&posts[i], &posts[j]).expect("shared grid");
            distances.push((i, j, d));
            let label = format!("{} vs {}", stats_label(&configs[i]), stats_label(&configs[j]));
            let want_same = expected.map(|dep| same_under(dep, &configs[i], &configs[j]));
            let same = match want_same {
                Some(s) => s,
                None => d <= INDISTINGUISHABLE,
            };
            let case = if same {
                Case::below(label, "sup_distance", d, INDISTINGUISHABLE)
            } else {
                Case::above(label, "sup_distance", d, DISTINGUISHABLE)
            };
            cases.push(case);
        }
    }
    let class = classify(configs, &distances);
    config["classification"] = json!(class);
    let verdict = Case {
        label: "classification".into(),
        params: json!({ "found": class, "expected": expected }),
        metric: "consistent".into(),
        value: Some(if class.is_some() && (expected.is_none() || class == expected) { 1.0 } else { 0.0 }),
        threshold: 0.5,
        relation: super::Relation::Above,
        passed: class.is_some() && (expected.is_none() || class == expected),
        detail: None,
    };
    cases.push(verdict);
    VerificationReport::new(name, config, None, cases)
}

/// Sup distance between each posterior and the prior density on the same grid.
pub fn prior_match_report(name: &str, model: &SpModel, configs: &[SuffStats], cfg: &EvalConfig) -> VerificationReport {
    let gcfg = generic_cfg(cfg);
    let config = json!({
        "model": model.to_json().unwrap_or(serde_json::Value::Null),
        "configs": configs,
        "eval": gcfg,
    });
    let posts = posterior_grid(model, configs, &gcfg).and_then(|grid| psi_posteriors_on(model, configs, &grid, &gcfg));
    let cases = match posts {
        Ok(posts) => posts
            .iter()
            .zip(configs)
            .map(|(p, s)| {
                let prior: Vec<f64> = p.grid.iter().map(|&a| model.prior.log_density(a).exp()).collect();
                let dens = p.density();
                let scale = prior.iter().cloned().fold(0.0, f64::max);
                let d = dens.iter().zip(&prior).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
                Case::below(stats_label(s), "sup_distance_to_prior", d, INDISTINGUISHABLE)
            })
            .collect(),
        Err(e) => vec![Case::failed("posteriors", "sup_distance_to_prior", INDISTINGUISHABLE, super::Relation::Below, e)],
    };
    VerificationReport::new(name, config, None, cases)
}

/// Frequencies used by the dependence suites: `1`, `⌈n/2⌉` and `n`.
fn suite_configs(n: usize) -> Vec<SuffStats> {
    stats_configs(n, 3, Some(&[1, n.div_ceil(2), n]))
}

/// Intensity `C/s` on `(0, r)` with a uniform `(0, r)` prior: the posterior
/// must equal the prior for every statistic.
pub fn thm41_suite(cfg: &EvalConfig) -> VerificationReport {
    let model = SpModel::new(
        LevyIntensity::log(1.0, 2.0).expect("valid intensity"),
        PsiPrior::uniform(2.0).expect("valid prior"),
    );
    let mut parts = Vec::new();
    for n in [2, 4, 6] {
        let configs = suite_configs(n);
        parts.push(prior_match_report(&format!("prior-match/n={n}"), &model, &configs, cfg));
        parts.push(psi_dependence_report(&format!("dependence/n={n}"), &model, &configs, Some(Dependence::NOnly), cfg));
    }
    VerificationReport::combine("thm41", json!({ "levy": "log(C=1,r=2)", "prior": "uniform(0,2)" }), None, parts)
}

/// Stable intensities with an exponential prior: posteriors depend on `n`
/// and `k` only.
pub fn thm42_suite(cfg: &EvalConfig) -> VerificationReport {
    let mut parts = Vec::new();
    for sigma in [0.25, 0.5, 0.75] {
        let model = SpModel::new(
            LevyIntensity::stable(1.0, sigma).expect("valid intensity"),
            PsiPrior::exponential(1.0).expect("valid prior"),
        );
        for n in [2, 4, 6] {
            parts.push(psi_dependence_report(
                &format!("stable(sigma={sigma})/n={n}"),
                &model,
                &suite_configs(n),
                Some(Dependence::NAndK),
                cfg,
            ));
        }
    }
    parts.push(gamma_control_suite(cfg));
    VerificationReport::combine("thm42", json!({ "levy": "stable(C=1)", "prior": "exponential(1)" }), None, parts)
}

/// Negative control: the gamma intensity's posterior sees the frequencies.
pub fn gamma_control_suite(cfg: &EvalConfig) -> VerificationReport {
    let model = SpModel::new(
        LevyIntensity::gamma(1.0).expect("valid intensity"),
        PsiPrior::exponential(1.0).expect("valid prior"),
    );
    let configs: Vec<SuffStats> = [vec![3], vec![5], vec![3, 1], vec![2, 2], vec![6, 1]]
        .into_iter()
        .map(|m| SuffStats::new(6, m).expect("valid statistics"))
        .collect();
    psi_dependence_report("gamma-control/n=6", &model, &configs, Some(Dependence::Frequencies), cfg)
}
