use serde_json::json;

use super::report::{Case, Relation, VerificationReport};
use crate::alloc::FeatureAllocation;
use crate::config::EvalConfig;
use crate::error::Result;
use crate::schema::Model;
use crate::species::eppf_log_prob;
use crate::{crm, sp};

/// Largest tolerated change of a log probability under reordering.
pub const EXCHANGE_THRESHOLD: f64 = 1e-9;

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("a larger element exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// Label sequences of length `n` in first-appearance form.
pub fn restricted_growth_strings(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(n: usize, cur: &mut Vec<usize>, next: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for l in 0..=next {
            cur.push(l);
            rec(n, cur, if l == next { next + 1 } else { next }, out);
            cur.pop();
        }
    }
    rec(n, &mut Vec::new(), 0, &mut out);
    out
}

/// Every allocation of exactly `n` customers with at most `k_max` features,
/// one per multiset of non-empty holder sets.
pub fn allocations_up_to(n: usize, k_max: usize) -> Vec<FeatureAllocation> {
    let masks: Vec<u32> = (1..(1u32 << n)).collect();
    let mut out = Vec::new();
    fn rec(n: usize, masks: &[u32], start: usize, k_max: usize, cur: &mut Vec<u32>, out: &mut Vec<FeatureAllocation>) {
        let cols = cur
            .iter()
            .map(|&m| (0..n).filter(|j| m >> j & 1 == 1).collect())
            .collect();
        out.push(FeatureAllocation::from_columns(n, cols).expect("masks are non-empty"));
        if cur.len() == k_max {
            return;
        }
        for i in start..masks.len() {
            cur.push(masks[i]);
            rec(n, masks, i, k_max, cur, out);
            cur.pop();
        }
    }
    rec(n, &masks, 0, k_max, &mut Vec::new(), &mut out);
    out
}

fn log_prob(model: &Model, z: &FeatureAllocation, cfg: &EvalConfig) -> Result<f64> {
    match model {
        Model::Crm(lam) => crm::allocation_log_prob(lam, z, cfg),
        Model::Sp(m) => sp::allocation_log_prob(m, z, cfg),
        Model::Species(_) => unreachable!("species models use label sequences"),
    }
}

/// Largest change of the log probability over all reorderings of every
/// sample with `1 ≤ n ≤ n_max` (and at most `k_max` features for feature
/// models). One case per `n`.
pub fn exchangeability_suite(
    model: &Model,
    n_max: usize,
    k_max: usize,
    threshold: f64,
    cfg: &EvalConfig,
) -> VerificationReport {
    let (kind, model_json) = (model.kind(), model.to_json().ok());
    let mut cases = Vec::new();
    for n in 1..=n_max {
        let perms = permutations(n);
        let run = || -> Result<(f64, usize)> {
            let mut worst = 0.0f64;
            let mut count = 0;
            if let Model::Species(g) = model {
                for seq in restricted_growth_strings(n) {
                    let base = eppf_log_prob(g, &seq)?;
                    for p in &perms[1..] {
                        let moved: Vec<usize> = p.iter().map(|&i| seq[i]).collect();
                        worst = worst.max((eppf_log_prob(g, &moved)? - base).abs());
                    }
                    count += 1;
                }
            } else {
                for z in allocations_up_to(n, k_max) {
                    let base = log_prob(model, &z, cfg)?;
                    for p in &perms[1..] {
                        let moved = z.permute_customers(p)?;
                        worst = worst.max((log_prob(model, &moved, cfg)? - base).abs());
                    }
                    count += 1;
                }
            }
            Ok((worst, count))
        };
        let label = format!("n={n}");
        cases.push(match run() {
            Ok((worst, count)) => Case::below(label, "max_log_prob_change", worst, threshold)
                .with_params(json!({ "n": n, "samples": count, "permutations": perms.len() })),
            Err(e) => Case::failed(label, "max_log_prob_change", threshold, Relation::Below, e),
        });
    }
    VerificationReport::new(
        format!("exchangeability/{kind}"),
        json!({ "kind": kind, "model": model_json, "n_max": n_max, "k_max": k_max, "eval": cfg }),
        None,
        cases,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyIntensity;
    use crate::species::GibbsModel;

    #[test]
    fn enumerations() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
        // Bell numbers
        assert_eq!(restricted_growth_strings(5).len(), 52);
        // multisets of size ≤ 2 from 3 masks: 1 + 3 + 6
        assert_eq!(allocations_up_to(2, 2).len(), 10);
    }

    #[test]
    fn species_and_crm_small() {
        let g = Model::Species(GibbsModel::pitman_yor(0.5, 1.0).unwrap());
        let r = exchangeability_suite(&g, 4, 0, 1e-12, &EvalConfig::default());
        assert!(r.passed, "{}", r.to_text());
        let c = Model::Crm(LevyIntensity::stable_beta(1.0, 1.0, 0.5).unwrap());
        let r = exchangeability_suite(&c, 3, 2, EXCHANGE_THRESHOLD, &EvalConfig::default());
        assert!(r.passed, "{}", r.to_text());
    }
}
