use serde::{Deserialize, Serialize};
use serde_json::json;

use super::dependence::stats_configs;
use super::report::{Case, Relation, VerificationReport};
use crate::alloc::SuffStats;
use crate::config::{EvalConfig, MomentRoute};
use crate::crm::{predictive, stable_beta_predictive};
use crate::levy::LevyIntensity;
use crate::sp::{posterior_grid, psi_posteriors_on, stable_psi_posteriors_on, PsiPrior, SpModel};

/// Relative tolerance between closed forms and the quadrature path.
pub const CLOSED_FORM_THRESHOLD: f64 = 1e-8;

/// Stable Beta predictive case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrmCase {
    pub alpha: f64,
    pub c: f64,
    pub sigma: f64,
    pub n: usize,
    pub m: Vec<usize>,
}

/// Stable scaled-process posterior case: every statistic with `k ≤ k_max`
/// at this `n`, under an exponential prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpCase {
    pub sigma: f64,
    pub n: usize,
    pub k_max: usize,
    pub prior_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormGrid {
    pub crm: Vec<CrmCase>,
    pub sp: Vec<SpCase>,
}

impl Default for ClosedFormGrid {
    /// 120 stable Beta cases and the stable scaled process at
    /// `σ ∈ {0.25, 0.5, 0.75}`, `n ∈ {1, 3, 10}`, `k ≤ 3`.
    fn default() -> Self {
        let mut crm = Vec::new();
        for alpha in [1.0, 2.0] {
            for c in [0.5, 1.0, 3.0] {
                for sigma in [0.1, 0.25, 0.5, 0.75, 0.9] {
                    for n in [1usize, 3, 10, 25] {
                        let mut m = vec![n, n.div_ceil(2), 1];
                        m.dedup();
                        crm.push(CrmCase { alpha, c, sigma, n, m });
                    }
                }
            }
        }
        let mut sp = Vec::new();
        for sigma in [0.25, 0.5, 0.75] {
            for n in [1, 3, 10] {
                sp.push(SpCase {
                    sigma,
                    n,
                    k_max: 3,
                    prior_rate: 1.0,
                });
            }
        }
        ClosedFormGrid { crm, sp }
    }
}

fn rel_err(x: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        x.abs()
    } else {
        ((x - reference) / reference).abs()
    }
}

fn crm_case(case: &CrmCase, cfg: &EvalConfig) -> Case {
    let label = format!("stable_beta(alpha={},c={},sigma={}) n={} m={:?}", case.alpha, case.c, case.sigma, case.n, case.m);
    let params = serde_json::to_value(case).unwrap_or_default();
    let run = || -> crate::Result<f64> {
        let stats = SuffStats::new(case.n, case.m.clone())?;
        let lam = LevyIntensity::stable_beta(case.alpha, case.c, case.sigma)?;
        let quad = predictive(&lam, &stats, cfg)?;
        let exact = stable_beta_predictive(case.alpha, case.c, case.sigma, &stats)?;
        let mut worst = rel_err(quad.new_rate, exact.new_rate);
        for (q, e) in quad.known_probs.iter().zip(&exact.known_probs) {
            worst = worst.max(rel_err(*q, *e));
        }
        Ok(worst)
    };
    match run() {
        Ok(v) => Case::below(label, "relative_error", v, CLOSED_FORM_THRESHOLD),
        Err(e) => Case::failed(label, "relative_error", CLOSED_FORM_THRESHOLD, Relation::Below, e),
    }
    .with_params(params)
}

fn sp_cases(case: &SpCase, cfg: &EvalConfig) -> Vec<Case> {
    let prefix = format!("stable_sp(sigma={}) n={}", case.sigma, case.n);
    let configs = stats_configs(case.n, case.k_max, None);
    let run = || -> crate::Result<Vec<f64>> {
        let model = SpModel::new(LevyIntensity::stable(1.0, case.sigma)?, PsiPrior::exponential(case.prior_rate)?);
        let grid = posterior_grid(&model, &configs, cfg)?;
        let generic = psi_posteriors_on(&model, &configs, &grid, cfg)?;
        let closed = stable_psi_posteriors_on(&model, &configs, &grid, cfg)?;
        Ok(generic
            .iter()
            .zip(&closed)
            .map(|(g, c)| {
                let (dg, dc) = (g.density(), c.density());
                let scale = dc.iter().cloned().fold(0.0, f64::max);
                dg.iter().zip(&dc).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
            })
            .collect())
    };
    match run() {
        Ok(dists) => dists
            .into_iter()
            .zip(&configs)
            .map(|(d, s)| {
                Case::below(format!("{prefix} m={:?}", s.m), "sup_distance", d, CLOSED_FORM_THRESHOLD)
                    .with_params(json!({ "sigma": case.sigma, "n": case.n, "m": s.m }))
            })
            .collect(),
        Err(e) => vec![Case::failed(prefix, "sup_distance", CLOSED_FORM_THRESHOLD, Relation::Below, e)],
    }
}

/// Closed forms against the quadrature path: stable Beta predictives and
/// stable scaled-process posteriors. Quadrature failures fail their case
/// only.
pub fn verify_closed_forms(grid: &ClosedFormGrid, cfg: &EvalConfig) -> VerificationReport {
    let qcfg = cfg.with_route(MomentRoute::QuadratureOnly);
    let mut cases: Vec<Case> = grid.crm.iter().map(|c| crm_case(c, &qcfg)).collect();
    for case in &grid.sp {
        cases.extend(sp_cases(case, &qcfg));
    }
    VerificationReport::new(
        "closed-forms",
        json!({ "grid": grid, "eval": qcfg, "threshold": CLOSED_FORM_THRESHOLD }),
        None,
        cases,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_passes() {
        let grid = ClosedFormGrid {
            crm: vec![CrmCase {
                alpha: 2.0,
                c: 1.0,
                sigma: 0.5,
                n: 10,
                m: vec![3, 10],
            }],
            sp: vec![SpCase {
                sigma: 0.5,
                n: 3,
                k_max: 2,
                prior_rate: 1.0,
            }],
        };
        let r = verify_closed_forms(&grid, &EvalConfig::default());
        assert!(r.passed, "{}", r.to_text());
        assert_eq!(ClosedFormGrid::default().crm.len(), 120);
    }
}
