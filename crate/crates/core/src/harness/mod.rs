//! Verification lab: closed-form equivalences, scale-posterior dependence
//! checks, exchangeability sweeps and Monte Carlo growth curves.

mod closed_forms;
mod dependence;
mod exchange;
mod growth;
mod report;

pub use closed_forms::{verify_closed_forms, ClosedFormGrid, CrmCase, SpCase, CLOSED_FORM_THRESHOLD};
pub use dependence::{
    classify, gamma_control_suite, prior_match_report, psi_dependence_report, stats_configs, sup_distance,
    thm41_suite, thm42_suite, Dependence, DISTINGUISHABLE, INDISTINGUISHABLE,
};
pub use exchange::{
    allocations_up_to, exchangeability_suite, permutations, restricted_growth_strings, EXCHANGE_THRESHOLD,
};
pub use growth::{analytic_curve, growth_curve, mixed_poisson_check, trajectory, z_critical};
pub use report::{Case, Relation, VerificationReport};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::alloc::SuffStats;
use crate::config::EvalConfig;
use crate::error::Result;
use crate::levy::LevyIntensity;
use crate::schema::Model;
use crate::sp::{PsiPrior, SpModel};
use crate::species::GibbsModel;

/// Generator for replicate `r`: the master seed keys the generator and the
/// replicate index selects the stream, so draws never depend on scheduling.
pub fn replicate_rng(master: u64, r: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(r);
    rng
}

/// How replicate loops are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Runs `f` for replicates `0..reps`, each with its own stream, and returns
/// the results in replicate order.
pub fn run_replicates<T, F>(master: u64, reps: u64, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha20Rng) -> Result<T> + Sync,
{
    let one = |r: u64| f(r, &mut replicate_rng(master, r));
    match exec {
        Execution::Sequential => (0..reps).map(one).collect(),
        Execution::Parallel => (0..reps).into_par_iter().map(one).collect(),
    }
}

/// The packaged verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    ClosedForms,
    Thm41,
    Thm42,
    Exchangeability,
    Growth,
    All,
}

impl Suite {
    pub fn parse(name: &str) -> Option<Suite> {
        Some(match name {
            "closed-forms" => Suite::ClosedForms,
            "thm41" => Suite::Thm41,
            "thm42" => Suite::Thm42,
            "exchangeability" => Suite::Exchangeability,
            "growth" => Suite::Growth,
            "all" => Suite::All,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::ClosedForms => "closed-forms",
            Suite::Thm41 => "thm41",
            Suite::Thm42 => "thm42",
            Suite::Exchangeability => "exchangeability",
            Suite::Growth => "growth",
            Suite::All => "all",
        }
    }
}

/// Stable Beta growth to `n = 50` over 10⁴ replicates, and the stable
/// scaled-process mixed-Poisson pmf against 10⁵ simulated next steps.
pub fn growth_suite(seed: u64, exec: Execution, cfg: &EvalConfig) -> Result<VerificationReport> {
    let crm_model = Model::Crm(LevyIntensity::stable_beta(2.0, 1.0, 0.5)?);
    let curve = growth_curve(&crm_model, 50, 10_000, seed, exec, cfg)?;
    let sp_model = SpModel::new(LevyIntensity::stable(1.0, 0.5)?, PsiPrior::exponential(1.0)?);
    let stats = SuffStats::new(5, vec![3, 1])?;
    let pmf = mixed_poisson_check(&sp_model, &stats, 100_000, seed, exec, cfg)?;
    Ok(VerificationReport::combine("growth", json!({ "eval": cfg }), Some(seed), vec![curve, pmf]))
}

/// Order invariance for the stable Beta CRM (`n ≤ 4`, `k ≤ 3`), the
/// Dirichlet species model (`n ≤ 5`) and the stable scaled process
/// (`n ≤ 3`, `k ≤ 2`).
pub fn exchangeability_bundle(cfg: &EvalConfig) -> Result<VerificationReport> {
    let parts = vec![
        exchangeability_suite(&Model::Crm(LevyIntensity::stable_beta(1.0, 1.0, 0.5)?), 4, 3, EXCHANGE_THRESHOLD, cfg),
        exchangeability_suite(&Model::Species(GibbsModel::dirichlet(1.0)?), 5, 0, 1e-12, cfg),
        exchangeability_suite(
            &Model::Sp(SpModel::new(LevyIntensity::stable(1.0, 0.5)?, PsiPrior::exponential(1.0)?)),
            3,
            2,
            1e-8,
            cfg,
        ),
    ];
    Ok(VerificationReport::combine("exchangeability", json!({ "eval": cfg }), None, parts))
}

/// Runs a packaged suite. Only the growth suite uses `seed`.
pub fn run_suite(suite: Suite, seed: u64, exec: Execution, cfg: &EvalConfig) -> Result<VerificationReport> {
    Ok(match suite {
        Suite::ClosedForms => verify_closed_forms(&ClosedFormGrid::default(), cfg),
        Suite::Thm41 => thm41_suite(cfg),
        Suite::Thm42 => thm42_suite(cfg),
        Suite::Exchangeability => exchangeability_bundle(cfg)?,
        Suite::Growth => growth_suite(seed, exec, cfg)?,
        Suite::All => {
            let parts = [Suite::ClosedForms, Suite::Thm41, Suite::Thm42, Suite::Exchangeability, Suite::Growth]
                .into_iter()
                .map(|s| run_suite(s, seed, exec, cfg))
                .collect::<Result<Vec<_>>>()?;
            VerificationReport::combine("all", json!({ "eval": cfg }), Some(seed), parts)
        }
    })
}
