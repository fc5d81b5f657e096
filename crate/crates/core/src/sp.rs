//! Scaled-process feature models.
//!
//! Given the latent scale `Ψ₁ = a`, a scaled process behaves like a CRM with
//! intensity `λ_a(s) = a λ(a s)` on `(0, 1)`. After `n` customers with
//! frequencies `m_1..m_k` the posterior of `Ψ₁` is
//!
//! ```text
//! f(a | Z) ∝ exp(−Σ_{i=1}^n φ_i(a)) · Π_i ∫₀¹ s^{m_i}(1−s)^{n−m_i} a λ(a s) ds · f_Ψ(a),
//! φ_i(a) = ∫₀¹ s (1−s)^{i−1} a λ(a s) ds,
//! ```
//!
//! and predictives are CRM predictives at scale `a` mixed over this posterior.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::alloc::{FeatureAllocation, SuffStats};
use crate::config::EvalConfig;
use crate::crm::{self, PredictiveLaw};
use crate::error::{Error, Result};
use crate::levy::{LevyIntensity, LevyKind};
use crate::numerics::special::log_beta;
use crate::numerics::tabulated::uniform_xi;
use crate::numerics::{
    integrate_halfline_vec, integrate_interval_vec, open_unit, poisson_log_pmf, GridMap, QuadratureSpec,
    TabulatedDensity, Tolerance,
};

/// Pilot points used to locate the posterior mass before tabulating.
const PILOT_POINTS: usize = 201;

/// The grid keeps every region where the log density is within this much of
/// its maximum (e^-46 ≈ 1e-20).
const KEEP_LOG_DROP: f64 = 46.0;

/// Likelihoods are not evaluated where the prior alone is this far below its
/// own maximum.
const PRIOR_LOG_DROP: f64 = 150.0;

/// A density on `(lower, upper)` given by its logarithm.
#[derive(Clone)]
pub struct CustomPrior {
    pub log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lower: f64,
    pub upper: f64,
    /// `f(a) ~ a^e` as `a → 0` when `lower = 0`.
    pub exponent_at_0: f64,
}

impl fmt::Debug for CustomPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPrior")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("exponent_at_0", &self.exponent_at_0)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
enum PriorKind {
    Uniform { r: f64 },
    Exponential { rate: f64 },
    Custom { spec: CustomPrior, table: Arc<TabulatedDensity>, log_max: f64 },
}

/// Prior density of the latent scale `Ψ₁`.
#[derive(Debug, Clone)]
pub struct PsiPrior {
    kind: PriorKind,
}

/// Serializable catalog prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Uniform { r: f64 },
    Exponential { rate: f64 },
}

impl PsiPrior {
    /// Uniform on `(0, r)`.
    pub fn uniform(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("uniform prior needs r > 0, got {r}")));
        }
        Ok(PsiPrior { kind: PriorKind::Uniform { r } })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!("exponential prior needs rate > 0, got {rate}")));
        }
        Ok(PsiPrior {
            kind: PriorKind::Exponential { rate },
        })
    }

    /// A user density; it must integrate to 1 within 1e-8. Supports with
    /// `lower > 0` must be bounded.
    pub fn custom(spec: CustomPrior) -> Result<Self> {
        let (lo, hi) = (spec.lower, spec.upper);
        if !(lo >= 0.0 && hi > lo) || (lo > 0.0 && !hi.is_finite()) {
            return Err(Error::domain(format!(
                "custom prior support ({lo}, {hi}) must be (0, b], (0, ∞) or a bounded interval"
            )));
        }
        if !(spec.exponent_at_0 > -1.0) {
            return Err(Error::domain("custom prior must be integrable at 0"));
        }
        let probe = PsiPrior {
            kind: PriorKind::Custom {
                spec: spec.clone(),
                table: Arc::new(TabulatedDensity::from_log_fn(GridMap::Log, -1.0, 1.0, 3, |_| 0.0)?),
                log_max: 0.0,
            },
        };
        let map = probe.grid_map();
        let (xlo, xhi) = probe.pilot_range(map);
        let pilot = uniform_xi(xlo, xhi, PILOT_POINTS);
        let log_max = pilot
            .iter()
            .map(|&x| (spec.log_density)(map.to_support(x)))
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        if !log_max.is_finite() {
            return Err(Error::domain("custom prior density is not positive anywhere on its support"));
        }
        let tol = Tolerance::default();
        let mass = probe.integrate(1, &tol, |a, out| {
            out[0] = ((spec.log_density)(a) - log_max).exp();
            Ok(())
        })?[0]
            * log_max.exp();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::domain(format!("custom prior integrates to {mass}, not 1")));
        }
        let ld = spec.log_density.clone();
        let (gx_lo, gx_hi) = probe.grid_range(map, &pilot, &[pilot
            .iter()
            .map(|&x| ld(map.to_support(x)) + map.log_jacobian(x))
            .collect()]);
        let table = TabulatedDensity::from_log_fn(map, gx_lo, gx_hi, crate::numerics::tabulated::DEFAULT_NODES, |a| ld(a))?;
        Ok(PsiPrior {
            kind: PriorKind::Custom {
                spec,
                table: Arc::new(table),
                log_max,
            },
        })
    }

    pub fn spec(&self) -> Option<PriorSpec> {
        match self.kind {
            PriorKind::Uniform { r } => Some(PriorSpec::Uniform { r }),
            PriorKind::Exponential { rate } => Some(PriorSpec::Exponential { rate }),
            PriorKind::Custom { .. } => None,
        }
    }

    /// `(lower, upper)` of the support.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            PriorKind::Uniform { r } => (0.0, *r),
            PriorKind::Exponential { .. } => (0.0, f64::INFINITY),
            PriorKind::Custom { spec, .. } => (spec.lower, spec.upper),
        }
    }

    fn exponent_at_0(&self) -> f64 {
        match &self.kind {
            PriorKind::Custom { spec, .. } if spec.lower == 0.0 => spec.exponent_at_0,
            _ => 0.0,
        }
    }

    fn log_max(&self) -> f64 {
        match &self.kind {
            PriorKind::Uniform { r } => -r.ln(),
            PriorKind::Exponential { rate } => rate.ln(),
            PriorKind::Custom { log_max, .. } => *log_max,
        }
    }

    /// `ln f_Ψ(a)`; `−∞` outside the support.
    pub fn log_density(&self, a: f64) -> f64 {
        let (lo, hi) = self.support();
        // closed at a positive lower end so linear grids can use their endpoints
        if !(a >= lo && a <= hi) || a <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            PriorKind::Uniform { r } => -r.ln(),
            PriorKind::Exponential { rate } => rate.ln() - rate * a,
            PriorKind::Custom { spec, .. } => (spec.log_density)(a),
        }
    }

    /// Inverse-CDF draw from the prior.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("uniform variate must lie in (0, 1), got {u}")));
        }
        match &self.kind {
            PriorKind::Uniform { r } => Ok(r * u),
            PriorKind::Exponential { rate } => Ok(-(-u).ln_1p() / rate),
            PriorKind::Custom { table, .. } => table.quantile(u),
        }
    }

    fn grid_map(&self) -> GridMap {
        let (lo, hi) = self.support();
        if !hi.is_finite() {
            GridMap::Log
        } else if lo == 0.0 {
            GridMap::Logit { lo, hi }
        } else {
            GridMap::Linear { lo, hi }
        }
    }

    /// Range of grid coordinates scanned by the pilot.
    fn pilot_range(&self, map: GridMap) -> (f64, f64) {
        match map {
            GridMap::Log => (-50.0, 50.0),
            // beyond ξ ≈ 30 the abscissae near the upper end stop being distinct
            GridMap::Logit { .. } => (-60.0, 30.0),
            GridMap::Linear { .. } => (0.0, 1.0),
        }
    }

    /// Smallest pilot interval holding every component's mass; `log_g[c][j]`
    /// is the log density in `ξ` of component `c` at pilot point `j`.
    fn grid_range(&self, map: GridMap, pilot: &[f64], log_g: &[Vec<f64>]) -> (f64, f64) {
        if let GridMap::Linear { .. } = map {
            return (0.0, 1.0);
        }
        let step = pilot[1] - pilot[0];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for comp in log_g {
            let max = comp.iter().cloned().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
            for (j, &v) in comp.iter().enumerate() {
                if v >= max - KEEP_LOG_DROP {
                    lo = lo.min(pilot[j] - step);
                    hi = hi.max(pilot[j] + step);
                }
            }
        }
        let (plo, phi) = (pilot[0], pilot[pilot.len() - 1]);
        (lo.max(plo), hi.min(phi))
    }

    /// `∫ f(a) da` over the support for a vector-valued `f`, with `f`
    /// skipped where the prior is negligible.
    pub(crate) fn integrate<F>(&self, dim: usize, tol: &Tolerance, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &mut [f64]) -> Result<()>,
    {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let prior_max = self.log_max();
        let mut eval = |a: f64, out: &mut [f64]| {
            let lp = self.log_density(a);
            if lp == f64::NEG_INFINITY || lp - prior_max < -800.0 || failure.borrow().is_some() {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            if let Err(e) = f(a, out) {
                *failure.borrow_mut() = Some(e);
                out.iter_mut().for_each(|o| *o = 0.0);
            }
        };
        let (lo, hi) = self.support();
        let spec = QuadratureSpec::new(*tol).with_exponents(self.exponent_at_0().min(0.0), 0.0);
        let result = if hi.is_finite() {
            let w = hi - lo;
            integrate_interval_vec(0.0, 1.0, dim, &spec, |t, tc, out| {
                // evaluate at the nearer end's accurate form
                let a = if t < 0.5 { lo + w * t } else { hi - w * tc };
                eval(a, out);
                out.iter_mut().for_each(|o| *o *= w);
            })
            .map(|e| e.values)
        } else {
            integrate_halfline_vec(dim, &spec, |a, out| eval(a, out)).map(|e| e.values)
        };
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        result
    }

    pub fn to_json(&self) -> Result<Value> {
        let spec = self
            .spec()
            .ok_or_else(|| Error::UnsupportedIntensity("custom priors cannot be serialized".into()))?;
        Ok(serde_json::to_value(spec)?)
    }
}

impl PriorSpec {
    pub fn build(&self) -> Result<PsiPrior> {
        match *self {
            PriorSpec::Uniform { r } => PsiPrior::uniform(r),
            PriorSpec::Exponential { rate } => PsiPrior::exponential(rate),
        }
    }
}

/// A scaled-process prior: base intensity plus the law of the scale.
#[derive(Debug, Clone)]
pub struct SpModel {
    pub lam: LevyIntensity,
    pub prior: PsiPrior,
}

impl SpModel {
    pub fn new(lam: LevyIntensity, prior: PsiPrior) -> Self {
        SpModel { lam, prior }
    }

    pub fn to_json(&self) -> Result<Value> {
        Ok(serde_json::json!({ "levy": self.lam.to_json()?, "prior": self.prior.to_json()? }))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::parse("scaled-process model must be a JSON object"))?;
        if let Some(extra) = obj.keys().find(|k| *k != "levy" && *k != "prior") {
            return Err(Error::parse(format!("unknown field \"{extra}\" in scaled-process model")));
        }
        let lam = LevyIntensity::from_json(obj.get("levy").ok_or_else(|| Error::parse("missing \"levy\""))?)?;
        let prior: PriorSpec =
            serde_json::from_value(obj.get("prior").cloned().ok_or_else(|| Error::parse("missing \"prior\""))?)?;
        Ok(SpModel::new(lam, prior.build()?))
    }
}

/// `φ_i(a) = ∫₀¹ s(1−s)^{i−1} a λ(a s) ds`.
pub fn phi(lam: &LevyIntensity, i: usize, a: f64, cfg: &EvalConfig) -> Result<f64> {
    if i == 0 {
        return Err(Error::domain("φ_i is defined for i ≥ 1"));
    }
    lam.scaled_moment(1.0, (i - 1) as f64, a, cfg)
}

/// Log-likelihoods of several statistics sharing `n`, from one batch of
/// scaled moments per scale.
struct Likelihood<'a> {
    lam: &'a LevyIntensity,
    stats: &'a [SuffStats],
    n: usize,
    pairs: Vec<(f64, f64)>,
    /// position of `(m, n−m)` in `pairs`
    slot: BTreeMap<usize, usize>,
    cfg: EvalConfig,
}

impl<'a> Likelihood<'a> {
    fn new(lam: &'a LevyIntensity, stats: &'a [SuffStats], cfg: &EvalConfig) -> Result<Self> {
        let n = shared_n(stats)?;
        let mut pairs: Vec<(f64, f64)> = (1..=n).map(|i| (1.0, (i - 1) as f64)).collect();
        let mut slot = BTreeMap::new();
        for s in stats {
            for &m in &s.m {
                slot.entry(m).or_insert_with(|| {
                    pairs.push((m as f64, (n - m) as f64));
                    pairs.len() - 1
                });
            }
        }
        Ok(Likelihood {
            lam,
            stats,
            n,
            pairs,
            slot,
            cfg: *cfg,
        })
    }

    fn eval(&self, a: f64, out: &mut [f64]) -> Result<()> {
        let v = self.lam.scaled_moments(&self.pairs, a, &self.cfg)?;
        let phi_sum: f64 = v[..self.n].iter().sum();
        for (o, s) in out.iter_mut().zip(self.stats) {
            *o = -phi_sum + s.m.iter().map(|m| v[self.slot[m]].ln()).sum::<f64>();
        }
        Ok(())
    }
}

fn shared_n(stats: &[SuffStats]) -> Result<usize> {
    let n = stats.first().ok_or_else(|| Error::domain("no statistics given"))?.n;
    if n == 0 {
        return Err(Error::domain("the scale posterior needs n ≥ 1"));
    }
    if stats.iter().any(|s| s.n != n) {
        return Err(Error::domain("all statistics in a batch must share n"));
    }
    Ok(n)
}

/// Grid on which posteriors are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiGrid {
    pub map: GridMap,
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub nodes: usize,
}

impl PsiGrid {
    pub fn xi(&self) -> Vec<f64> {
        uniform_xi(self.xi_lo, self.xi_hi, self.nodes)
    }

    pub fn abscissae(&self) -> Vec<f64> {
        self.xi().into_iter().map(|x| self.map.to_support(x)).collect()
    }
}

/// Locates the joint mass of several log densities `ln f_Ψ + loglik_c`.
fn choose_grid<F>(prior: &PsiPrior, dim: usize, nodes: usize, loglik: &mut F) -> Result<PsiGrid>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let map = prior.grid_map();
    let (lo, hi) = prior.pilot_range(map);
    if let GridMap::Linear { .. } = map {
        return Ok(PsiGrid { map, xi_lo: lo, xi_hi: hi, nodes });
    }
    let pilot = uniform_xi(lo, hi, PILOT_POINTS);
    let prior_g: Vec<f64> = pilot
        .iter()
        .map(|&x| prior.log_density(map.to_support(x)) + map.log_jacobian(x))
        .collect();
    let prior_max = prior_g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut log_g = vec![vec![f64::NEG_INFINITY; pilot.len()]; dim];
    let mut buf = vec![0.0; dim];
    for (j, &x) in pilot.iter().enumerate() {
        if !(prior_g[j] >= prior_max - PRIOR_LOG_DROP) {
            continue;
        }
        loglik(map.to_support(x), &mut buf)?;
        for c in 0..dim {
            log_g[c][j] = prior_g[j] + buf[c];
        }
    }
    if log_g.iter().any(|c| c.iter().all(|v| !v.is_finite())) {
        return Err(Error::DegeneratePosterior(
            "the likelihood vanishes wherever the prior has mass".into(),
        ));
    }
    let (xi_lo, xi_hi) = prior.grid_range(map, &pilot, &log_g);
    Ok(PsiGrid { map, xi_lo, xi_hi, nodes })
}

/// Tabulates normalized posteriors `∝ f_Ψ(a)·exp(loglik_c(a))` on `grid`.
fn tabulate<F>(prior: &PsiPrior, grid: &PsiGrid, dim: usize, tol: &Tolerance, mut loglik: F) -> Result<Vec<TabulatedDensity>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let xi = grid.xi();
    let mut logf = vec![Vec::with_capacity(xi.len()); dim];
    let mut buf = vec![0.0; dim];
    for &x in &xi {
        let a = grid.map.to_support(x);
        let lp = prior.log_density(a);
        if lp == f64::NEG_INFINITY {
            logf.iter_mut().for_each(|c| c.push(f64::NEG_INFINITY));
            continue;
        }
        loglik(a, &mut buf)?;
        for c in 0..dim {
            logf[c].push(lp + buf[c]);
        }
    }
    let refs: Vec<f64> = logf
        .iter()
        .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    if refs.iter().any(|r| !r.is_finite()) {
        return Err(Error::DegeneratePosterior("posterior vanishes on the whole grid".into()));
    }
    let mut inner = vec![0.0; dim];
    let z = prior.integrate(dim, tol, |a, out| {
        loglik(a, &mut inner)?;
        let lp = prior.log_density(a);
        for c in 0..dim {
            out[c] = (lp + inner[c] - refs[c]).exp();
        }
        Ok(())
    })?;
    logf.into_iter()
        .zip(z)
        .zip(&refs)
        .map(|((lf, zc), r)| {
            if !(zc > 0.0 && zc.is_finite()) {
                return Err(Error::DegeneratePosterior(format!("posterior normalizer is {zc}")));
            }
            let shifted = lf.iter().map(|v| v - r).collect();
            TabulatedDensity::from_log_values(grid.map, xi.clone(), shifted, zc.ln())
        })
        .collect()
}

/// Grid covering the posteriors of every statistic in `stats`.
pub fn posterior_grid(model: &SpModel, stats: &[SuffStats], cfg: &EvalConfig) -> Result<PsiGrid> {
    cfg.validate()?;
    let lik = Likelihood::new(&model.lam, stats, cfg)?;
    choose_grid(&model.prior, stats.len(), cfg.grid_nodes, &mut |a, out| lik.eval(a, out))
}

/// Posteriors of `Ψ₁` for several statistics sharing `n`, tabulated on `grid`.
pub fn psi_posteriors_on(model: &SpModel, stats: &[SuffStats], grid: &PsiGrid, cfg: &EvalConfig) -> Result<Vec<TabulatedDensity>> {
    cfg.validate()?;
    let lik = Likelihood::new(&model.lam, stats, cfg)?;
    tabulate(&model.prior, grid, stats.len(), &cfg.tol, |a, out| lik.eval(a, out))
}

/// Posteriors for several statistics sharing `n` on one common grid.
pub fn psi_posteriors(model: &SpModel, stats: &[SuffStats], cfg: &EvalConfig) -> Result<Vec<TabulatedDensity>> {
    let grid = posterior_grid(model, stats, cfg)?;
    psi_posteriors_on(model, stats, &grid, cfg)
}

/// Posterior density of `Ψ₁` given the sample statistics.
pub fn psi_posterior(model: &SpModel, stats: &SuffStats, cfg: &EvalConfig) -> Result<TabulatedDensity> {
    Ok(psi_posteriors(model, std::slice::from_ref(stats), cfg)?.remove(0))
}

/// Closed-form log-likelihood of the stable scaled process,
/// `−kσ ln a − Cσ a^{−σ} Σ_{i=1}^n B(1−σ, i)`, up to an `a`-free constant.
pub fn stable_log_likelihood(c: f64, sigma: f64, stats: &SuffStats, a: f64) -> Result<f64> {
    let beta_sum: f64 = (1..=stats.n)
        .map(|i| log_beta(1.0 - sigma, i as f64).map(f64::exp))
        .sum::<Result<f64>>()?;
    Ok(-(stats.k() as f64) * sigma * a.ln() - c * sigma * a.powf(-sigma) * beta_sum)
}

/// Posteriors from the stable closed form, tabulated on `grid`.
pub fn stable_psi_posteriors_on(
    model: &SpModel,
    stats: &[SuffStats],
    grid: &PsiGrid,
    cfg: &EvalConfig,
) -> Result<Vec<TabulatedDensity>> {
    let (c, sigma) = match *model.lam.kind() {
        LevyKind::Stable { c, sigma } if model.lam.upper().is_infinite() => (c, sigma),
        _ => {
            return Err(Error::UnsupportedIntensity(format!(
                "the closed-form posterior needs an unrestricted stable intensity, got {}",
                model.lam.kind_name()
            )))
        }
    };
    shared_n(stats)?;
    tabulate(&model.prior, grid, stats.len(), &cfg.tol, |a, out| {
        for (o, s) in out.iter_mut().zip(stats) {
            *o = stable_log_likelihood(c, sigma, s, a)?;
        }
        Ok(())
    })
}

/// CRM predictive at scale `a`, i.e. under `λ_a(s) = a λ(a s)` on `(0, 1)`.
pub fn conditional_predictive(model: &SpModel, stats: &SuffStats, a: f64, cfg: &EvalConfig) -> Result<PredictiveLaw> {
    let lam_a = model.lam.scaled_on_unit(a)?;
    crm::predictive(&lam_a, stats, cfg)
}

/// Predictive after integrating out `Ψ₁` coordinate by coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalPredictive {
    /// `P(Y = y)` for `y = 0..=y_max`.
    pub new_pmf: Vec<f64>,
    /// `P(Y > y_max)`.
    pub tail_mass: f64,
    /// Posterior mean of the new-feature rate.
    pub mean_rate: f64,
    /// Posterior mean inclusion probability of each known feature.
    pub known_means: Vec<f64>,
}

/// Default truncation: the marginal tail beyond `y_max` is below this.
pub const DEFAULT_TAIL: f64 = 1e-10;

/// Mixed-Poisson predictive. With `y_max = None` the smallest `y_max` whose
/// mixture tail is below [`DEFAULT_TAIL`] is used.
pub fn marginal_predictive(
    model: &SpModel,
    stats: &SuffStats,
    y_max: Option<usize>,
    cfg: &EvalConfig,
) -> Result<MarginalPredictive> {
    let post = psi_posterior(model, stats, cfg)?;
    marginal_from_posterior(model, stats, &post, y_max, cfg)
}

/// Mixture weights of the grid nodes: normalized trapezoid weights in `ξ`.
fn node_weights(post: &TabulatedDensity) -> Vec<f64> {
    let n = post.xi.len();
    let g: Vec<f64> = (0..n)
        .map(|j| (post.log_density[j] + post.map.log_jacobian(post.xi[j])).exp())
        .collect();
    let mut w = vec![0.0; n];
    for j in 1..n {
        let h = 0.5 * (post.xi[j] - post.xi[j - 1]);
        w[j - 1] += h * g[j - 1];
        w[j] += h * g[j];
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// As [`marginal_predictive`], reusing an already tabulated posterior.
pub fn marginal_from_posterior(
    model: &SpModel,
    stats: &SuffStats,
    post: &TabulatedDensity,
    y_max: Option<usize>,
    cfg: &EvalConfig,
) -> Result<MarginalPredictive> {
    let weights = node_weights(post);
    let mut rates = Vec::with_capacity(weights.len());
    let mut known_means = vec![0.0; stats.k()];
    for (&a, &w) in post.grid.iter().zip(&weights) {
        if w == 0.0 {
            rates.push(0.0);
            continue;
        }
        let law = conditional_predictive(model, stats, a, cfg)?;
        for (m, p) in known_means.iter_mut().zip(&law.known_probs) {
            *m += w * p;
        }
        rates.push(law.new_rate);
    }
    let mean_rate: f64 = rates.iter().zip(&weights).map(|(r, w)| r * w).sum();
    let pmf_at = |y: u64| -> f64 {
        rates
            .iter()
            .zip(&weights)
            .map(|(&r, &w)| if w == 0.0 { 0.0 } else { w * poisson_log_pmf(y, r).exp() })
            .sum()
    };
    let mut new_pmf = Vec::new();
    let mut cum = 0.0;
    let cap = y_max.unwrap_or(usize::MAX);
    let max_rate = rates.iter().cloned().fold(0.0, f64::max);
    let hard_cap = crate::numerics::discrete::poisson_truncation(max_rate) as usize;
    for y in 0.. {
        let p = pmf_at(y as u64);
        new_pmf.push(p);
        cum += p;
        if y >= cap || (y_max.is_none() && (1.0 - cum < DEFAULT_TAIL || y >= hard_cap)) {
            break;
        }
    }
    Ok(MarginalPredictive {
        new_pmf,
        tail_mass: (1.0 - cum).max(0.0),
        mean_rate,
        known_means,
    })
}

/// Draws `Ψ₁` from its posterior.
pub fn sample_psi<R: Rng + ?Sized>(rng: &mut R, model: &SpModel, stats: &SuffStats, cfg: &EvalConfig) -> Result<f64> {
    let post = psi_posterior(model, stats, cfg)?;
    post.quantile(open_unit(rng))
}

/// Draws from an already tabulated posterior.
pub fn sample_psi_from<R: Rng + ?Sized>(rng: &mut R, post: &TabulatedDensity) -> Result<f64> {
    post.quantile(open_unit(rng))
}

/// `n` customers from the scaled process, together with the scale drawn
/// from the prior.
pub fn sample_allocation_with_scale<R: Rng + ?Sized>(
    rng: &mut R,
    model: &SpModel,
    n: usize,
    cfg: &EvalConfig,
) -> Result<(FeatureAllocation, f64)> {
    let a = model.prior.quantile(open_unit(rng))?;
    let lam_a = model.lam.scaled_on_unit(a)?;
    Ok((crm::sample_allocation(rng, &lam_a, n, cfg)?, a))
}

/// `n` customers from the scaled process.
pub fn sample_allocation<R: Rng + ?Sized>(rng: &mut R, model: &SpModel, n: usize, cfg: &EvalConfig) -> Result<FeatureAllocation> {
    if n == 0 {
        return Ok(FeatureAllocation::empty());
    }
    sample_allocation_with_scale(rng, model, n, cfg).map(|(z, _)| z)
}

/// `E[K_j]` for `j = 1..=n`, the CRM curve under `λ_a` averaged over the prior.
pub fn expected_feature_curve(model: &SpModel, n: usize, cfg: &EvalConfig) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let rates = model.prior.integrate(n, &cfg.tol, |a, out| {
        let r = crm::new_feature_rates(&model.lam.scaled_on_unit(a)?, n, cfg)?;
        let w = model.prior.log_density(a).exp();
        for (o, v) in out.iter_mut().zip(r) {
            *o = w * v;
        }
        Ok(())
    })?;
    Ok(rates
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect())
}

/// `ln ∫ P(Z | Ψ₁ = a) f_Ψ(a) da`, with `P(Z | a)` the order-invariant CRM
/// allocation probability under `λ_a`.
pub fn allocation_log_prob(model: &SpModel, z: &FeatureAllocation, cfg: &EvalConfig) -> Result<f64> {
    let mut conditional = |a: f64, out: &mut [f64]| -> Result<()> {
        out[0] = crm::allocation_log_prob(&model.lam.scaled_on_unit(a)?, z, cfg)?;
        Ok(())
    };
    let grid = choose_grid(&model.prior, 1, PILOT_POINTS, &mut conditional)?;
    let mut reference = f64::NEG_INFINITY;
    let mut buf = [0.0];
    for x in grid.xi() {
        let a = grid.map.to_support(x);
        conditional(a, &mut buf)?;
        reference = reference.max(buf[0] + model.prior.log_density(a));
    }
    let v = model.prior.integrate(1, &cfg.tol, |a, out| {
        conditional(a, out)?;
        out[0] = (out[0] + model.prior.log_density(a) - reference).exp();
        Ok(())
    })?[0];
    Ok(v.ln() + reference)
}
