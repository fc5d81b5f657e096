//! Gibbs-type species sampling.
//!
//! A Gibbs-type prior assigns observation `n + 1` to a new species with
//! probability `V(n+1, k+1)/V(n, k)` and to the `i`-th observed species with
//! probability `V(n+1, k)/V(n, k)·(n_i − σ)`, where the weights satisfy
//! `V(n, k) = (n − σk) V(n+1, k) + V(n+1, k+1)` and `V(1, 1) = 1`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::alloc::{canonical_labels, Partition};
use crate::error::{Error, Result};
use crate::numerics::log_pochhammer;

/// Tolerance on the relative recursion residual.
pub const RECURSION_TOL: f64 = 1e-12;

/// Depth of the recursion check run when a custom model is built.
pub const DEFAULT_CHECK_DEPTH: usize = 30;

/// `ln V(n, k)`; `−∞` encodes a zero weight.
pub type LogWeightFn = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Dirichlet { theta: f64 },
    PitmanYor { sigma: f64, theta: f64 },
    Custom { log_v: LogWeightFn, max_blocks: Option<usize> },
}

/// A Gibbs-type species-sampling prior.
#[derive(Clone)]
pub struct GibbsModel {
    sigma: f64,
    kind: Kind,
    /// Residual of the recursion up to [`DEFAULT_CHECK_DEPTH`], custom kinds only.
    residual: Option<f64>,
}

impl fmt::Debug for GibbsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Dirichlet { theta } => write!(f, "GibbsModel::Dirichlet {{ theta: {theta} }}"),
            Kind::PitmanYor { sigma, theta } => {
                write!(f, "GibbsModel::PitmanYor {{ sigma: {sigma}, theta: {theta} }}")
            }
            Kind::Custom { max_blocks, .. } => write!(
                f,
                "GibbsModel::Custom {{ sigma: {}, max_blocks: {max_blocks:?}, residual: {:?} }}",
                self.sigma, self.residual
            ),
        }
    }
}

/// Serializable catalog models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum GibbsSpec {
    Dirichlet {
        theta: f64,
    },
    #[serde(alias = "pitman-yor")]
    PitmanYor {
        sigma: f64,
        theta: f64,
    },
}

impl GibbsSpec {
    pub fn build(&self) -> Result<GibbsModel> {
        match *self {
            GibbsSpec::Dirichlet { theta } => GibbsModel::dirichlet(theta),
            GibbsSpec::PitmanYor { sigma, theta } => GibbsModel::pitman_yor(sigma, theta),
        }
    }
}

/// Species predictive after `n` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsPredictive {
    pub p_new: f64,
    pub p_old: Vec<f64>,
}

impl GibbsModel {
    /// `V(n, k) = θ^k / (θ)_n`.
    pub fn dirichlet(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!("dirichlet needs theta > 0, got {theta}")));
        }
        Ok(GibbsModel {
            sigma: 0.0,
            kind: Kind::Dirichlet { theta },
            residual: None,
        })
    }

    /// `V(n, k) = ∏_{i<k}(θ + iσ) / (θ)_n`, for `σ ∈ (0, 1)` and `θ > −σ`.
    /// A negative `σ` is accepted when `θ = M|σ|` for an integer `M ≥ 1`,
    /// which gives at most `M` species.
    pub fn pitman_yor(sigma: f64, theta: f64) -> Result<Self> {
        if !(sigma < 1.0 && sigma.is_finite() && theta.is_finite()) {
            return Err(Error::domain(format!("pitman-yor needs sigma < 1, got {sigma}")));
        }
        if sigma == 0.0 {
            return GibbsModel::dirichlet(theta);
        }
        if sigma > 0.0 && !(theta > -sigma) {
            return Err(Error::domain(format!("pitman-yor needs theta > -sigma, got theta = {theta}")));
        }
        if sigma < 0.0 {
            let m = theta / -sigma;
            if !(m >= 0.5 && (m - m.round()).abs() < 1e-9 * m.max(1.0)) {
                return Err(Error::domain(format!(
                    "pitman-yor with sigma < 0 needs theta = M·|sigma| for an integer M ≥ 1, got theta/|sigma| = {m}"
                )));
            }
        }
        Ok(GibbsModel {
            sigma,
            kind: Kind::PitmanYor { sigma, theta },
            residual: None,
        })
    }

    /// User weights. The recursion is checked up to [`DEFAULT_CHECK_DEPTH`]
    /// here; predictives are always available, sampling only once the check
    /// passes.
    pub fn custom<F>(sigma: f64, log_v: F, max_blocks: Option<usize>) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64 + Send + Sync + 'static,
    {
        if !(sigma < 1.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("gibbs models need sigma < 1, got {sigma}")));
        }
        let mut model = GibbsModel {
            sigma,
            kind: Kind::Custom {
                log_v: Arc::new(log_v),
                max_blocks,
            },
            residual: None,
        };
        model.residual = Some(check_v_recursion(&model, DEFAULT_CHECK_DEPTH)?);
        Ok(model)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Dirichlet { .. } => "dirichlet",
            Kind::PitmanYor { .. } => "pitman_yor",
            Kind::Custom { .. } => "custom",
        }
    }

    /// Recursion residual recorded at construction (custom kinds).
    pub fn recorded_residual(&self) -> Option<f64> {
        self.residual
    }

    /// Most species the model can produce, if finite.
    pub fn max_blocks(&self) -> Option<usize> {
        match self.kind {
            Kind::PitmanYor { sigma, theta } if sigma < 0.0 => Some((theta / -sigma).round() as usize),
            Kind::Custom { max_blocks, .. } => max_blocks,
            _ => None,
        }
    }

    pub fn spec(&self) -> Option<GibbsSpec> {
        match self.kind {
            Kind::Dirichlet { theta } => Some(GibbsSpec::Dirichlet { theta }),
            Kind::PitmanYor { sigma, theta } => Some(GibbsSpec::PitmanYor { sigma, theta }),
            Kind::Custom { .. } => None,
        }
    }

    pub fn to_json(&self) -> Result<Value> {
        let spec = self
            .spec()
            .ok_or_else(|| Error::UnsupportedIntensity("custom Gibbs weights cannot be serialized".into()))?;
        Ok(serde_json::to_value(spec)?)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let spec: GibbsSpec = serde_json::from_value(v.clone())?;
        spec.build()
    }

    /// `ln V(n, k)` for `1 ≤ k ≤ n`, with `V(0, 0) = 1`.
    pub fn log_v(&self, n: usize, k: usize) -> Result<f64> {
        if n == 0 && k == 0 {
            return Ok(0.0);
        }
        if k == 0 || k > n {
            return Err(Error::domain(format!("V(n, k) needs 1 ≤ k ≤ n, got n = {n}, k = {k}")));
        }
        let (n1, k1) = ((n - 1) as f64, (k - 1) as f64);
        match self.kind {
            // θ^{k−1} / (θ+1)_{n−1}, which equals θ^k/(θ)_n
            Kind::Dirichlet { theta } => Ok(k1 * theta.ln() - log_pochhammer(theta + 1.0, n1)?),
            Kind::PitmanYor { sigma, theta } => {
                let den = log_pochhammer(theta + 1.0, n1)?;
                let num = if sigma > 0.0 {
                    // ∏_{i=1}^{k−1}(θ + iσ) = σ^{k−1} (θ/σ + 1)_{k−1}
                    k1 * sigma.ln() + log_pochhammer(theta / sigma + 1.0, k1)?
                } else {
                    let m = (theta / -sigma).round() as usize;
                    if k > m {
                        return Ok(f64::NEG_INFINITY);
                    }
                    // ∏_{i=1}^{k−1}|σ|(M − i)
                    k1 * (-sigma).ln() + (1..k).map(|i| ((m - i) as f64).ln()).sum::<f64>()
                };
                Ok(num - den)
            }
            Kind::Custom { ref log_v, .. } => {
                let v = log_v(n, k);
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::domain(format!("custom ln V({n}, {k}) is {v}")));
                }
                Ok(v)
            }
        }
    }
}

/// `P(new species)` and `P(species i)` for the next observation.
pub fn gibbs_predictive(model: &GibbsModel, part: &Partition) -> Result<GibbsPredictive> {
    Partition::new(part.n, part.blocks.clone())?;
    let (n, k) = (part.n, part.k());
    if n == 0 {
        return Ok(GibbsPredictive {
            p_new: 1.0,
            p_old: Vec::new(),
        });
    }
    let sigma = model.sigma;
    let (p_new, old_scale) = match model.kind {
        Kind::Dirichlet { theta } => (theta / (theta + n as f64), 1.0 / (theta + n as f64)),
        Kind::PitmanYor { theta, .. } => {
            let denom = theta + n as f64;
            ((theta + k as f64 * sigma).max(0.0) / denom, 1.0 / denom)
        }
        Kind::Custom { .. } => {
            let base = model.log_v(n, k)?;
            if base == f64::NEG_INFINITY {
                return Err(Error::domain(format!("V({n}, {k}) = 0, the partition has probability zero")));
            }
            ((model.log_v(n + 1, k + 1)? - base).exp(), (model.log_v(n + 1, k)? - base).exp())
        }
    };
    let p_old = part.blocks.iter().map(|&b| old_scale * (b as f64 - sigma)).collect();
    Ok(GibbsPredictive { p_new, p_old })
}

/// `max_{n ≤ N, k ≤ n} |V(n,k) − (n−σk)V(n+1,k) − V(n+1,k+1)| / V(n,k)`,
/// together with `|V(1,1) − 1|`. Terms with `V(n, k) = 0` must have both
/// successors zero as well.
pub fn check_v_recursion(model: &GibbsModel, depth: usize) -> Result<f64> {
    if depth == 0 {
        return Err(Error::domain("recursion depth must be at least 1"));
    }
    let sigma = model.sigma;
    let mut worst = (model.log_v(1, 1)?.exp() - 1.0).abs();
    for n in 1..=depth {
        for k in 1..=n {
            let base = model.log_v(n, k)?;
            let same = model.log_v(n + 1, k)?;
            let up = model.log_v(n + 1, k + 1)?;
            let r = if base == f64::NEG_INFINITY {
                if same == f64::NEG_INFINITY && up == f64::NEG_INFINITY {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (1.0 - (n as f64 - sigma * k as f64) * (same - base).exp() - (up - base).exp()).abs()
            };
            if !(r <= worst) {
                worst = r;
            }
        }
    }
    Ok(worst)
}

fn sampling_gate(model: &GibbsModel, n: usize) -> Result<()> {
    if let Kind::Custom { .. } = model.kind {
        let residual = check_v_recursion(model, n.max(DEFAULT_CHECK_DEPTH))?;
        if !(residual < RECURSION_TOL) {
            return Err(Error::RecursionViolated { residual });
        }
    }
    Ok(())
}

/// Species labels of `n` sequential draws, labelled by first appearance.
pub fn sample_labels<R: Rng + ?Sized>(rng: &mut R, model: &GibbsModel, n: usize) -> Result<Vec<usize>> {
    sampling_gate(model, n)?;
    let cap = model.max_blocks();
    let mut part = Partition::empty();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let pred = gibbs_predictive(model, &part)?;
        let p_new = if cap.is_some_and(|c| part.k() >= c) { 0.0 } else { pred.p_new };
        let total = p_new + pred.p_old.iter().sum::<f64>();
        let u = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut choice = part.k();
        for (i, p) in pred.p_old.iter().enumerate() {
            acc += p;
            if u < acc {
                choice = i;
                break;
            }
        }
        if choice == part.k() && p_new == 0.0 {
            // rounding left u past the last block
            choice = part.k() - 1;
        }
        if choice == part.k() {
            part.blocks.push(1);
        } else {
            part.blocks[choice] += 1;
        }
        part.n += 1;
        labels.push(choice);
    }
    Ok(labels)
}

/// Partition of `n` sequential draws.
pub fn sample_partition<R: Rng + ?Sized>(rng: &mut R, model: &GibbsModel, n: usize) -> Result<Partition> {
    Ok(Partition::from_labels(&sample_labels(rng, model, n)?))
}

/// Chain-rule log probability of a label sequence.
pub fn eppf_log_prob(model: &GibbsModel, labels: &[usize]) -> Result<f64> {
    let canon = canonical_labels(labels);
    let mut part = Partition::empty();
    let mut total = 0.0;
    for &l in &canon {
        let pred = gibbs_predictive(model, &part)?;
        if l == part.k() {
            total += pred.p_new.ln();
            part.blocks.push(1);
        } else {
            total += pred.p_old[l].ln();
            part.blocks[l] += 1;
        }
        part.n += 1;
    }
    Ok(total)
}

/// `ln V(n, k) + Σ_i ln (1 − σ)_{n_i − 1}`: the probability of any one
/// sequence with these block sizes.
pub fn partition_log_eppf(model: &GibbsModel, part: &Partition) -> Result<f64> {
    Partition::new(part.n, part.blocks.clone())?;
    let mut total = model.log_v(part.n, part.k())?;
    for &b in &part.blocks {
        total += log_pochhammer(1.0 - model.sigma, (b - 1) as f64)?;
    }
    Ok(total)
}

/// Law of the number of species `K_n`, as a vector indexed by `k = 0..=n`.
pub fn block_count_distribution(model: &GibbsModel, n: usize) -> Result<Vec<f64>> {
    let mut dist = vec![1.0];
    for j in 0..n {
        dist = step_block_count(model, j, &dist)?;
    }
    dist.resize(n + 1, 0.0);
    Ok(dist)
}

/// Law of `K_{j+1}` from the law of `K_j`.
fn step_block_count(model: &GibbsModel, j: usize, dist: &[f64]) -> Result<Vec<f64>> {
    let mut next = vec![0.0; dist.len() + 1];
    for (k, &p) in dist.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let p_new = if j == 0 {
            1.0
        } else if model.max_blocks().is_some_and(|c| k >= c) {
            0.0
        } else {
            p_new_at(model, j, k)?
        };
        next[k + 1] += p * p_new;
        next[k] += p * (1.0 - p_new);
    }
    Ok(next)
}

/// `p_new` at `(n, k)`; it depends on nothing else.
fn p_new_at(model: &GibbsModel, n: usize, k: usize) -> Result<f64> {
    let mut blocks = vec![1; k];
    blocks[0] += n - k;
    Ok(gibbs_predictive(model, &Partition::new(n, blocks)?)?.p_new)
}

/// `E[K_n]`.
pub fn expected_num_blocks(model: &GibbsModel, n: usize) -> Result<f64> {
    Ok(block_count_distribution(model, n)?
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * p)
        .sum())
}

/// `E[K_j]` for `j = 1..=n`.
pub fn expected_block_curve(model: &GibbsModel, n: usize) -> Result<Vec<f64>> {
    let mut dist = vec![1.0];
    let mut curve = Vec::with_capacity(n);
    for j in 0..n {
        dist = step_block_count(model, j, &dist)?;
        curve.push(dist.iter().enumerate().map(|(k, p)| k as f64 * p).sum());
    }
    Ok(curve)
}

/// `E[K_1..K_n]` under the Dirichlet model, `Σ_{j<n} θ/(θ + j)`.
pub fn dirichlet_expected_blocks(theta: f64, n: usize) -> Vec<f64> {
    (0..n)
        .scan(0.0, |acc, j| {
            *acc += theta / (theta + j as f64);
            Some(*acc)
        })
        .collect()
}
