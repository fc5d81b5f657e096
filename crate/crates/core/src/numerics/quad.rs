//! Double-exponential (tanh-sinh) quadrature with declared endpoint exponents.
//!
//! An integrand behaving like `s^ρ` at an endpoint is first regularized by the
//! power substitution `s = x^{1/(1+ρ)}`, which turns the algebraic singularity
//! into a bounded factor. The transformed integrand is then integrated with the
//! tanh-sinh rule, halving the step until two successive levels agree.
//!
//! Nodes are generated once per level and shared by all integrals. Every node
//! carries both `x` and `1 − x`, and integrands receive the distance to the
//! upper limit alongside `s`, so factors like `(1 − s)^q` keep full relative
//! precision near the right endpoint.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest refinement level for which node tables can be built.
pub const MAX_LEVEL: usize = 16;

/// Abscissae are generated for `|t| ≤ T_MAX`; at `t = 6` the nodes sit about
/// 1e-275 from the endpoints.
const T_MAX: f64 = 6.0;

/// Convergence is not tested before this level (step 1/8).
const MIN_LEVEL: usize = 3;

/// Level-0 terms below this fraction of the largest term mark the tail cut.
const TAIL_RELATIVE: f64 = 1e-25;

/// Convergence tolerances shared by every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_refinements: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_refinements: 12,
        }
    }
}

impl Tolerance {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::domain(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::domain(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if self.max_refinements < MIN_LEVEL || self.max_refinements > MAX_LEVEL {
            return Err(Error::domain(format!(
                "max_refinements must lie in {MIN_LEVEL}..={MAX_LEVEL}, got {}",
                self.max_refinements
            )));
        }
        Ok(())
    }
}

/// Tolerances plus the integrand's algebraic behaviour at the two endpoints.
///
/// For [`integrate_halfline`] the exponents refer to the compactified variable
/// `u = a / (1 + a)`: `singularity_exponent_at_0` is the exponent of `f` at
/// `a → 0`, and `singularity_exponent_at_1` is `−γ − 2` when `f(a) ~ a^γ` as
/// `a → ∞` (see [`QuadratureSpec::with_tail_power`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub tol: Tolerance,
    pub singularity_exponent_at_0: f64,
    pub singularity_exponent_at_1: f64,
}

impl QuadratureSpec {
    pub fn new(tol: Tolerance) -> Self {
        QuadratureSpec {
            tol,
            singularity_exponent_at_0: 0.0,
            singularity_exponent_at_1: 0.0,
        }
    }

    pub fn with_exponents(mut self, at_0: f64, at_1: f64) -> Self {
        self.singularity_exponent_at_0 = at_0;
        self.singularity_exponent_at_1 = at_1;
        self
    }

    /// Declares `f(a) ~ a^γ` as `a → ∞` for half-line integrals.
    pub fn with_tail_power(mut self, gamma: f64) -> Self {
        self.singularity_exponent_at_1 = -gamma - 2.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.tol.validate()?;
        for (name, rho) in [
            ("singularity_exponent_at_0", self.singularity_exponent_at_0),
            ("singularity_exponent_at_1", self.singularity_exponent_at_1),
        ] {
            if !(rho > -1.0) || !rho.is_finite() {
                return Err(Error::domain(format!(
                    "{name} must exceed -1 for an integrable endpoint, got {rho}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::new(Tolerance::default())
    }
}

/// Result of a vector-valued quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct VecEstimate {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub levels: usize,
    pub evaluations: usize,
}

/// Result of a scalar quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub levels: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    t: f64,
    x: f64,
    xc: f64,
    w: f64,
}

fn node_at(t: f64) -> Node {
    let u = 0.5 * PI * t.sinh();
    let v = (-2.0 * u.abs()).exp();
    let (x, xc) = if u >= 0.0 {
        (1.0 / (1.0 + v), v / (1.0 + v))
    } else {
        (v / (1.0 + v), 1.0 / (1.0 + v))
    };
    let w = PI * t.cosh() * v / ((1.0 + v) * (1.0 + v));
    Node { t, x, xc, w }
}

fn level_nodes(level: usize) -> &'static [Node] {
    static LEVELS: [OnceLock<Vec<Node>>; MAX_LEVEL + 1] = [const { OnceLock::new() }; MAX_LEVEL + 1];
    LEVELS[level].get_or_init(|| {
        let h = 0.5f64.powi(level as i32);
        let kmax = (T_MAX / h).round() as i64;
        let step = if level == 0 { 1 } else { 2 };
        let start = if level == 0 { -kmax } else { -kmax + 1 };
        (0..)
            .map(|i| start + step * i)
            .take_while(|&k| k <= kmax)
            .map(|k| node_at(k as f64 * h))
            .filter(|n| n.w > 0.0 && n.x > 0.0 && n.xc > 0.0)
            .collect()
    })
}

/// Map from the reference variable `x ∈ (0, 1)` onto part of the interval.
/// `gap` is the distance from the piece's right end to the interval's upper
/// limit.
#[derive(Debug, Clone, Copy)]
enum Piece {
    /// `s = lo + width·x`.
    Direct { lo: f64, width: f64, gap: f64 },
    /// `s = lo + width·x^β`.
    FromLeft { lo: f64, width: f64, beta: f64, gap: f64 },
    /// `s = hi − width·x^β`, ending at the upper limit.
    FromRight { hi: f64, width: f64, beta: f64 },
}

impl Piece {
    /// Returns `(s, hi − s, ds/dx)`.
    #[inline]
    fn map(&self, node: &Node) -> (f64, f64, f64) {
        match *self {
            Piece::Direct { lo, width, gap } => (lo + width * node.x, gap + width * node.xc, width),
            Piece::FromLeft { lo, width, beta, gap } => {
                let d = width * node.x.powf(beta);
                (lo + d, gap + (width - d), beta * d / node.x)
            }
            Piece::FromRight { hi, width, beta } => {
                let d = width * node.x.powf(beta);
                (hi - d, d, beta * d / node.x)
            }
        }
    }
}

fn pieces_for(lo: f64, hi: f64, rho_lo: f64, rho_hi: f64) -> Vec<Piece> {
    let width = hi - lo;
    if rho_lo >= 0.0 && rho_hi >= 0.0 {
        return vec![Piece::Direct { lo, width, gap: 0.0 }];
    }
    let half = 0.5 * width;
    let mid = lo + half;
    let left = if rho_lo < 0.0 {
        Piece::FromLeft { lo, width: half, beta: 1.0 / (1.0 + rho_lo), gap: half }
    } else {
        Piece::Direct { lo, width: half, gap: half }
    };
    let right = if rho_hi < 0.0 {
        Piece::FromRight { hi, width: half, beta: 1.0 / (1.0 + rho_hi) }
    } else {
        Piece::Direct { lo: mid, width: half, gap: 0.0 }
    };
    vec![left, right]
}

/// Runs the level loop over a set of pieces for a `dim`-valued integrand.
fn integrate_pieces<F>(pieces: &[Piece], dim: usize, tol: &Tolerance, mut f: F) -> Result<VecEstimate>
where
    F: FnMut(f64, f64, &mut [f64]),
{
    tol.validate()?;
    let mut out = vec![0.0; dim];
    // sums[p * dim + c]
    let mut sums = vec![0.0; pieces.len() * dim];
    let mut evaluations = 0usize;
    // |t| beyond which a piece's terms are negligible, per side (neg, pos).
    let mut cuts = vec![(T_MAX, T_MAX); pieces.len()];

    let mut eval_node = |piece: &Piece, node: &Node, acc: &mut [f64], out: &mut [f64]| -> Result<bool> {
        let (s, sc, jac) = piece.map(node);
        if !(s > 0.0) || !(sc > 0.0) || jac == 0.0 || !jac.is_finite() {
            return Ok(false);
        }
        f(s, sc, out);
        let scale = node.w * jac;
        for (a, &v) in acc.iter_mut().zip(out.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { at: s });
            }
            *a += scale * v;
        }
        Ok(true)
    };

    // Level 0, recording term magnitudes to locate the tails.
    for (p, piece) in pieces.iter().enumerate() {
        let nodes = level_nodes(0);
        let mut terms: Vec<(f64, f64)> = Vec::with_capacity(nodes.len());
        let mut peak = vec![0.0f64; dim];
        let mut scratch = vec![0.0; dim];
        let mut mags: Vec<Vec<f64>> = Vec::with_capacity(nodes.len());
        for node in nodes {
            scratch.iter_mut().for_each(|v| *v = 0.0);
            let used = eval_node(piece, node, &mut scratch, &mut out)?;
            if used {
                evaluations += 1;
            }
            for c in 0..dim {
                sums[p * dim + c] += scratch[c];
                peak[c] = peak[c].max(scratch[c].abs());
            }
            mags.push(scratch.iter().map(|v| v.abs()).collect());
            terms.push((node.t, 0.0));
        }
        let negligible = |m: &Vec<f64>| m.iter().zip(&peak).all(|(v, pk)| *v <= TAIL_RELATIVE * pk);
        let mut neg_cut = T_MAX;
        let mut pos_cut = T_MAX;
        // Walk inward from each end while the terms stay negligible.
        for (i, m) in mags.iter().enumerate() {
            if !negligible(m) {
                neg_cut = (-terms[i].0 + 1.0).min(T_MAX);
                break;
            }
        }
        for (i, m) in mags.iter().enumerate().rev() {
            if !negligible(m) {
                pos_cut = (terms[i].0 + 1.0).min(T_MAX);
                break;
            }
        }
        cuts[p] = (neg_cut, pos_cut);
    }

    let estimate = |sums: &[f64], h: f64| -> Vec<f64> {
        (0..dim)
            .map(|c| h * (0..pieces.len()).map(|p| sums[p * dim + c]).sum::<f64>())
            .collect()
    };

    let mut previous = estimate(&sums, 1.0);
    let mut errors = vec![f64::INFINITY; dim];
    for level in 1..=tol.max_refinements {
        let h = 0.5f64.powi(level as i32);
        for (p, piece) in pieces.iter().enumerate() {
            let (neg_cut, pos_cut) = cuts[p];
            let acc = &mut sums[p * dim..(p + 1) * dim];
            for node in level_nodes(level) {
                if node.t < -neg_cut || node.t > pos_cut {
                    continue;
                }
                if eval_node(piece, node, acc, &mut out)? {
                    evaluations += 1;
                }
            }
        }
        let current = estimate(&sums, h);
        for c in 0..dim {
            errors[c] = (current[c] - previous[c]).abs();
        }
        let converged = level >= MIN_LEVEL
            && (0..dim).all(|c| errors[c] <= tol.abs_tol.max(tol.rel_tol * current[c].abs()));
        previous = current;
        if converged {
            return Ok(VecEstimate {
                values: previous,
                errors,
                levels: level,
                evaluations,
            });
        }
    }
    // Report the worst component.
    let worst = (0..dim)
        .max_by(|&a, &b| {
            let ra = errors[a] / previous[a].abs().max(tol.abs_tol);
            let rb = errors[b] / previous[b].abs().max(tol.abs_tol);
            ra.total_cmp(&rb)
        })
        .unwrap_or(0);
    Err(Error::NoConvergence {
        estimate: previous.get(worst).copied().unwrap_or(f64::NAN),
        error_bound: errors.get(worst).copied().unwrap_or(f64::NAN),
        levels: tol.max_refinements,
    })
}

/// Integrates a vector-valued function over `[lo, hi] ⊆ [0, 1]`.
///
/// The integrand receives `(s, hi − s, out)`, the second argument computed
/// without cancellation. The exponents in `spec` apply at `lo` and `hi`.
pub fn integrate_interval_vec<F>(lo: f64, hi: f64, dim: usize, spec: &QuadratureSpec, f: F) -> Result<VecEstimate>
where
    F: FnMut(f64, f64, &mut [f64]),
{
    spec.validate()?;
    if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
        return Err(Error::domain(format!("interval [{lo}, {hi}] must lie inside [0, 1]")));
    }
    let pieces = pieces_for(lo, hi, spec.singularity_exponent_at_0, spec.singularity_exponent_at_1);
    integrate_pieces(&pieces, dim, &spec.tol, f)
}

/// Integrates a scalar function of `(s, 1 − s)` over the unit interval.
pub fn integrate_unit_estimate<F>(mut f: F, spec: &QuadratureSpec) -> Result<QuadEstimate>
where
    F: FnMut(f64, f64) -> f64,
{
    let est = integrate_interval_vec(0.0, 1.0, 1, spec, |s, sc, out| out[0] = f(s, sc))?;
    Ok(QuadEstimate {
        value: est.values[0],
        error_bound: est.errors[0],
        levels: est.levels,
        evaluations: est.evaluations,
    })
}

/// `∫₀¹ f(s) ds`.
pub fn integrate_unit<F>(f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_unit_estimate(|s, _| f(s), spec).map(|e| e.value)
}

/// Vector-valued `∫₀^∞ f(a) da` through `u = a / (1 + a)`.
pub fn integrate_halfline_vec<F>(dim: usize, spec: &QuadratureSpec, mut f: F) -> Result<VecEstimate>
where
    F: FnMut(f64, &mut [f64]),
{
    integrate_interval_vec(0.0, 1.0, dim, spec, |u, uc, out| {
        let a = u / uc;
        f(a, out);
        for v in out.iter_mut() {
            // Divide twice so a tiny f and a huge Jacobian never meet as 0·∞.
            if *v != 0.0 {
                *v = *v / uc / uc;
            }
        }
    })
}

/// `∫₀^∞ f(a) da`.
pub fn integrate_halfline<F>(f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_halfline_vec(1, spec, |a, out| out[0] = f(a)).map(|e| e.values[0])
}
