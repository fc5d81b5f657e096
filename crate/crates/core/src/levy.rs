//! Homogeneous Lévy intensities `λ(s)` and their Beta-type moments.
//!
//! Moments `∫ s^p (1 − s)^q λ(s) ds` over `(0, min(1, upper))` are the only
//! functional of `λ` the feature models need. Catalog kinds with a Beta closed
//! form dispatch to it unless the configuration asks for quadrature; every
//! other case goes through one vector-valued tanh-sinh pass that evaluates `λ`
//! once per node for all requested `(p, q)` pairs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::numerics::special::{ln_gamma, log_beta};
use crate::numerics::{integrate_halfline, integrate_interval_vec, integrate_unit_estimate, QuadratureSpec, Tolerance};

pub type PointFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied intensity. The endpoint exponents drive the quadrature
/// substitution and cannot be inferred from pointwise values.
#[derive(Clone)]
pub struct CustomIntensity {
    pub density: PointFn,
    /// `λ(s) ~ s^e` as `s → 0`.
    pub exponent_at_0: f64,
    /// Right end of the support; may be infinite.
    pub upper: f64,
    /// `λ(s) ~ (upper − s)^e` as `s → upper`, for finite `upper`.
    pub exponent_at_upper: f64,
    /// `λ(s) ~ s^e` as `s → ∞`; `None` means faster than any power.
    pub tail_exponent: Option<f64>,
}

impl CustomIntensity {
    pub fn new<F>(density: F, exponent_at_0: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        CustomIntensity {
            density: Arc::new(density),
            exponent_at_0,
            upper: f64::INFINITY,
            exponent_at_upper: 0.0,
            tail_exponent: None,
        }
    }

    pub fn with_upper(mut self, upper: f64, exponent_at_upper: f64) -> Self {
        self.upper = upper;
        self.exponent_at_upper = exponent_at_upper;
        self
    }

    pub fn with_tail_exponent(mut self, e: f64) -> Self {
        self.tail_exponent = Some(e);
        self
    }
}

impl fmt::Debug for CustomIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomIntensity")
            .field("exponent_at_0", &self.exponent_at_0)
            .field("upper", &self.upper)
            .field("exponent_at_upper", &self.exponent_at_upper)
            .field("tail_exponent", &self.tail_exponent)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum LevyKind {
    /// `α Γ(1+c)/(Γ(1−σ)Γ(c+σ)) s^{−1−σ}(1−s)^{c+σ−1}` on `(0, 1)`.
    StableBeta { alpha: f64, c: f64, sigma: f64 },
    /// `Cσ s^{−1−σ}` on `(0, ∞)`.
    Stable { c: f64, sigma: f64 },
    /// `C/s` on `(0, r)`.
    Log { c: f64, r: f64 },
    /// `θ s^{−1} e^{−rate·s}` on `(0, ∞)`.
    Gamma { theta: f64, rate: f64 },
    Custom(CustomIntensity),
    /// `f·λ(f·s)` for a base intensity without a closed-form rescaling.
    Scaled { base: Arc<LevyIntensity>, factor: f64 },
}

/// A Lévy intensity together with the right end of the support in use.
#[derive(Debug, Clone)]
pub struct LevyIntensity {
    kind: LevyKind,
    upper: f64,
}

/// Outcome of the `∫ min(s, 1) λ(s) ds < ∞` check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrability {
    pub integrable: bool,
    pub value: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl LevyIntensity {
    fn checked(kind: LevyKind, upper: f64) -> Result<Self> {
        let lam = LevyIntensity { kind, upper };
        let check = lam.check_integrability(&Tolerance::default());
        if !check.integrable {
            return Err(Error::domain(format!(
                "intensity violates the integrability condition ∫ min(s,1) λ(s) ds < ∞ (value {})",
                check.value
            )));
        }
        Ok(lam)
    }

    pub fn stable_beta(alpha: f64, c: f64, sigma: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("c", c)?;
        unit_open("sigma", sigma)?;
        Self::checked(LevyKind::StableBeta { alpha, c, sigma }, 1.0)
    }

    pub fn stable(c: f64, sigma: f64) -> Result<Self> {
        positive("C", c)?;
        unit_open("sigma", sigma)?;
        Self::checked(LevyKind::Stable { c, sigma }, f64::INFINITY)
    }

    pub fn log(c: f64, r: f64) -> Result<Self> {
        positive("C", c)?;
        positive("r", r)?;
        Self::checked(LevyKind::Log { c, r }, r)
    }

    pub fn gamma(theta: f64) -> Result<Self> {
        Self::gamma_with_rate(theta, 1.0)
    }

    pub fn gamma_with_rate(theta: f64, rate: f64) -> Result<Self> {
        positive("theta", theta)?;
        positive("rate", rate)?;
        Self::checked(LevyKind::Gamma { theta, rate }, f64::INFINITY)
    }

    pub fn custom(spec: CustomIntensity) -> Result<Self> {
        if !spec.exponent_at_0.is_finite() {
            return Err(Error::domain("custom intensity needs a finite exponent at 0"));
        }
        if !(spec.upper > 0.0) {
            return Err(Error::domain("custom intensity needs a positive upper support bound"));
        }
        if spec.upper.is_finite() && !(spec.exponent_at_upper > -1.0) {
            return Err(Error::domain("custom intensity must be integrable at its upper support bound"));
        }
        let upper = spec.upper;
        Self::checked(LevyKind::Custom(spec), upper)
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    /// Right end of the support currently in use.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LevyKind::StableBeta { .. } => "stable_beta",
            LevyKind::Stable { .. } => "stable",
            LevyKind::Log { .. } => "log",
            LevyKind::Gamma { .. } => "gamma",
            LevyKind::Custom(_) => "custom",
            LevyKind::Scaled { .. } => "scaled",
        }
    }

    /// Restricts the support to `(0, min(upper, b))`.
    pub fn restricted_to(&self, b: f64) -> Result<Self> {
        positive("restriction bound", b)?;
        Ok(LevyIntensity {
            kind: self.kind.clone(),
            upper: self.upper.min(b),
        })
    }

    /// `λ_a(s) = a·λ(a·s)` on `(0, upper/a)`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        positive("scale", a)?;
        let upper = self.upper / a;
        let kind = match self.kind {
            LevyKind::Stable { c, sigma } if self.upper.is_infinite() => LevyKind::Stable {
                c: c * a.powf(-sigma),
                sigma,
            },
            LevyKind::Log { c, r } if self.upper >= r => LevyKind::Log { c, r: r / a },
            LevyKind::Gamma { theta, rate } if self.upper.is_infinite() => LevyKind::Gamma {
                theta,
                rate: rate * a,
            },
            _ => LevyKind::Scaled {
                base: Arc::new(self.clone()),
                factor: a,
            },
        };
        Ok(LevyIntensity { kind, upper })
    }

    /// `λ_a` restricted to the unit interval, the intensity of a CRM feature
    /// prior at scale `a`.
    pub fn scaled_on_unit(&self, a: f64) -> Result<Self> {
        self.scaled(a)?.restricted_to(1.0)
    }

    /// Where the kind's own support ends, before any restriction.
    fn natural_end(&self) -> f64 {
        match &self.kind {
            LevyKind::StableBeta { .. } => 1.0,
            LevyKind::Stable { .. } | LevyKind::Gamma { .. } => f64::INFINITY,
            LevyKind::Log { r, .. } => *r,
            LevyKind::Custom(cst) => cst.upper,
            LevyKind::Scaled { base, factor } => base.upper / factor,
        }
    }

    /// Exponent of `λ` at `s → 0`.
    pub fn exponent_at_0(&self) -> f64 {
        match &self.kind {
            LevyKind::StableBeta { sigma, .. } | LevyKind::Stable { sigma, .. } => -1.0 - sigma,
            LevyKind::Log { .. } | LevyKind::Gamma { .. } => -1.0,
            LevyKind::Custom(cst) => cst.exponent_at_0,
            LevyKind::Scaled { base, .. } => base.exponent_at_0(),
        }
    }

    /// Exponent of `λ` at the right end of the support in use.
    pub fn exponent_at_upper(&self) -> f64 {
        if self.upper < self.natural_end() {
            return 0.0;
        }
        match &self.kind {
            LevyKind::StableBeta { c, sigma, .. } => c + sigma - 1.0,
            LevyKind::Custom(cst) => cst.exponent_at_upper,
            LevyKind::Scaled { base, .. } => base.exponent_at_upper(),
            _ => 0.0,
        }
    }

    /// Power-law decay at infinity, if the support is unbounded.
    pub fn tail_exponent(&self) -> Option<f64> {
        match &self.kind {
            LevyKind::Stable { sigma, .. } => Some(-1.0 - sigma),
            LevyKind::Custom(cst) => cst.tail_exponent,
            LevyKind::Scaled { base, .. } => base.tail_exponent(),
            _ => None,
        }
    }

    /// `ln λ(t)` for `0 < t < upper`, given `gap = upper − t` computed
    /// without cancellation.
    fn log_value(&self, t: f64, gap: f64) -> f64 {
        if !(gap > 0.0) {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            LevyKind::StableBeta { alpha, c, sigma } => {
                let tc = (1.0 - self.upper) + gap;
                stable_beta_log_coeff(*alpha, *c, *sigma) + (-1.0 - sigma) * t.ln() + (c + sigma - 1.0) * tc.ln()
            }
            LevyKind::Stable { c, sigma } => (c * sigma).ln() + (-1.0 - sigma) * t.ln(),
            LevyKind::Log { c, .. } => c.ln() - t.ln(),
            LevyKind::Gamma { theta, rate } => theta.ln() - t.ln() - rate * t,
            LevyKind::Custom(cst) => (cst.density)(t).ln(),
            LevyKind::Scaled { base, factor } => {
                // base.upper − f·t = f·(upper − t)
                factor.ln() + base.log_value(factor * t, factor * gap)
            }
        }
    }

    /// Pointwise density. Zero at and above the support's upper end.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s.is_nan() || s <= 0.0 {
            return Err(Error::domain(format!("intensity evaluated at non-positive point {s}")));
        }
        if s >= self.upper {
            return Ok(0.0);
        }
        Ok(self.log_value(s, self.upper - s).exp())
    }

    /// Closed-form `ln ∫₀^{min(1,upper)} s^p (1−s)^q λ(s) ds`, if the kind has one.
    fn closed_form_log_moment(&self, p: f64, q: f64) -> Option<Result<f64>> {
        match self.kind {
            LevyKind::StableBeta { alpha, c, sigma } if self.upper >= 1.0 => {
                Some(log_beta(p - sigma, q + c + sigma).map(|b| stable_beta_log_coeff(alpha, c, sigma) + b))
            }
            LevyKind::Stable { c, sigma } if self.upper >= 1.0 => {
                Some(log_beta(p - sigma, q + 1.0).map(|b| (c * sigma).ln() + b))
            }
            LevyKind::Log { c, r } if r.min(self.upper) >= 1.0 => Some(log_beta(p, q + 1.0).map(|b| c.ln() + b)),
            _ => None,
        }
    }

    fn check_moment_domain(&self, p: f64, q: f64) -> Result<()> {
        if !(p >= 0.0 && q >= 0.0 && p.is_finite() && q.is_finite()) {
            return Err(Error::domain(format!("moment orders must be finite and non-negative, got ({p}, {q})")));
        }
        if !(p + self.exponent_at_0() > -1.0) {
            return Err(Error::domain(format!(
                "moment with p = {p} is not integrable at 0 for a {} intensity (exponent {})",
                self.kind_name(),
                self.exponent_at_0()
            )));
        }
        Ok(())
    }

    /// `∫₀^{min(1,upper)} s^p (1−s)^q λ(s) ds`.
    pub fn moment(&self, p: f64, q: f64, cfg: &EvalConfig) -> Result<f64> {
        Ok(self.moments(&[(p, q)], cfg)?[0])
    }

    /// Several moments sharing one pass of quadrature nodes.
    pub fn moments(&self, pairs: &[(f64, f64)], cfg: &EvalConfig) -> Result<Vec<f64>> {
        for &(p, q) in pairs {
            self.check_moment_domain(p, q)?;
        }
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        if cfg.closed_forms_allowed() && self.closed_form_log_moment(1.0, 0.0).is_some() {
            return pairs
                .iter()
                .map(|&(p, q)| self.closed_form_log_moment(p, q).expect("closed form available").map(f64::exp))
                .collect();
        }
        self.quadrature_moments(pairs, &cfg.tol)
    }

    fn quadrature_moments(&self, pairs: &[(f64, f64)], tol: &Tolerance) -> Result<Vec<f64>> {
        let hi = self.upper.min(1.0);
        let p_min = pairs.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let q_min = pairs.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let rho0 = p_min + self.exponent_at_0();
        let rho1 = if self.upper <= 1.0 {
            let q_part = if self.upper == 1.0 { q_min } else { 0.0 };
            self.exponent_at_upper() + q_part
        } else {
            q_min
        };
        if !(rho1 > -1.0) {
            return Err(Error::domain(format!(
                "moment is not integrable at the upper end (exponent {rho1})"
            )));
        }
        let spec = QuadratureSpec::new(*tol).with_exponents(rho0.min(0.0), rho1.min(0.0));
        // distance from hi to the support end
        let beyond = self.upper - hi;
        let hi_c = 1.0 - hi;
        // Integrate λ relative to its value mid-support so large scale
        // factors cannot overflow at nodes near 0.
        let shift = match self.log_value(0.5 * hi, beyond + 0.5 * hi) {
            v if v.is_finite() => v,
            _ => 0.0,
        };
        let est = integrate_interval_vec(0.0, hi, pairs.len(), &spec, |s, gap, out| {
            let ls = s.ln();
            let lsc = (hi_c + gap).ln();
            let base = self.log_value(s, beyond + gap) - shift;
            // A custom density may overflow at nodes so close to 0 that the
            // declared exponent bounds their share of the integral below e^-690.
            if base == f64::INFINITY && (rho0 + 1.0) * ls < -690.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            for (o, &(p, q)) in out.iter_mut().zip(pairs) {
                let qterm = if q == 0.0 { 0.0 } else { q * lsc };
                *o = (p * ls + qterm + base).exp();
            }
        })?;
        let factor = shift.exp();
        Ok(est.values.into_iter().map(|v| v * factor).collect())
    }

    /// `∫₀¹ s^p (1−s)^q a λ(a s) ds`.
    pub fn scaled_moment(&self, p: f64, q: f64, a: f64, cfg: &EvalConfig) -> Result<f64> {
        Ok(self.scaled_moments(&[(p, q)], a, cfg)?[0])
    }

    /// Several scaled moments at a common scale `a`.
    pub fn scaled_moments(&self, pairs: &[(f64, f64)], a: f64, cfg: &EvalConfig) -> Result<Vec<f64>> {
        self.scaled(a)?.moments(pairs, cfg)
    }

    /// Numerically checks `∫ min(s, 1) λ(s) ds < ∞`, returning the value.
    pub fn check_integrability(&self, tol: &Tolerance) -> Integrability {
        let fail = |value: f64| Integrability { integrable: false, value };
        let e0 = self.exponent_at_0();
        if !(1.0 + e0 > -1.0) {
            return fail(f64::INFINITY);
        }
        let near = match self.quadrature_moments(&[(1.0, 0.0)], tol) {
            Ok(v) => v[0],
            Err(Error::NoConvergence { estimate, .. }) => return fail(estimate),
            Err(_) => return fail(f64::NAN),
        };
        if !near.is_finite() {
            return fail(near);
        }
        if self.upper <= 1.0 {
            return Integrability { integrable: true, value: near };
        }
        let far = if self.upper.is_finite() {
            let width = self.upper - 1.0;
            let spec = QuadratureSpec::new(*tol).with_exponents(0.0, self.exponent_at_upper().min(0.0));
            integrate_unit_estimate(|t, tc| width * self.log_value(1.0 + width * t, width * tc).exp(), &spec)
                .map(|e| e.value)
        } else {
            let mut spec = QuadratureSpec::new(*tol);
            if let Some(e) = self.tail_exponent() {
                if !(e < -1.0) {
                    return fail(f64::INFINITY);
                }
                spec = spec.with_tail_power(e);
                spec.singularity_exponent_at_1 = spec.singularity_exponent_at_1.min(0.0);
            }
            integrate_halfline(|x| self.log_value(1.0 + x, f64::INFINITY).exp(), &spec)
        };
        match far {
            Ok(v) if v.is_finite() => Integrability {
                integrable: true,
                value: near + v,
            },
            Ok(v) => fail(v),
            Err(Error::NoConvergence { estimate, .. }) => fail(estimate),
            Err(_) => fail(f64::NAN),
        }
    }

    /// Serializable description; `None` for custom and internally scaled kinds.
    pub fn spec(&self) -> Option<LevySpec> {
        let s = match self.kind {
            LevyKind::StableBeta { alpha, c, sigma } => LevySpec::StableBeta { alpha, c, sigma },
            LevyKind::Stable { c, sigma } => LevySpec::Stable { c, sigma },
            LevyKind::Log { c, r } => LevySpec::Log { c, r },
            LevyKind::Gamma { theta, rate } => LevySpec::Gamma { theta, rate },
            _ => return None,
        };
        Some(s)
    }

    /// JSON `{"kind": .., "params": {..}}`, plus `"upper"` when restricted.
    pub fn to_json(&self) -> Result<Value> {
        let spec = self
            .spec()
            .ok_or_else(|| Error::UnsupportedIntensity(format!("{} intensities cannot be serialized", self.kind_name())))?;
        let mut v = serde_json::to_value(spec)?;
        if self.upper < self.natural_end() {
            v["upper"] = Value::from(self.upper);
        }
        Ok(v)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let mut obj = v
            .as_object()
            .cloned()
            .ok_or_else(|| Error::parse("intensity must be a JSON object"))?;
        let upper = match obj.remove("upper") {
            None | Some(Value::Null) => None,
            Some(u) => Some(u.as_f64().ok_or_else(|| Error::parse("\"upper\" must be a number"))?),
        };
        let spec: LevySpec = serde_json::from_value(Value::Object(obj))?;
        let lam = spec.build()?;
        match upper {
            Some(u) => lam.restricted_to(u),
            None => Ok(lam),
        }
    }
}

fn stable_beta_log_coeff(alpha: f64, c: f64, sigma: f64) -> f64 {
    alpha.ln() + ln_gamma(1.0 + c) - ln_gamma(1.0 - sigma) - ln_gamma(c + sigma)
}

fn default_rate() -> f64 {
    1.0
}

/// Serializable catalog intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevySpec {
    #[serde(alias = "stable-beta")]
    StableBeta { alpha: f64, c: f64, sigma: f64 },
    Stable {
        #[serde(rename = "C")]
        c: f64,
        sigma: f64,
    },
    Log {
        #[serde(rename = "C")]
        c: f64,
        r: f64,
    },
    Gamma {
        theta: f64,
        #[serde(default = "default_rate")]
        rate: f64,
    },
}

impl LevySpec {
    pub fn build(&self) -> Result<LevyIntensity> {
        match *self {
            LevySpec::StableBeta { alpha, c, sigma } => LevyIntensity::stable_beta(alpha, c, sigma),
            LevySpec::Stable { c, sigma } => LevyIntensity::stable(c, sigma),
            LevySpec::Log { c, r } => LevyIntensity::log(c, r),
            LevySpec::Gamma { theta, rate } => LevyIntensity::gamma_with_rate(theta, rate),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::beta_fn;
    use std::f64::consts::{E, PI};

    fn cfg() -> EvalConfig {
        EvalConfig::default()
    }

    fn quad() -> EvalConfig {
        EvalConfig::quadrature_only()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn eval_examples() {
        let sb = LevyIntensity::stable_beta(2.0, 1.0, 0.5).unwrap();
        let want = 4.0 / PI * 8.0 * 0.75f64.sqrt();
        assert!(rel(sb.eval(0.25).unwrap(), want) < 1e-14);
        // frozen reference value
        assert!(rel(sb.eval(0.25).unwrap(), 8.821_262_326_748_672_8) < 1e-14);
        let st = LevyIntensity::stable(1.0, 0.5).unwrap();
        assert!(rel(st.eval(4.0).unwrap(), 0.0625) < 1e-15);
        let g = LevyIntensity::gamma(1.0).unwrap();
        assert!(rel(g.eval(1.0).unwrap(), 1.0 / E) < 1e-15);
    }

    #[test]
    fn eval_outside_support() {
        let lg = LevyIntensity::log(1.0, 2.0).unwrap();
        assert_eq!(lg.eval(2.0).unwrap(), 0.0);
        assert_eq!(lg.eval(3.0).unwrap(), 0.0);
        assert!(lg.eval(0.0).is_err());
        assert!(lg.eval(-1.0).is_err());
        let sb = LevyIntensity::stable_beta(1.0, 1.0, 0.5).unwrap();
        assert_eq!(sb.eval(1.5).unwrap(), 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(LevyIntensity::stable_beta(0.0, 1.0, 0.5).is_err());
        assert!(LevyIntensity::stable_beta(1.0, 1.0, 1.0).is_err());
        assert!(LevyIntensity::stable(1.0, 0.0).is_err());
        assert!(LevyIntensity::log(1.0, -2.0).is_err());
        assert!(LevyIntensity::gamma(f64::NAN).is_err());
    }

    #[test]
    fn moment_examples() {
        for &(alpha, c, sigma) in &[(2.0, 1.0, 0.5), (0.7, 5.0, 0.1), (3.0, 0.5, 0.9)] {
            let sb = LevyIntensity::stable_beta(alpha, c, sigma).unwrap();
            assert!(rel(sb.moment(1.0, 0.0, &cfg()).unwrap(), alpha) < 1e-13);
            assert!(rel(sb.moment(1.0, 0.0, &quad()).unwrap(), alpha) < 1e-9);
        }
        for &sigma in &[0.25, 0.5, 0.75] {
            let st = LevyIntensity::stable(1.0, sigma).unwrap();
            for n in [0.0, 3.0, 10.0] {
                let want = sigma * beta_fn(1.0 - sigma, n + 1.0).unwrap();
                assert!(rel(st.moment(1.0, n, &cfg()).unwrap(), want) < 1e-13);
                assert!(rel(st.moment(1.0, n, &quad()).unwrap(), want) < 1e-9);
            }
        }
        let lg = LevyIntensity::log(1.0, 1.0).unwrap();
        assert!(rel(lg.moment(1.0, 0.0, &cfg()).unwrap(), 1.0) < 1e-14);
        assert!(rel(lg.moment(1.0, 0.0, &quad()).unwrap(), 1.0) < 1e-10);
    }

    #[test]
    fn moment_domain() {
        let st = LevyIntensity::stable(1.0, 0.5).unwrap();
        assert!(st.moment(0.5, 1.0, &cfg()).is_err());
        assert!(st.moment(0.4, 1.0, &quad()).is_err());
        assert!(st.moment(-1.0, 1.0, &cfg()).is_err());
        let g = LevyIntensity::gamma(1.0).unwrap();
        assert!(g.moment(0.0, 1.0, &cfg()).is_err());
    }

    #[test]
    fn scaled_moment_examples() {
        let st = LevyIntensity::stable(1.0, 0.5).unwrap();
        for route in [cfg(), quad()] {
            let v = st.scaled_moment(1.0, 1.0, 4.0, &route).unwrap();
            assert!(rel(v, 1.0 / 3.0) < 1e-9, "{v}");
        }
        let lg = LevyIntensity::log(2.0, 5.0).unwrap();
        for a in [0.01, 0.5, 1.0, 4.99] {
            for route in [cfg(), quad()] {
                assert!(rel(lg.scaled_moment(2.0, 3.0, a, &route).unwrap(), 0.1) < 1e-10);
            }
        }
    }

    #[test]
    fn custom_scaled_moment_matches_moment_of_scaled_intensity() {
        let raw = CustomIntensity::new(|s: f64| s.powf(-1.3) * (-s * s).exp(), -1.3);
        let lam = LevyIntensity::custom(raw).unwrap();
        for a in [0.3, 1.0, 2.5] {
            let direct = lam.scaled_moment(2.0, 4.0, a, &cfg()).unwrap();
            let raw_a = CustomIntensity::new(move |s: f64| a * (a * s).powf(-1.3) * (-(a * s) * (a * s)).exp(), -1.3);
            let lam_a = LevyIntensity::custom(raw_a).unwrap();
            let via = lam_a.moment(2.0, 4.0, &cfg()).unwrap();
            assert!(rel(direct, via) < 1e-10);
        }
    }

    #[test]
    fn stable_beta_scaled_has_accurate_end() {
        // a λ(a s) on (0, 1/a) for a = 2: substitute t = a s,
        // ∫₀^{1/2} s^p λ(2s) 2 ds = 2^{-p} ∫₀¹ t^p λ(t) dt for q = 0.
        let sb = LevyIntensity::stable_beta(1.0, 0.3, 0.4).unwrap();
        let v = sb.scaled_moment(2.0, 0.0, 2.0, &cfg()).unwrap();
        let want = 0.25 * sb.moment(2.0, 0.0, &cfg()).unwrap();
        assert!(rel(v, want) < 1e-10);
    }

    #[test]
    fn integrability_examples() {
        let tol = Tolerance::default();
        let st = LevyIntensity::stable(1.0, 0.5).unwrap().check_integrability(&tol);
        assert!(st.integrable && (st.value - 2.0).abs() < 1e-9);
        let lg = LevyIntensity::log(1.0, 2.0).unwrap().check_integrability(&tol);
        assert!(lg.integrable && (lg.value - (1.0 + 2f64.ln())).abs() < 1e-9);
        let bad = LevyIntensity {
            kind: LevyKind::Custom(CustomIntensity::new(|s: f64| s.powi(-2), -2.0).with_upper(1.0, 0.0)),
            upper: 1.0,
        };
        assert!(!bad.check_integrability(&tol).integrable);
        assert!(LevyIntensity::custom(CustomIntensity::new(|s: f64| s.powi(-2), -2.0).with_upper(1.0, 0.0)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"stable_beta","params":{"alpha":2,"c":1,"sigma":0.5}}"#;
        let lam = LevyIntensity::from_json(&serde_json::from_str(text).unwrap()).unwrap();
        assert_eq!(lam.spec(), Some(LevySpec::StableBeta { alpha: 2.0, c: 1.0, sigma: 0.5 }));
        let back = LevyIntensity::from_json(&lam.to_json().unwrap()).unwrap();
        assert_eq!(back.spec(), lam.spec());
        let restricted = LevyIntensity::stable(1.0, 0.5).unwrap().restricted_to(1.0).unwrap();
        let v = restricted.to_json().unwrap();
        assert_eq!(v["upper"], 1.0);
        assert_eq!(LevyIntensity::from_json(&v).unwrap().upper(), 1.0);
        let bad = serde_json::json!({"kind":"stable","params":{"C":1}});
        assert!(LevyIntensity::from_json(&bad).is_err());
    }
}
