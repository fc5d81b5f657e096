//! Special functions, quadrature and sampling primitives.

pub mod discrete;
pub mod quad;
pub mod special;
pub mod tabulated;

pub use discrete::{ks_statistic, open_unit, poisson_log_pmf, sample_poisson};
pub use quad::{
    integrate_halfline, integrate_halfline_vec, integrate_interval_vec, integrate_unit, integrate_unit_estimate,
    QuadEstimate, QuadratureSpec, Tolerance, VecEstimate,
};
pub use special::{beta_fn, ln_factorial, ln_gamma, log_beta, log_pochhammer};
pub use tabulated::{sample_from_tabulated, GridMap, TabulatedDensity};
