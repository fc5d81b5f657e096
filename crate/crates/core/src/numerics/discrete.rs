//! Poisson helpers and a one-sample Kolmogorov–Smirnov statistic.

use rand::Rng;

use super::special::ln_factorial;

/// Uniform variate strictly inside `(0, 1)`, on the grid `(j + ½)·2^-53`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `ln Poisson(y; mean)`, with the `mean = 0` limit handled exactly.
pub fn poisson_log_pmf(y: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y as f64 * mean.ln() - mean - ln_factorial(y)
}

/// Largest count the Poisson sampler can return for a given mean.
pub fn poisson_truncation(mean: f64) -> u64 {
    (mean + 12.0 * mean.sqrt() + 30.0).ceil() as u64
}

/// Poisson variate by sequential inverse CDF, accumulating the pmf through its
/// ratio recurrence in log space. The draw is truncated at
/// [`poisson_truncation`].
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let u: f64 = rng.gen();
    let cap = poisson_truncation(mean);
    let ln_mean = mean.ln();
    let mut log_p = -mean;
    let mut cdf = 0.0;
    for y in 0..cap {
        cdf += log_p.exp();
        if u < cdf {
            return y;
        }
        log_p += ln_mean - ((y + 1) as f64).ln();
    }
    cap
}

/// `sup_x |F_n(x) − F(x)|` for a sample sorted ascending.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}
