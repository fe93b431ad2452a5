//! One-sided confidence intervals for `mu` and prediction intervals for `Z_{n0+n}`.
//!
//! `sigma`, `H` and `R` are taken as known inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::ln_population;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// `[A_n, inf)` covering `mu`.
    MuLower,
    /// `[1, A_n]` covering `Z_{n0+n}`.
    ZUpper,
}

impl IntervalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalKind::MuLower => "mu_lower",
            IntervalKind::ZUpper => "z_upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub kind: IntervalKind,
    pub n: usize,
    pub n0: usize,
    pub delta: f64,
    pub delta_n: f64,
    /// Endpoint `A_n`; for `z_upper` this may overflow to `inf`, see `ln_a_n`.
    pub a_n: f64,
    /// `A_n` itself for `mu_lower`, `ln A_n` for `z_upper`.
    pub ln_a_n: f64,
}

impl IntervalResult {
    pub fn with_n0(mut self, n0: usize) -> Self {
        self.n0 = n0;
        self
    }

    /// Whether the interval contains `mu` (for `mu_lower`) or the population whose
    /// logarithm is `ln_target` (for `z_upper`).
    pub fn contains(&self, target: f64) -> bool {
        match self.kind {
            IntervalKind::MuLower => self.a_n <= target,
            IntervalKind::ZUpper => target <= self.ln_a_n,
        }
    }
}

pub const INTERVAL_CSV_HEADER: [&str; 6] = ["kind", "n", "n0", "delta", "delta_n", "a_n"];

/// `ln(2 / delta)` for `delta` in `(0, 1]`.
fn log_two_over(delta: f64) -> Result<f64> {
    if delta > 0.0 && delta <= 1.0 {
        Ok((2.0 / delta).ln())
    } else {
        Err(Error::Domain(format!("delta = {delta} must lie in (0, 1]")))
    }
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        Err(Error::Domain("n must be at least 1".into()))
    } else {
        Ok(n as f64)
    }
}

fn check_positive(value: f64, name: &str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {value} must be positive")))
    }
}

/// Positive root `Delta` of `2 exp{-n Delta^2 / (2 (sigma^2 + 6 (1 + H) Delta))} = delta`.
pub fn delta_bernstein(n: usize, delta: f64, sigma: f64, h: f64) -> Result<f64> {
    let nf = check_n(n)?;
    let l = log_two_over(delta)?;
    check_positive(sigma, "sigma")?;
    check_positive(h, "H")?;
    let a = 6.0 * (1.0 + h) * l / nf;
    Ok(a + (a * a + 2.0 * sigma * sigma * l / nf).sqrt())
}

/// Risk certified by the Bernstein-type bound for half-width `delta_n`.
pub fn bernstein_risk(n: usize, delta_n: f64, sigma: f64, h: f64) -> f64 {
    let nf = n as f64;
    2.0 * (-nf * delta_n * delta_n / (2.0 * (sigma * sigma + 6.0 * (1.0 + h) * delta_n))).exp()
}

/// Risk certified by the bounded-increment bound for half-width `delta_n`.
pub fn bounded_risk(n: usize, delta_n: f64, r: f64) -> f64 {
    2.0 * (-(n as f64) * delta_n * delta_n / (2.0 * r * r)).exp()
}

/// Smallest risk the bounded-increment interval can certify at `n`: `2 exp{-n R^2 / 2}`.
pub fn bounded_min_delta(n: usize, r: f64) -> f64 {
    2.0 * (-(n as f64) * r * r / 2.0).exp()
}

/// `R sqrt(2 ln(2/delta) / n)`, the positive root of `2 exp{-n Delta^2 / (2 R^2)} = delta`,
/// without the admissibility check of [`delta_bounded`].
pub fn solve_bounded_half_width(n: usize, delta: f64, r: f64) -> Result<f64> {
    let nf = check_n(n)?;
    let l = log_two_over(delta)?;
    check_positive(r, "R")?;
    Ok(r * (2.0 * l / nf).sqrt())
}

/// Bounded-increment half-width for `delta` in `[2 exp{-n R^2 / 2}, 1]`.
pub fn delta_bounded(n: usize, delta: f64, r: f64) -> Result<f64> {
    let half_width = solve_bounded_half_width(n, delta, r)?;
    let min_delta = bounded_min_delta(n, r);
    if delta < min_delta * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "delta = {delta} is below the smallest certifiable risk {min_delta:e} at n = {n}, R = {r}"
        )));
    }
    Ok(half_width)
}

fn check_populations(z_n0: u64, z_n0_plus_n: u64) -> Result<()> {
    if z_n0 == 0 || z_n0_plus_n == 0 {
        return Err(Error::Domain("populations must be at least 1".into()));
    }
    Ok(())
}

/// `[A_n, inf)` with `A_n = ln_ratio / n - delta_n`.
pub fn mu_lower_from_log_ratio(
    ln_ratio: f64,
    n: usize,
    delta: f64,
    delta_n: f64,
) -> IntervalResult {
    let a_n = ln_ratio / n as f64 - delta_n;
    IntervalResult {
        kind: IntervalKind::MuLower,
        n,
        n0: 0,
        delta,
        delta_n,
        a_n,
        ln_a_n: a_n,
    }
}

/// `[1, A_n]` with `ln A_n = ln_z_n0 + n (mu + delta_n)`.
pub fn z_upper_from_log(
    ln_z_n0: f64,
    n: usize,
    mu: f64,
    delta: f64,
    delta_n: f64,
) -> IntervalResult {
    let ln_a_n = ln_z_n0 + n as f64 * (mu + delta_n);
    IntervalResult {
        kind: IntervalKind::ZUpper,
        n,
        n0: 0,
        delta,
        delta_n,
        a_n: ln_a_n.exp(),
        ln_a_n,
    }
}

pub fn ci_mu_bernstein(
    z_n0: u64,
    z_n0_plus_n: u64,
    n: usize,
    delta: f64,
    sigma: f64,
    h: f64,
) -> Result<IntervalResult> {
    check_populations(z_n0, z_n0_plus_n)?;
    let delta_n = delta_bernstein(n, delta, sigma, h)?;
    let ln_ratio = ln_population(z_n0_plus_n) - ln_population(z_n0);
    Ok(mu_lower_from_log_ratio(ln_ratio, n, delta, delta_n))
}

pub fn ci_mu_bounded(
    z_n0: u64,
    z_n0_plus_n: u64,
    n: usize,
    delta: f64,
    r: f64,
) -> Result<IntervalResult> {
    check_populations(z_n0, z_n0_plus_n)?;
    let delta_n = delta_bounded(n, delta, r)?;
    let ln_ratio = ln_population(z_n0_plus_n) - ln_population(z_n0);
    Ok(mu_lower_from_log_ratio(ln_ratio, n, delta, delta_n))
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("mu = {mu} must be positive")))
    }
}

pub fn predict_z_bernstein(
    z_n0: u64,
    n: usize,
    mu: f64,
    delta: f64,
    sigma: f64,
    h: f64,
) -> Result<IntervalResult> {
    check_populations(z_n0, 1)?;
    check_mu(mu)?;
    let delta_n = delta_bernstein(n, delta, sigma, h)?;
    Ok(z_upper_from_log(ln_population(z_n0), n, mu, delta, delta_n))
}

pub fn predict_z_bounded(
    z_n0: u64,
    n: usize,
    mu: f64,
    delta: f64,
    r: f64,
) -> Result<IntervalResult> {
    check_populations(z_n0, 1)?;
    check_mu(mu)?;
    let delta_n = delta_bounded(n, delta, r)?;
    Ok(z_upper_from_log(ln_population(z_n0), n, mu, delta, delta_n))
}

pub fn write_intervals_csv<W: std::io::Write>(out: W, intervals: &[IntervalResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INTERVAL_CSV_HEADER)?;
    for r in intervals {
        w.write_record([
            r.kind.as_str().to_string(),
            r.n.to_string(),
            r.n0.to_string(),
            r.delta.to_string(),
            r.delta_n.to_string(),
            r.a_n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::bernstein_bound;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bernstein_half_width_example() {
        let l = 40f64.ln();
        let expected = 0.12 * l + (144e-4 * l * l + 0.02 * l).sqrt();
        assert_relative_eq!(
            delta_bernstein(100, 0.05, 1.0, 1.0).unwrap(),
            expected,
            max_relative = 1e-15
        );
        let at_one = delta_bernstein(100, 1.0, 1.0, 1.0).unwrap();
        let l = 2f64.ln();
        assert_relative_eq!(
            at_one,
            0.12 * l + (144e-4 * l * l + 0.02 * l).sqrt(),
            max_relative = 1e-15
        );
        assert!(delta_bernstein(100, 0.0, 1.0, 1.0).is_err());
        assert!(delta_bernstein(100, 1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn bounded_half_width_examples() {
        let d = 2.0 / std::f64::consts::E;
        assert_relative_eq!(delta_bounded(2, d, 1.0).unwrap(), 1.0, max_relative = 1e-15);
        for (n, r) in [(20usize, 0.5), (10, 1.0), (3, 2.0)] {
            let boundary = bounded_min_delta(n, r);
            assert_relative_eq!(
                delta_bounded(n, boundary, r).unwrap(),
                r * r,
                max_relative = 1e-12
            );
            assert!(matches!(
                delta_bounded(n, boundary * 0.9, r),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn half_widths_match_standardized_bound() {
        for (n, delta, sigma, h) in [
            (10usize, 0.05, 1.0, 1.0),
            (100, 0.2, 0.5, 2.0),
            (1000, 0.01, 2.0, 0.5),
        ] {
            let target = delta_bernstein(n, delta, sigma, h).unwrap();
            // Bisection on the standardized bound, then rescaled by sigma / sqrt(n).
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while bernstein_bound(hi, n, sigma, h).unwrap().value() > delta {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if bernstein_bound(mid, n, sigma, h).unwrap().value() > delta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let rescaled = 0.5 * (lo + hi) * sigma / (n as f64).sqrt();
            assert_relative_eq!(rescaled, target, max_relative = 1e-10);
        }
    }

    #[test]
    fn noiseless_intervals() {
        let (mu, n) = (0.5, 10usize);
        let r = mu_lower_from_log_ratio(n as f64 * mu, n, 0.1, 0.3);
        assert_relative_eq!(r.a_n, mu - 0.3, max_relative = 1e-15);
        assert!(r.contains(mu));
        let p = z_upper_from_log(0.0, n, mu, 0.1, 0.0);
        assert_relative_eq!(p.a_n, (n as f64 * mu).exp(), max_relative = 1e-15);
        let a = predict_z_bernstein(1, 5, mu, 0.1, 1.0, 1.0).unwrap();
        let b = predict_z_bernstein(7, 5, mu, 0.1, 1.0, 1.0).unwrap();
        assert_relative_eq!(b.a_n, 7.0 * a.a_n, max_relative = 1e-14);
        assert!(predict_z_bounded(1, 5, mu, 0.5, 1.0).unwrap().a_n >= 1.0);
    }

    #[test]
    fn endpoints_are_monotone() {
        let lo = ci_mu_bernstein(3, 100, 8, 0.1, 1.0, 1.0).unwrap();
        let hi = ci_mu_bernstein(3, 101, 8, 0.1, 1.0, 1.0).unwrap();
        assert!(hi.a_n > lo.a_n);
        let wide = ci_mu_bounded(3, 100, 32, 0.05, 1.0).unwrap();
        let narrow = ci_mu_bounded(3, 100, 32, 0.1, 1.0).unwrap();
        assert!(wide.a_n < narrow.a_n);
        let small = predict_z_bounded(2, 32, 0.3, 0.1, 0.5).unwrap();
        let large = predict_z_bounded(2, 32, 0.3, 0.1, 0.6).unwrap();
        assert!(large.a_n > small.a_n);
    }

    proptest! {
        #[test]
        fn residuals(n in 1usize..5000, delta in 1e-6f64..1.0, sigma in 0.05f64..5.0, h in 0.05f64..5.0, r in 0.05f64..5.0) {
            let d = delta_bernstein(n, delta, sigma, h).unwrap();
            prop_assert!((bernstein_risk(n, d, sigma, h) / delta - 1.0).abs() <= 1e-10);
            let d = solve_bounded_half_width(n, delta, r).unwrap();
            prop_assert!((bounded_risk(n, d, r) / delta - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn half_width_monotone(n in 1usize..5000, delta in 1e-6f64..0.99, sigma in 0.05f64..5.0, h in 0.05f64..5.0) {
            let base = delta_bernstein(n, delta, sigma, h).unwrap();
            prop_assert!(delta_bernstein(n + 1, delta, sigma, h).unwrap() < base);
            prop_assert!(delta_bernstein(n, delta * 0.9, sigma, h).unwrap() > base);
            let base = solve_bounded_half_width(n, delta, 1.0).unwrap();
            prop_assert!(solve_bounded_half_width(n + 1, delta, 1.0).unwrap() < base);
            prop_assert!(solve_bounded_half_width(n, delta * 0.9, 1.0).unwrap() > base);
        }
    }
}
