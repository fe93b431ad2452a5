//! Offspring laws, the environment distribution, and exact moment functionals
//! of the log-mean offspring `X = ln m(ξ₀)`.
//!
//! Environments are finite mixtures of finite-support laws, so every moment
//! condition used by the deviation bounds is a finite weighted sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Reproduction law of one environment state: a finite-support pmf on `{1, 2, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffspringLaw {
    support: Vec<(u64, f64)>,
    mean: f64,
    variance: f64,
}

impl OffspringLaw {
    /// Validates and normalizes `(value, prob)` pairs. Support is stored sorted by value.
    pub fn new(points: &[(u64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        if let Some(&(v, _)) = points.iter().find(|(v, _)| *v == 0) {
            return Err(Error::ZeroOffspring(v));
        }
        for &(v, p) in points {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidLaw(format!(
                    "probability {p} for value {v} must be positive"
                )));
            }
        }
        let mut support = points.to_vec();
        support.sort_by_key(|&(v, _)| v);
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidLaw("support values must be distinct".into()));
        }
        let sum: f64 = support.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                what: "offspring probabilities",
                sum,
            });
        }
        for point in &mut support {
            point.1 /= sum;
        }
        let mean = support.iter().map(|&(v, p)| v as f64 * p).sum::<f64>();
        let variance = support
            .iter()
            .map(|&(v, p)| p * (v as f64 - mean).powi(2))
            .sum::<f64>();
        Ok(Self {
            support,
            mean,
            variance,
        })
    }

    pub fn point_mass(value: u64) -> Result<Self> {
        Self::new(&[(value, 1.0)])
    }

    pub fn support(&self) -> &[(u64, f64)] {
        &self.support
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn min_value(&self) -> u64 {
        self.support[0].0
    }

    pub fn max_value(&self) -> u64 {
        self.support[self.support.len() - 1].0
    }

    pub fn is_deterministic(&self) -> bool {
        self.support.len() == 1
    }
}

/// Builds an [`OffspringLaw`] from `(value, prob)` pairs.
pub fn make_offspring_law(points: &[(u64, f64)]) -> Result<OffspringLaw> {
    OffspringLaw::new(points)
}

/// The i.i.d. environment: a finite mixture of offspring laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentModel {
    states: Vec<OffspringLaw>,
    weights: Vec<f64>,
    log_means: Vec<f64>,
}

impl EnvironmentModel {
    pub fn new(states: Vec<OffspringLaw>, weights: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter(
                "environment needs at least one state".into(),
            ));
        }
        if states.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} states but {} weights",
                states.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "environment weight {w} must lie in (0, 1]"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                what: "environment weights",
                sum,
            });
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        let log_means: Vec<f64> = states.iter().map(|s| s.mean().ln()).collect();
        let mu: f64 = weights.iter().zip(&log_means).map(|(w, x)| w * x).sum();
        // All support points are >= 1, so ln m >= 0 and mu = 0 iff every state has m = 1.
        if mu <= 0.0 {
            return Err(Error::NotSupercritical { mu });
        }
        Ok(Self {
            states,
            weights,
            log_means,
        })
    }

    /// A one-state environment (classical Galton-Watson process).
    pub fn constant(law: OffspringLaw) -> Result<Self> {
        Self::new(vec![law], vec![1.0])
    }

    pub fn states(&self) -> &[OffspringLaw] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ln m(e)` for every state `e`.
    pub fn log_means(&self) -> &[f64] {
        &self.log_means
    }

    /// Support of `X = ln m(ξ₀)` as `(x, weight)` pairs, one per state.
    pub fn log_mean_support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.log_means
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn mu(&self) -> f64 {
        self.log_mean_support().map(|(x, w)| w * x).sum()
    }

    pub fn sigma2(&self) -> f64 {
        let mu = self.mu();
        self.log_mean_support()
            .map(|(x, w)| w * (x - mu).powi(2))
            .sum()
    }

    /// `E(X - mu)^k`.
    pub fn central_moment(&self, k: i32) -> f64 {
        let mu = self.mu();
        self.log_mean_support()
            .map(|(x, w)| w * (x - mu).powi(k))
            .sum()
    }

    /// `E|X - mu|^p`.
    pub fn abs_central_moment(&self, p: f64) -> f64 {
        let mu = self.mu();
        self.log_mean_support()
            .map(|(x, w)| w * (x - mu).abs().powf(p))
            .sum()
    }

    /// Endpoints `(L, U)` of the support of `X - mu`.
    pub fn centered_range(&self) -> (f64, f64) {
        let mu = self.mu();
        self.log_means
            .iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), &x| {
                (lo.min(x - mu), hi.max(x - mu))
            })
    }

    /// Largest offspring value over all states.
    pub fn max_offspring(&self) -> u64 {
        self.states.iter().map(|s| s.max_value()).max().unwrap_or(1)
    }
}

/// Exact functionals of `X = ln m₀` entering the deviation bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub mu: f64,
    pub sigma2: f64,
    /// Constant in Bernstein's moment condition; `max |X - mu|` unless a smaller one is supplied.
    pub bernstein_h: f64,
    pub alpha: f64,
    /// `E[(X-mu)^2 exp(((X-mu)^+)^alpha)] / sigma^2`.
    pub u: f64,
    pub p: f64,
    /// `E|X - mu|^p`.
    pub abs_p_moment: f64,
    /// `E|(X - mu)/sigma|^p`.
    pub std_abs_p_moment: f64,
    /// Lower endpoint `L <= 0` of `X - mu`.
    pub lower: f64,
    /// Upper endpoint `U >= 0` of `X - mu`.
    pub upper: f64,
}

impl MomentProfile {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Range `R = U - L` of `X - mu`, used wherever a two-sided bounded range enters.
    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }
}

pub const DEFAULT_K_MAX: u32 = 50;
pub const DEFAULT_H_TOL: f64 = 1e-9;

fn check_nondegenerate(env: &EnvironmentModel) -> Result<(f64, f64)> {
    let mu = env.mu();
    if mu <= 0.0 {
        return Err(Error::NotSupercritical { mu });
    }
    let sigma2 = env.sigma2();
    let scale = env
        .log_means()
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    if sigma2 <= (1e-12 * scale).powi(2) {
        return Err(Error::Degenerate { sigma2 });
    }
    Ok((mu, sigma2))
}

/// `E(X - mu)^k <= k!/2 * H^(k-2) * E(X - mu)^2` for every `k = 2..=k_max`.
pub fn bernstein_condition_holds(env: &EnvironmentModel, h: f64, k_max: u32) -> bool {
    let sigma2 = env.central_moment(2);
    let mut half_factorial = 1.0; // k!/2 at k = 2
    for k in 2..=k_max {
        if k > 2 {
            half_factorial *= k as f64;
        }
        let lhs = env.central_moment(k as i32);
        let rhs = half_factorial * h.powi(k as i32 - 2) * sigma2;
        if lhs > rhs {
            return false;
        }
    }
    true
}

pub fn moment_profile(
    env: &EnvironmentModel,
    alpha: f64,
    p: f64,
    k_max: u32,
) -> Result<MomentProfile> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    if k_max < 2 {
        return Err(Error::InvalidParameter("k_max must be at least 2".into()));
    }
    let (mu, sigma2) = check_nondegenerate(env)?;
    let (lower, upper) = env.centered_range();
    let bernstein_h = lower.abs().max(upper);
    if !bernstein_condition_holds(env, bernstein_h, k_max) {
        // max|X - mu| always satisfies the condition for bounded X.
        return Err(Error::HypothesisUnmet(format!(
            "Bernstein condition fails at H = {bernstein_h}"
        )));
    }
    let u = env
        .log_mean_support()
        .map(|(x, w)| {
            let d = x - mu;
            w * d * d * d.max(0.0).powf(alpha).exp()
        })
        .sum::<f64>()
        / sigma2;
    let abs_p_moment = env.abs_central_moment(p);
    let std_abs_p_moment = abs_p_moment / sigma2.powf(p / 2.0);
    Ok(MomentProfile {
        mu,
        sigma2,
        bernstein_h,
        alpha,
        u,
        p,
        abs_p_moment,
        std_abs_p_moment,
        lower,
        upper,
    })
}

/// Smallest `H` (to within `tol`) satisfying Bernstein's condition up to order `k_max`,
/// found by bisection on `[0, max|X - mu|]`. The upper end is always feasible.
pub fn minimal_bernstein_h(env: &EnvironmentModel, k_max: u32, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    check_nondegenerate(env)?;
    let (lower, upper) = env.centered_range();
    let mut hi = lower.abs().max(upper);
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if bernstein_condition_holds(env, mid, k_max) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn law(points: &[(u64, f64)]) -> OffspringLaw {
        OffspringLaw::new(points).unwrap()
    }

    fn m1() -> EnvironmentModel {
        EnvironmentModel::new(
            vec![law(&[(1, 0.5), (2, 0.5)]), law(&[(2, 0.6), (3, 0.4)])],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    fn one_or_two() -> EnvironmentModel {
        EnvironmentModel::new(vec![law(&[(1, 1.0)]), law(&[(2, 1.0)])], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn point_mass_mean() {
        assert_eq!(make_offspring_law(&[(2, 1.0)]).unwrap().mean(), 2.0);
    }

    #[test]
    fn two_point_mean() {
        assert_eq!(
            make_offspring_law(&[(1, 0.5), (2, 0.5)]).unwrap().mean(),
            1.5
        );
    }

    #[test]
    fn zero_offspring_rejected() {
        assert_eq!(
            make_offspring_law(&[(0, 0.3), (2, 0.7)]),
            Err(Error::ZeroOffspring(0))
        );
    }

    #[test]
    fn unnormalized_rejected() {
        assert!(matches!(
            make_offspring_law(&[(1, 0.5), (2, 0.6)]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            make_offspring_law(&[(1, 0.5), (1, 0.5)]),
            Err(Error::InvalidLaw(_))
        ));
    }

    #[test]
    fn critical_environment_rejected() {
        let r = EnvironmentModel::constant(law(&[(1, 1.0)]));
        assert!(matches!(r, Err(Error::NotSupercritical { .. })));
    }

    #[test]
    fn deterministic_environment_is_degenerate() {
        let env = EnvironmentModel::constant(law(&[(2, 1.0)])).unwrap();
        assert!(matches!(
            moment_profile(&env, 0.5, 2.0, 50),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn two_point_profile_by_hand() {
        let p = moment_profile(&one_or_two(), 0.5, 2.0, 50).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert_relative_eq!(p.mu, ln2 / 2.0, max_relative = 1e-15);
        assert_relative_eq!(p.sigma2, ln2 * ln2 / 4.0, max_relative = 1e-14);
        assert_relative_eq!(p.lower, -ln2 / 2.0, max_relative = 1e-15);
        assert_relative_eq!(p.upper, ln2 / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn m1_profile_matches_high_precision_sums() {
        // 40-digit evaluations of the two-point finite sums.
        let p = moment_profile(&m1(), 0.5, 1.5, 50).unwrap();
        assert_relative_eq!(p.mu, 0.640_466_922_731_032_2, max_relative = 1e-14);
        assert_relative_eq!(p.sigma2, 0.055_225_852_876_040_71, max_relative = 1e-13);
        assert_relative_eq!(p.upper, 0.235_001_814_622_867_8, max_relative = 1e-13);
        assert_relative_eq!(p.u, 1.311_900_629_979_752_3, max_relative = 1e-13);
        assert_relative_eq!(
            p.abs_p_moment,
            0.113_921_796_158_439_7,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            p.std_abs_p_moment * p.sigma2.powf(0.75),
            p.abs_p_moment,
            max_relative = 1e-10
        );
        assert_relative_eq!(p.bernstein_h, p.upper, max_relative = 1e-15);
    }

    #[test]
    fn centered_mean_vanishes() {
        assert!(m1().central_moment(1).abs() < 1e-12);
        assert!(one_or_two().central_moment(1).abs() < 1e-12);
    }

    #[test]
    fn profile_parameter_validation() {
        assert!(matches!(
            moment_profile(&m1(), 1.0, 2.0, 50),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            moment_profile(&m1(), 0.5, 1.0, 50),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn minimal_h_symmetric_two_point() {
        let env = one_or_two();
        let a = std::f64::consts::LN_2 / 2.0;
        let h = minimal_bernstein_h(&env, 50, 1e-9).unwrap();
        assert!(h <= a);
        assert!(bernstein_condition_holds(&env, h, 50));
        // Even moments a^k against k!/2 H^(k-2) a^2: k = 4 binds, H = a / sqrt(12).
        assert_relative_eq!(h, a / 12f64.sqrt(), max_relative = 1e-7);
    }

    #[test]
    fn minimal_h_m1_satisfies_every_order() {
        let env = m1();
        let h = minimal_bernstein_h(&env, 50, 1e-9).unwrap();
        let sigma2 = env.central_moment(2);
        let mut fact = 1.0;
        for k in 2..=50 {
            if k > 2 {
                fact *= k as f64;
            }
            assert!(
                env.central_moment(k) <= fact * h.powi(k - 2) * sigma2,
                "k = {k}"
            );
        }
        let (l, u) = env.centered_range();
        assert!(h <= l.abs().max(u));
    }

    #[test]
    fn minimal_h_with_k_max_two_is_tol_level() {
        let h = minimal_bernstein_h(&m1(), 2, 1e-9).unwrap();
        assert!(h > 0.0 && h <= 1e-9);
    }

    #[test]
    fn u_nondecreasing_in_alpha_when_positive_support_exceeds_one() {
        // X - mu = +-1.5 ln(20)/ln(20)... i.e. +-ln(20)/2 ~ 1.498 > 1.
        let env = EnvironmentModel::new(vec![law(&[(1, 1.0)]), law(&[(20, 1.0)])], vec![0.5, 0.5])
            .unwrap();
        let mut prev = 0.0;
        for i in 1..20 {
            let alpha = i as f64 / 20.0;
            let u = moment_profile(&env, alpha, 2.0, 50).unwrap().u;
            assert!(u >= prev);
            assert!(u >= 1.0);
            prev = u;
        }
    }
}
