//! Trajectory simulation with log-space bookkeeping of `ln Z_n = S_n + ln W_n`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::{EnvironmentModel, MomentProfile, OffspringLaw};
use crate::rng::replica_rng;

/// Which normalization of `ln(Z_{n0+n} / Z_{n0})` a tail statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `(ln(Z_{n0+n}/Z_{n0}) - n mu) / (sigma sqrt(n))`
    Standardized,
    /// `ln(Z_{n0+n}/Z_{n0}) / n - mu`
    PerGeneration,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Standardized => "standardized",
            Scale::PerGeneration => "per_generation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    Reject,
    CltApprox,
}

/// What to do once the population outgrows exact sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthPolicy {
    pub exact_threshold: u64,
    pub mode: GrowthMode,
}

impl Default for GrowthPolicy {
    fn default() -> Self {
        Self {
            exact_threshold: 10_000_000,
            mode: GrowthMode::Reject,
        }
    }
}

impl GrowthPolicy {
    pub fn clt(exact_threshold: u64) -> Self {
        Self {
            exact_threshold,
            mode: GrowthMode::CltApprox,
        }
    }

    fn validate(&self, env: &EnvironmentModel) -> Result<()> {
        if self.exact_threshold == 0 {
            return Err(Error::InvalidParameter(
                "exact_threshold must be at least 1".into(),
            ));
        }
        if self
            .exact_threshold
            .checked_mul(env.max_offspring())
            .is_none()
        {
            return Err(Error::InvalidParameter(format!(
                "exact_threshold {} times the largest offspring value overflows u64",
                self.exact_threshold
            )));
        }
        Ok(())
    }
}

/// One realized path `k = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    z: Vec<Option<u64>>,
    ln_z: Vec<f64>,
    env_idx: Vec<usize>,
    s: Vec<f64>,
    ln_w: Vec<f64>,
    approx: Vec<bool>,
}

impl Trajectory {
    /// Number of generations `N`.
    pub fn generations(&self) -> usize {
        self.env_idx.len()
    }

    /// Exact population sizes; `None` from the first approximated generation on.
    pub fn z(&self) -> &[Option<u64>] {
        &self.z
    }

    pub fn ln_z(&self) -> &[f64] {
        &self.ln_z
    }

    /// Environment state indices `ξ_0..ξ_{N-1}`.
    pub fn env_idx(&self) -> &[usize] {
        &self.env_idx
    }

    /// Associated random walk `S_0..S_N`.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn ln_w(&self) -> &[f64] {
        &self.ln_w
    }

    /// `approx[k]` is true when `Z_k` came from the normal approximation.
    pub fn approx(&self) -> &[bool] {
        &self.approx
    }

    /// First generation whose population was approximated, if any.
    pub fn first_approx(&self) -> Option<usize> {
        self.approx.iter().position(|&a| a)
    }

    /// `ln(Z_{n0+n} / Z_{n0})`.
    pub fn log_ratio(&self, n0: usize, n: usize) -> Result<f64> {
        if n == 0 || n0 + n > self.generations() {
            return Err(Error::InvalidParameter(format!(
                "window n0 = {n0}, n = {n} outside trajectory of {} generations",
                self.generations()
            )));
        }
        Ok(self.ln_z[n0 + n] - self.ln_z[n0])
    }
}

/// `ln z` for an exact population size; shared by the simulator and the enumeration
/// oracle so both produce bit-identical statistics.
pub fn ln_population(z: u64) -> f64 {
    (z as f64).ln()
}

/// Sum of `z` i.i.d. draws from `law`, sampled through the multinomial vector of
/// per-support-point counts (sequential conditional binomials).
pub fn offspring_sum_sample<R: Rng + ?Sized>(law: &OffspringLaw, z: u64, rng: &mut R) -> u64 {
    let support = law.support();
    let mut remaining = z;
    let mut remaining_prob = 1.0;
    let mut total = 0u64;
    for (j, &(value, prob)) in support.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let count = if j + 1 == support.len() {
            remaining
        } else {
            let q = (prob / remaining_prob).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .expect("conditional probability lies in [0, 1]")
                .sample(rng)
        };
        total += count * value;
        remaining -= count;
        remaining_prob -= prob;
    }
    total
}

/// Reusable simulator for one environment and growth policy.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    env: &'a EnvironmentModel,
    cumulative: Vec<f64>,
    policy: GrowthPolicy,
}

impl<'a> Simulator<'a> {
    pub fn new(env: &'a EnvironmentModel, policy: GrowthPolicy) -> Result<Self> {
        policy.validate(env)?;
        let mut acc = 0.0;
        let cumulative = env
            .weights()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            env,
            cumulative,
            policy,
        })
    }

    pub fn env(&self) -> &EnvironmentModel {
        self.env
    }

    pub fn policy(&self) -> GrowthPolicy {
        self.policy
    }

    fn draw_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    pub fn simulate(&self, generations: usize, seed: u64, replica_id: u64) -> Result<Trajectory> {
        if generations == 0 {
            return Err(Error::InvalidParameter(
                "trajectory needs at least one generation".into(),
            ));
        }
        let mut rng = replica_rng(seed, replica_id);
        let cap = generations + 1;
        let mut traj = Trajectory {
            z: Vec::with_capacity(cap),
            ln_z: Vec::with_capacity(cap),
            env_idx: Vec::with_capacity(generations),
            s: Vec::with_capacity(cap),
            ln_w: Vec::with_capacity(cap),
            approx: Vec::with_capacity(cap),
        };
        traj.z.push(Some(1));
        traj.ln_z.push(0.0);
        traj.s.push(0.0);
        traj.ln_w.push(0.0);
        traj.approx.push(false);

        let mut exact = Some(1u64);
        let mut ln_z: f64 = 0.0;
        let mut s = 0.0;
        let mut ln_w = 0.0;
        for k in 0..generations {
            let state = self.draw_state(&mut rng);
            let law = &self.env.states()[state];
            let m = law.mean();
            let ln_m = self.env.log_means()[state];

            let (next_exact, next_ln_z, w_increment) = match exact {
                Some(z) if z <= self.policy.exact_threshold => {
                    let next = offspring_sum_sample(law, z, &mut rng);
                    let expected = z as f64 * m;
                    let inc = ((next as f64 - expected) / expected).ln_1p();
                    (Some(next), ln_population(next), inc)
                }
                _ => {
                    if self.policy.mode == GrowthMode::Reject {
                        return Err(Error::ThresholdExceeded {
                            generation: k,
                            population: exact.unwrap_or(u64::MAX),
                            threshold: self.policy.exact_threshold,
                        });
                    }
                    // Z' ~ N(Z m, Z var) written multiplicatively in log space:
                    // Z' = Z m (1 + eps sqrt(var / Z) / m); never below Z * min_value.
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    let rel_sd = (law.variance() / ln_z.exp()).sqrt() / m;
                    let floor = (law.min_value() as f64 / m).ln();
                    let inc = (eps * rel_sd).max(-1.0 + f64::EPSILON).ln_1p().max(floor);
                    (None, ln_z + ln_m + inc, inc)
                }
            };
            s += ln_m;
            ln_w += w_increment;
            ln_z = next_ln_z;
            exact = next_exact;
            traj.env_idx.push(state);
            traj.z.push(exact);
            traj.ln_z.push(ln_z);
            traj.s.push(s);
            traj.ln_w.push(ln_w);
            traj.approx.push(exact.is_none());
        }
        Ok(traj)
    }
}

pub fn simulate_trajectory(
    env: &EnvironmentModel,
    generations: usize,
    policy: GrowthPolicy,
    seed: u64,
    replica_id: u64,
) -> Result<Trajectory> {
    Simulator::new(env, policy)?.simulate(generations, seed, replica_id)
}

/// Centering and scaling constants of the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mu: f64,
    pub sigma: f64,
}

impl Standardizer {
    pub fn from_profile(profile: &MomentProfile) -> Self {
        Self {
            mu: profile.mu,
            sigma: profile.sigma(),
        }
    }

    /// Uses the environment's exact `mu` and `sigma`; `sigma` may be zero.
    pub fn from_env(env: &EnvironmentModel) -> Self {
        Self {
            mu: env.mu(),
            sigma: env.sigma2().sqrt(),
        }
    }

    /// `(ln_ratio - n mu) / (sigma sqrt(n))`. With `sigma = 0` the statistic is a point
    /// mass at 0 when the deviation is at rounding level, and `±inf` otherwise.
    pub fn standardized(&self, ln_ratio: f64, n: usize) -> f64 {
        let nf = n as f64;
        let dev = ln_ratio - nf * self.mu;
        if self.sigma > 0.0 {
            dev / (self.sigma * nf.sqrt())
        } else if dev.abs() <= 1e-9 * (1.0 + nf * self.mu.abs()) {
            0.0
        } else {
            dev.signum() * f64::INFINITY
        }
    }

    pub fn per_generation(&self, ln_ratio: f64, n: usize) -> f64 {
        ln_ratio / n as f64 - self.mu
    }

    pub fn statistic(&self, ln_ratio: f64, n: usize, scale: Scale) -> f64 {
        match scale {
            Scale::Standardized => self.standardized(ln_ratio, n),
            Scale::PerGeneration => self.per_generation(ln_ratio, n),
        }
    }
}

/// Realization of `(ln(Z_{n0+n}/Z_{n0}) - n mu) / (sigma sqrt(n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardizedStat {
    pub value: f64,
}

pub fn standardized_statistic(
    traj: &Trajectory,
    n0: usize,
    n: usize,
    profile: &MomentProfile,
) -> Result<StandardizedStat> {
    let ln_ratio = traj.log_ratio(n0, n)?;
    Ok(StandardizedStat {
        value: Standardizer::from_profile(profile).standardized(ln_ratio, n),
    })
}

pub const TRAJECTORY_CSV_HEADER: [&str; 8] = [
    "replica", "k", "z", "ln_z", "s", "ln_w", "env_idx", "approx",
];

/// One row per generation. `z` is empty once the population is tracked only through
/// `ln_z`; `env_idx` on row `k` is the state driving generation `k -> k+1`.
pub fn write_trajectories_csv<'t, W, I>(out: W, trajectories: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (u64, &'t Trajectory)>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_CSV_HEADER)?;
    for (replica, t) in trajectories {
        for k in 0..=t.generations() {
            w.write_record([
                replica.to_string(),
                k.to_string(),
                t.z[k].map(|z| z.to_string()).unwrap_or_default(),
                t.ln_z[k].to_string(),
                t.s[k].to_string(),
                t.ln_w[k].to_string(),
                t.env_idx.get(k).map(|e| e.to_string()).unwrap_or_default(),
                t.approx[k].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use crate::offspring::{moment_profile, EnvironmentModel, OffspringLaw};
    use approx::assert_relative_eq;

    fn doubling() -> EnvironmentModel {
        EnvironmentModel::constant(OffspringLaw::point_mass(2).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_law_sum() {
        let law = OffspringLaw::point_mass(2).unwrap();
        let mut rng = replica_rng(1, 0);
        for _ in 0..10 {
            assert_eq!(offspring_sum_sample(&law, 5, &mut rng), 10);
        }
    }

    #[test]
    fn two_fold_convolution_frequencies() {
        // Exact pmf of the sum of two draws from {1: .5, 2: .5}: {2: .25, 3: .5, 4: .25}.
        let law = OffspringLaw::new(&[(1, 0.5), (2, 0.5)]).unwrap();
        let mut rng = replica_rng(11, 0);
        let reps = 200_000;
        let mut counts = [0u32; 5];
        for _ in 0..reps {
            counts[offspring_sum_sample(&law, 2, &mut rng) as usize] += 1;
        }
        assert_eq!(counts[0] + counts[1], 0);
        for (v, p) in [(2, 0.25), (3, 0.5), (4, 0.25)] {
            let phat = counts[v] as f64 / reps as f64;
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((phat - p).abs() <= 4.0 * se, "value {v}: {phat} vs {p}");
        }
    }

    #[test]
    fn large_population_sum_mean() {
        let law = OffspringLaw::new(&[(1, 0.5), (2, 0.5)]).unwrap();
        let z = 1_000_000u64;
        let reps = 1000;
        let ratios: Vec<f64> = (0..reps)
            .map(|r| offspring_sum_sample(&law, z, &mut replica_rng(5, r)) as f64 / z as f64)
            .collect();
        let mean = ratios.iter().sum::<f64>() / reps as f64;
        // sd of the ratio is sqrt(var / z) = 0.5e-3.
        let se = 0.5e-3 / (reps as f64).sqrt();
        assert!((mean - 1.5).abs() <= 4.0 * se);
    }

    #[test]
    fn deterministic_doubling_trajectory() {
        let t = simulate_trajectory(&doubling(), 4, GrowthPolicy::default(), 1, 0).unwrap();
        let z: Vec<u64> = t.z().iter().map(|z| z.unwrap()).collect();
        assert_eq!(z, vec![1, 2, 4, 8, 16]);
        assert!(t.ln_w().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn deterministic_offspring_has_unit_normalization() {
        let env = benchmarks::m2();
        for r in 0..50 {
            let t = simulate_trajectory(&env, 3, GrowthPolicy::default(), 9, r).unwrap();
            assert!(t.ln_w().iter().all(|&w| w == 0.0));
            assert_relative_eq!(t.ln_z()[3], t.s()[3], max_relative = 1e-14);
        }
    }

    #[test]
    fn walk_increments_follow_environment() {
        let env = benchmarks::m1();
        let t = simulate_trajectory(&env, 20, GrowthPolicy::default(), 3, 0).unwrap();
        assert_eq!(t.s()[0], 0.0);
        for k in 1..=20 {
            let expected = t.s()[k - 1] + env.log_means()[t.env_idx()[k - 1]];
            assert_eq!(t.s()[k], expected);
            assert!(t.z()[k].unwrap() >= t.z()[k - 1].unwrap());
        }
    }

    #[test]
    fn reject_policy_reports_threshold() {
        let policy = GrowthPolicy {
            exact_threshold: 8,
            mode: GrowthMode::Reject,
        };
        let err = simulate_trajectory(&doubling(), 6, policy, 1, 0).unwrap_err();
        assert_eq!(
            err,
            Error::ThresholdExceeded {
                generation: 4,
                population: 16,
                threshold: 8
            }
        );
    }

    #[test]
    fn clt_policy_flags_and_keeps_decomposition() {
        let env = benchmarks::m1();
        let t = simulate_trajectory(&env, 60, GrowthPolicy::clt(1000), 4, 2).unwrap();
        let first = t.first_approx().expect("population must outgrow 1000");
        assert!(t.approx()[first..].iter().all(|&a| a));
        assert!(t.z()[first..].iter().all(|z| z.is_none()));
        for k in 0..=60 {
            let resid = t.ln_z()[k] - t.s()[k] - t.ln_w()[k];
            assert!(resid.abs() <= 1e-9, "k = {k}: {resid}");
        }
    }

    #[test]
    fn standardized_statistic_examples() {
        let env = benchmarks::m2();
        let t = simulate_trajectory(&doubling(), 5, GrowthPolicy::default(), 1, 0).unwrap();
        let ln2 = std::f64::consts::LN_2;
        let mut profile = moment_profile(&env, 0.5, 2.0, 50).unwrap();
        profile.mu = ln2;
        for (n0, n) in [(0, 1), (1, 3), (2, 3)] {
            let v = standardized_statistic(&t, n0, n, &profile).unwrap().value;
            assert!(v.abs() < 1e-14);
        }
        // n = 1, Z_{n0} = 1, Z_{n0+1} = 2, mu = 0.5, sigma = 1.
        let sd = Standardizer {
            mu: 0.5,
            sigma: 1.0,
        };
        assert_relative_eq!(
            sd.standardized(ln_population(2) - ln_population(1), 1),
            0.193_147_180_559_945_3,
            max_relative = 1e-14
        );
        let wide = Standardizer {
            mu: 0.5,
            sigma: 2.0,
        };
        assert_relative_eq!(wide.standardized(ln2, 1), 0.5 * sd.standardized(ln2, 1));
        assert!(standardized_statistic(&t, 3, 3, &profile).is_err());
    }

    #[test]
    fn csv_header_is_pinned() {
        let t = simulate_trajectory(&doubling(), 2, GrowthPolicy::default(), 1, 0).unwrap();
        let mut buf = Vec::new();
        write_trajectories_csv(&mut buf, [(0, &t)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("replica,k,z,ln_z,s,ln_w,env_idx,approx"));
        assert_eq!(lines.next(), Some("0,0,1,0,0,0,0,false"));
        assert_eq!(lines.count(), 2);
    }
}
