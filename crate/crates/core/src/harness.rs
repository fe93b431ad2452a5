//! Monte Carlo verification: empirical tails, bound domination, interval coverage,
//! the martingale normalization and the normal-tail diagnostic.
//!
//! Replica `i` always draws from stream `i` of the run seed and results are combined
//! in replica order, so reports are identical for any number of worker threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{evaluate, BoundConstants, Theorem};
use crate::error::{Error, Result};
use crate::intervals::{
    delta_bernstein, delta_bounded, mu_lower_from_log_ratio, z_upper_from_log, IntervalKind,
};
use crate::offspring::{bernstein_condition_holds, EnvironmentModel, DEFAULT_K_MAX};
use crate::process::{GrowthMode, GrowthPolicy, Scale, Simulator, Standardizer};
use crate::stats::{binomial_se, normal_upper_tail, CompensatedSum};

pub const SCHEMA_VERSION: u32 = 1;

/// Per-replica `ln Z_k` at a fixed set of generations.
#[derive(Debug, Clone)]
struct Row {
    ln_z: Vec<f64>,
    first_approx: Option<usize>,
}

/// Simulated replicas shared by every estimate of one run.
#[derive(Debug, Clone)]
pub struct SampleSet {
    seed: u64,
    generations: Vec<usize>,
    rows: Vec<Option<Row>>,
}

impl SampleSet {
    /// Simulates `replicas` trajectories and keeps `ln Z_k` for each `k` in `generations`.
    /// Replicas rejected by the growth policy are kept as gaps and counted.
    pub fn simulate(
        env: &EnvironmentModel,
        generations: &[usize],
        replicas: u64,
        seed: u64,
        policy: GrowthPolicy,
    ) -> Result<Self> {
        if replicas == 0 {
            return Err(Error::InvalidParameter(
                "replicas must be at least 1".into(),
            ));
        }
        let mut generations = generations.to_vec();
        generations.sort_unstable();
        generations.dedup();
        let horizon = *generations
            .last()
            .ok_or_else(|| Error::InvalidParameter("no generations requested".into()))?;
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let sim = Simulator::new(env, policy)?;
        let rows = (0..replicas)
            .into_par_iter()
            .map(|id| match sim.simulate(horizon, seed, id) {
                Ok(traj) => Ok(Some(Row {
                    ln_z: generations.iter().map(|&k| traj.ln_z()[k]).collect(),
                    first_approx: traj.first_approx(),
                })),
                Err(Error::ThresholdExceeded { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seed,
            generations,
            rows,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicas(&self) -> u64 {
        self.rows.len() as u64
    }

    pub fn rejected(&self) -> u64 {
        self.rows.iter().filter(|r| r.is_none()).count() as u64
    }

    fn index(&self, k: usize) -> Result<usize> {
        self.generations.binary_search(&k).map_err(|_| {
            Error::InvalidParameter(format!("generation {k} was not retained in the sample"))
        })
    }

    /// `(ln(Z_{n0+n}/Z_{n0}), exact)` per accepted replica, in replica order.
    fn log_ratios(&self, n0: usize, n: usize) -> Result<Vec<(f64, bool)>> {
        let (i0, i1) = (self.index(n0)?, self.index(n0 + n)?);
        Ok(self
            .rows
            .iter()
            .flatten()
            .map(|row| {
                let exact = row.first_approx.is_none_or(|k| k > n0 + n);
                (row.ln_z[i1] - row.ln_z[i0], exact)
            })
            .collect())
    }

    /// `ln Z_{n0}` and `ln Z_{n0+n}` per accepted replica.
    fn endpoints(&self, n0: usize, n: usize) -> Result<Vec<(f64, f64)>> {
        let (i0, i1) = (self.index(n0)?, self.index(n0 + n)?);
        Ok(self
            .rows
            .iter()
            .flatten()
            .map(|row| (row.ln_z[i0], row.ln_z[i1]))
            .collect())
    }

    /// Empirical `P(statistic >= x)` for each `x`, one pass over the replicas.
    pub fn tails(
        &self,
        n0: usize,
        n: usize,
        xs: &[f64],
        scale: Scale,
        standardizer: &Standardizer,
    ) -> Result<Vec<TailEstimate>> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let stats: Vec<(f64, bool)> = self
            .log_ratios(n0, n)?
            .into_iter()
            .map(|(r, exact)| (standardizer.statistic(r, n, scale), exact))
            .collect();
        let accepted = stats.len() as u64;
        if accepted == 0 {
            return Err(Error::Domain(
                "every replica was rejected by the growth policy".into(),
            ));
        }
        let exact_replicas = stats.iter().filter(|s| s.1).count() as u64;
        Ok(xs
            .iter()
            .map(|&x| {
                let hits = stats.iter().filter(|s| s.0 >= x).count() as u64;
                let exact_hits = stats.iter().filter(|s| s.1 && s.0 >= x).count() as u64;
                let p_hat = hits as f64 / accepted as f64;
                let exact_p_hat =
                    (exact_replicas > 0).then(|| exact_hits as f64 / exact_replicas as f64);
                TailEstimate {
                    x,
                    scale,
                    p_hat,
                    replicas: accepted,
                    std_err: binomial_se(p_hat, accepted),
                    seed: self.seed,
                    n0,
                    n,
                    exact_replicas,
                    rejected: self.rejected(),
                    exact_p_hat,
                    exact_std_err: exact_p_hat.map(|p| binomial_se(p, exact_replicas)),
                }
            })
            .collect())
    }
}

/// Empirical counterpart of `P(statistic >= x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub x: f64,
    pub scale: Scale,
    pub p_hat: f64,
    /// Replicas entering `p_hat` (rejected ones excluded).
    pub replicas: u64,
    pub std_err: f64,
    pub seed: u64,
    pub n0: usize,
    pub n: usize,
    /// Replicas with no approximated generation up to `n0 + n`.
    pub exact_replicas: u64,
    pub rejected: u64,
    pub exact_p_hat: Option<f64>,
    pub exact_std_err: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_tail(
    env: &EnvironmentModel,
    n0: usize,
    n: usize,
    x: f64,
    scale: Scale,
    replicas: u64,
    seed: u64,
    policy: GrowthPolicy,
) -> Result<TailEstimate> {
    let sample = SampleSet::simulate(env, &[n0, n0 + n], replicas, seed, policy)?;
    let mut tails = sample.tails(n0, n, &[x], scale, &Standardizer::from_env(env))?;
    Ok(tails.remove(0))
}

/// Moment parameters of a verification run. `constants` replaces the environment's
/// exact constants (for negative controls); any replacement that breaks a hypothesis
/// is reported in [`VerificationReport::hypothesis_violations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub policy: GrowthPolicy,
    pub alpha: f64,
    pub fn_p: f64,
    pub vbe_p: f64,
    pub constants: Option<BoundConstants>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            policy: GrowthPolicy::clt(GrowthPolicy::default().exact_threshold),
            alpha: 0.5,
            fn_p: 3.0,
            vbe_p: 1.5,
            constants: None,
        }
    }
}

impl VerifySettings {
    fn check_parameters(&self, theorem: Theorem) -> Result<()> {
        match theorem {
            Theorem::SemiExponential if !(self.alpha > 0.0 && self.alpha < 1.0) => {
                Err(Error::HypothesisUnmet(format!(
                    "semi-exponential bound needs alpha in (0, 1), got {}",
                    self.alpha
                )))
            }
            Theorem::FukNagaev if self.fn_p.is_nan() || self.fn_p < 2.0 => Err(
                Error::HypothesisUnmet(format!("Fuk-Nagaev bound needs p >= 2, got {}", self.fn_p)),
            ),
            Theorem::VonBahrEsseen if !(self.vbe_p > 1.0 && self.vbe_p <= 2.0) => {
                Err(Error::HypothesisUnmet(format!(
                    "von Bahr-Esseen bound needs p in (1, 2], got {}",
                    self.vbe_p
                )))
            }
            _ => Ok(()),
        }
    }

    fn resolve(&self, env: &EnvironmentModel, theorems: &[Theorem]) -> Result<ResolvedConstants> {
        for &t in theorems {
            self.check_parameters(t)?;
        }
        let alpha = if self.alpha > 0.0 && self.alpha < 1.0 {
            self.alpha
        } else {
            0.5
        };
        let fn_p = self.fn_p.max(2.0);
        let vbe_p = self.vbe_p.clamp(1.0 + 1e-9, 2.0);
        let truth = BoundConstants::from_env(env, alpha, fn_p, vbe_p)?;
        let used = self.constants.clone().unwrap_or_else(|| truth.clone());
        Ok(ResolvedConstants { truth, used })
    }
}

struct ResolvedConstants {
    truth: BoundConstants,
    used: BoundConstants,
}

impl ResolvedConstants {
    /// Hypotheses of `theorem` that the supplied constants fail for this environment.
    fn violations(&self, env: &EnvironmentModel, theorem: Theorem) -> Vec<String> {
        let (t, c) = (&self.truth, &self.used);
        let below = |used: f64, exact: f64| used < exact * (1.0 - 1e-12);
        let mut out = Vec::new();
        if theorem.scale() == Scale::Standardized && (c.sigma / t.sigma - 1.0).abs() > 1e-12 {
            out.push(format!(
                "sigma = {} differs from the exact {}",
                c.sigma, t.sigma
            ));
        }
        match theorem {
            Theorem::Bernstein => {
                if !bernstein_condition_holds(env, c.bernstein_h, DEFAULT_K_MAX) {
                    out.push(format!(
                        "Bernstein's condition fails at H = {} (exact max|X - mu| = {})",
                        c.bernstein_h, t.bernstein_h
                    ));
                }
            }
            Theorem::SemiExponential => {
                if c.alpha != t.alpha || below(c.u, t.u) {
                    out.push(format!(
                        "u = {} is below the exact {} at alpha = {}",
                        c.u, t.u, c.alpha
                    ));
                }
            }
            Theorem::FukNagaev => {
                if c.fn_p != t.fn_p || below(c.fn_std_abs_moment, t.fn_std_abs_moment) {
                    out.push(format!(
                        "E|(X - mu)/sigma|^p = {} is below the exact {}",
                        c.fn_std_abs_moment, t.fn_std_abs_moment
                    ));
                }
            }
            Theorem::VonBahrEsseen => {
                if c.vbe_p != t.vbe_p || below(c.vbe_abs_moment, t.vbe_abs_moment) {
                    out.push(format!(
                        "E|X - mu|^p = {} is below the exact {}",
                        c.vbe_abs_moment, t.vbe_abs_moment
                    ));
                }
            }
            Theorem::Hoeffding => {
                if below(c.hoeffding_h, t.hoeffding_h) {
                    out.push(format!(
                        "X <= mu + H fails at H = {} (exact {})",
                        c.hoeffding_h, t.hoeffding_h
                    ));
                }
            }
            Theorem::Rio | Theorem::RioCorollary | Theorem::AzumaHoeffding => {
                if below(c.range, t.range) {
                    out.push(format!(
                        "R = {} is below the exact range {}",
                        c.range, t.range
                    ));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub x: f64,
    pub n: usize,
    pub n0: usize,
    pub p_hat: f64,
    pub std_err: f64,
    pub replicas: u64,
    pub exact_replicas: u64,
    pub exact_p_hat: Option<f64>,
    pub exact_std_err: Option<f64>,
    pub bound_raw: f64,
    pub bound_clamped: f64,
    /// `p_hat - 3 std_err <= bound_clamped`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub theorem_id: Theorem,
    pub scale: Scale,
    pub seed: u64,
    pub replicas: u64,
    pub rejected: u64,
    pub constants: BoundConstants,
    pub hypothesis_violations: Vec<String>,
    pub points: Vec<PointResult>,
    pub passed: usize,
    pub pass_rate: f64,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.passed == self.points.len()
    }
}

pub const VERIFICATION_CSV_HEADER: [&str; 14] = [
    "theorem_id",
    "scale",
    "n0",
    "n",
    "x",
    "p_hat",
    "std_err",
    "replicas",
    "exact_replicas",
    "exact_p_hat",
    "bound_raw",
    "bound_clamped",
    "pass",
    "hypothesis_violated",
];

/// Grid of one verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyGrid {
    pub n0: Vec<usize>,
    pub n: Vec<usize>,
}

impl VerifyGrid {
    fn generations(&self) -> Vec<usize> {
        self.n0
            .iter()
            .flat_map(|&a| std::iter::once(a).chain(self.n.iter().map(move |&b| a + b)))
            .collect()
    }
}

/// Checks each theorem on a common sample: `x_grid(theorem, constants)` supplies its thresholds.
pub fn verify_suite<F>(
    env: &EnvironmentModel,
    theorems: &[Theorem],
    x_grid: F,
    grid: &VerifyGrid,
    replicas: u64,
    seed: u64,
    settings: &VerifySettings,
) -> Result<Vec<VerificationReport>>
where
    F: Fn(Theorem, &BoundConstants) -> Vec<f64>,
{
    if grid.n0.is_empty() || grid.n.is_empty() || grid.n.contains(&0) {
        return Err(Error::InvalidParameter(
            "n0 and n grids must be non-empty with n >= 1".into(),
        ));
    }
    let constants = settings.resolve(env, theorems)?;
    let sample = SampleSet::simulate(env, &grid.generations(), replicas, seed, settings.policy)?;
    let standardizer = Standardizer::from_env(env);
    let mut reports = Vec::with_capacity(theorems.len());
    for &theorem in theorems {
        let xs = x_grid(theorem, &constants.used);
        if xs.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "empty x grid for {theorem}"
            )));
        }
        if let Some(x) = xs.iter().find(|&&x| !theorem.admits(x, &constants.used)) {
            return Err(Error::Domain(format!(
                "x = {x} lies outside the domain of {theorem}"
            )));
        }
        let mut points = Vec::new();
        for &n0 in &grid.n0 {
            for &n in &grid.n {
                for tail in sample.tails(n0, n, &xs, theorem.scale(), &standardizer)? {
                    let bound = evaluate(theorem, tail.x, n, &constants.used)?;
                    let clamped = bound.clamped();
                    points.push(PointResult {
                        x: tail.x,
                        n,
                        n0,
                        p_hat: tail.p_hat,
                        std_err: tail.std_err,
                        replicas: tail.replicas,
                        exact_replicas: tail.exact_replicas,
                        exact_p_hat: tail.exact_p_hat,
                        exact_std_err: tail.exact_std_err,
                        bound_raw: bound.value(),
                        bound_clamped: clamped,
                        pass: tail.p_hat - 3.0 * tail.std_err <= clamped,
                    });
                }
            }
        }
        let passed = points.iter().filter(|p| p.pass).count();
        reports.push(VerificationReport {
            schema_version: SCHEMA_VERSION,
            theorem_id: theorem,
            scale: theorem.scale(),
            seed,
            replicas,
            rejected: sample.rejected(),
            constants: constants.used.clone(),
            hypothesis_violations: constants.violations(env, theorem),
            pass_rate: passed as f64 / points.len() as f64,
            passed,
            points,
        });
    }
    Ok(reports)
}

#[allow(clippy::too_many_arguments)]
pub fn verify_bound(
    env: &EnvironmentModel,
    theorem: Theorem,
    x_grid: &[f64],
    n_grid: &[usize],
    n0: usize,
    replicas: u64,
    seed: u64,
    settings: &VerifySettings,
) -> Result<VerificationReport> {
    let grid = VerifyGrid {
        n0: vec![n0],
        n: n_grid.to_vec(),
    };
    let mut reports = verify_suite(
        env,
        &[theorem],
        |_, _| x_grid.to_vec(),
        &grid,
        replicas,
        seed,
        settings,
    )?;
    Ok(reports.remove(0))
}

pub fn write_verification_csv<W: Write>(out: W, reports: &[VerificationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERIFICATION_CSV_HEADER)?;
    for r in reports {
        let violated = !r.hypothesis_violations.is_empty();
        for p in &r.points {
            w.write_record([
                r.theorem_id.id().to_string(),
                r.scale.as_str().to_string(),
                p.n0.to_string(),
                p.n.to_string(),
                p.x.to_string(),
                p.p_hat.to_string(),
                p.std_err.to_string(),
                p.replicas.to_string(),
                p.exact_replicas.to_string(),
                p.exact_p_hat.map(|v| v.to_string()).unwrap_or_default(),
                p.bound_raw.to_string(),
                p.bound_clamped.to_string(),
                p.pass.to_string(),
                violated.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Lower bound for `mu` under Bernstein's condition.
    MuBernstein,
    /// Lower bound for `mu` with bounded `X`.
    MuBounded,
    /// Upper prediction bound for `Z_{n0+n}` under Bernstein's condition.
    ZBernstein,
    /// Upper prediction bound for `Z_{n0+n}` with bounded `X`.
    ZBounded,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::MuBernstein,
        Estimator::MuBounded,
        Estimator::ZBernstein,
        Estimator::ZBounded,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Estimator::MuBernstein => "mu_bernstein",
            Estimator::MuBounded => "mu_bounded",
            Estimator::ZBernstein => "z_bernstein",
            Estimator::ZBounded => "z_bounded",
        }
    }

    pub fn kind(self) -> IntervalKind {
        match self {
            Estimator::MuBernstein | Estimator::MuBounded => IntervalKind::MuLower,
            Estimator::ZBernstein | Estimator::ZBounded => IntervalKind::ZUpper,
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimator id {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub estimator: Estimator,
    pub n0: usize,
    pub n: usize,
    pub delta: f64,
    pub delta_n: f64,
    pub seed: u64,
    pub replicas: u64,
    pub rejected: u64,
    pub covered: u64,
    pub coverage: f64,
    /// `1 - delta - 3 sqrt(delta (1 - delta) / replicas)`.
    pub threshold: f64,
    pub pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment(
    env: &EnvironmentModel,
    estimator: Estimator,
    n0: usize,
    n: usize,
    delta: f64,
    replicas: u64,
    seed: u64,
    settings: &VerifySettings,
) -> Result<CoverageReport> {
    let c = match &settings.constants {
        Some(c) => c.clone(),
        None => BoundConstants::from_env(env, settings.alpha, settings.fn_p, settings.vbe_p)?,
    };
    let delta_n = match estimator {
        Estimator::MuBernstein | Estimator::ZBernstein => {
            delta_bernstein(n, delta, c.sigma, c.bernstein_h)?
        }
        Estimator::MuBounded | Estimator::ZBounded => delta_bounded(n, delta, c.range)?,
    };
    let mu = env.mu();
    let sample = SampleSet::simulate(env, &[n0, n0 + n], replicas, seed, settings.policy)?;
    let endpoints = sample.endpoints(n0, n)?;
    let accepted = endpoints.len() as u64;
    if accepted == 0 {
        return Err(Error::Domain(
            "every replica was rejected by the growth policy".into(),
        ));
    }
    let covered = endpoints
        .iter()
        .filter(|&&(ln_z0, ln_z1)| match estimator.kind() {
            IntervalKind::MuLower => {
                mu_lower_from_log_ratio(ln_z1 - ln_z0, n, delta, delta_n).contains(mu)
            }
            IntervalKind::ZUpper => z_upper_from_log(ln_z0, n, mu, delta, delta_n).contains(ln_z1),
        })
        .count() as u64;
    let coverage = covered as f64 / accepted as f64;
    let threshold = 1.0 - delta - 3.0 * binomial_se(delta, accepted);
    Ok(CoverageReport {
        schema_version: SCHEMA_VERSION,
        estimator,
        n0,
        n,
        delta,
        delta_n,
        seed,
        replicas: accepted,
        rejected: sample.rejected(),
        covered,
        coverage,
        threshold,
        pass: coverage >= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub schema_version: u32,
    pub n: usize,
    pub seed: u64,
    pub replicas: u64,
    pub mean: f64,
    pub std_err: f64,
    pub pass: bool,
    /// Largest `|ln Z_k - S_k - ln W_k|` over every step of every replica.
    pub max_decomposition_residual: f64,
}

/// Sample mean of `W_n` over exact replicas. The exact-arithmetic threshold is set as
/// high as `u64` allows, so no replica is approximated or rejected in practice.
pub fn martingale_check(
    env: &EnvironmentModel,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<MartingaleReport> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("need at least two replicas".into()));
    }
    if n == 0 {
        return Ok(MartingaleReport {
            schema_version: SCHEMA_VERSION,
            n,
            seed,
            replicas,
            mean: 1.0,
            std_err: 0.0,
            pass: true,
            max_decomposition_residual: 0.0,
        });
    }
    let policy = GrowthPolicy {
        exact_threshold: u64::MAX / env.max_offspring(),
        mode: GrowthMode::Reject,
    };
    let sim = Simulator::new(env, policy)?;
    let draws = (0..replicas)
        .into_par_iter()
        .map(|id| {
            let traj = sim.simulate(n, seed, id)?;
            let residual = traj
                .ln_z()
                .iter()
                .zip(traj.s())
                .zip(traj.ln_w())
                .map(|((lz, s), lw)| (lz - s - lw).abs())
                .fold(0.0f64, f64::max);
            Ok((traj.ln_w()[n].exp(), residual))
        })
        .collect::<Result<Vec<_>>>()?;
    let r = draws.len() as f64;
    let mean = draws
        .iter()
        .map(|d| d.0)
        .collect::<CompensatedSum>()
        .value()
        / r;
    let var = draws
        .iter()
        .map(|d| (d.0 - mean).powi(2))
        .collect::<CompensatedSum>()
        .value()
        / (r - 1.0);
    let std_err = (var / r).sqrt();
    Ok(MartingaleReport {
        schema_version: SCHEMA_VERSION,
        n,
        seed,
        replicas,
        mean,
        std_err,
        pass: (mean - 1.0).abs() <= 4.0 * std_err,
        max_decomposition_residual: draws.iter().map(|d| d.1).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticPoint {
    pub n: usize,
    pub x: f64,
    pub p_hat: f64,
    pub std_err: f64,
    /// `1 - Phi(x)`.
    pub normal_tail: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub schema_version: u32,
    pub n0: usize,
    pub seed: u64,
    pub replicas: u64,
    pub points: Vec<DiagnosticPoint>,
}

pub const DIAGNOSTIC_CSV_HEADER: [&str; 6] = ["n", "x", "p_hat", "std_err", "normal_tail", "ratio"];

/// Ratios `p_hat / (1 - Phi(x))` of the standardized statistic; informational only.
/// `x_grid` defaults to `[0, n^(1/6)]` in five steps when empty.
#[allow(clippy::too_many_arguments)]
pub fn normal_tail_diagnostic(
    env: &EnvironmentModel,
    n0: usize,
    n_grid: &[usize],
    x_grid: &[f64],
    replicas: u64,
    seed: u64,
    policy: GrowthPolicy,
) -> Result<DiagnosticReport> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::InvalidParameter(
            "n grid must be non-empty with n >= 1".into(),
        ));
    }
    let generations: Vec<usize> = std::iter::once(n0)
        .chain(n_grid.iter().map(|&n| n0 + n))
        .collect();
    let sample = SampleSet::simulate(env, &generations, replicas, seed, policy)?;
    let standardizer = Standardizer::from_env(env);
    let mut points = Vec::new();
    for &n in n_grid {
        let xs: Vec<f64> = if x_grid.is_empty() {
            let top = (n as f64).powf(1.0 / 6.0);
            (0..=4).map(|i| top * i as f64 / 4.0).collect()
        } else {
            x_grid.to_vec()
        };
        for t in sample.tails(n0, n, &xs, Scale::Standardized, &standardizer)? {
            let normal_tail = normal_upper_tail(t.x);
            points.push(DiagnosticPoint {
                n,
                x: t.x,
                p_hat: t.p_hat,
                std_err: t.std_err,
                normal_tail,
                ratio: t.p_hat / normal_tail,
            });
        }
    }
    Ok(DiagnosticReport {
        schema_version: SCHEMA_VERSION,
        n0,
        seed,
        replicas,
        points,
    })
}

pub fn write_diagnostic_csv<W: Write>(out: W, report: &DiagnosticReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIAGNOSTIC_CSV_HEADER)?;
    for p in &report.points {
        w.write_record([
            p.n.to_string(),
            p.x.to_string(),
            p.p_hat.to_string(),
            p.std_err.to_string(),
            p.normal_tail.to_string(),
            p.ratio.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(())
}
