//! Experiment manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bpre_core::{
    BoundConstants, EnvironmentModel, Estimator, GrowthMode, GrowthPolicy, OffspringLaw, Scale,
    Theorem, VerifySettings,
};
use serde::Deserialize;

use crate::error::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub growth: GrowthSpec,
    #[serde(default)]
    pub moments: MomentSpec,
    #[serde(default)]
    pub run: RunSpec,
    /// Per-theorem threshold grids; theorems not listed use their defaults.
    #[serde(default)]
    pub x_grids: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    /// One offspring law per state, as `[value, probability]` pairs.
    pub states: Vec<Vec<(u64, f64)>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthSpec {
    pub exact_threshold: u64,
    pub mode: GrowthMode,
}

impl Default for GrowthSpec {
    fn default() -> Self {
        Self {
            exact_threshold: GrowthPolicy::default().exact_threshold,
            mode: GrowthMode::CltApprox,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentSpec {
    pub alpha: f64,
    pub fuk_nagaev_p: f64,
    pub von_bahr_esseen_p: f64,
    /// Replacements for the exact constants (negative controls).
    pub bernstein_h: Option<f64>,
    pub hoeffding_h: Option<f64>,
    pub range: Option<f64>,
}

impl Default for MomentSpec {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            fuk_nagaev_p: 3.0,
            von_bahr_esseen_p: 1.5,
            bernstein_h: None,
            hoeffding_h: None,
            range: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub seed: u64,
    pub replicas: u64,
    pub n0: Vec<usize>,
    pub n: Vec<usize>,
    /// Theorem ids; empty selects all eight.
    pub theorems: Vec<String>,
    pub delta: Vec<f64>,
    /// Estimator ids for `ci-coverage`; empty selects all four.
    pub estimators: Vec<String>,
    pub coverage_replicas: u64,
    pub coverage_n: usize,
    /// Scale and thresholds of `enumerate` and `diagnose`.
    pub scale: Scale,
    pub x_grid: Vec<f64>,
    pub generations: usize,
    pub simulate_replicas: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seed: 20240607,
            replicas: 100_000,
            n0: vec![0, 1],
            n: vec![4, 16, 64],
            theorems: Vec::new(),
            delta: vec![0.05, 0.1],
            estimators: Vec::new(),
            coverage_replicas: 10_000,
            coverage_n: 32,
            scale: Scale::Standardized,
            x_grid: Vec::new(),
            generations: 20,
            simulate_replicas: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

fn check_sorted<T: PartialOrd + Copy + std::fmt::Debug>(
    name: &str,
    values: &[T],
) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config(format!("{name} must not be empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!(
            "{name} must be sorted strictly ascending, got {values:?}"
        )));
    }
    Ok(())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let run = &self.run;
        check_sorted("run.n0", &run.n0)?;
        check_sorted("run.n", &run.n)?;
        check_sorted("run.delta", &run.delta)?;
        if !run.x_grid.is_empty() {
            check_sorted("run.x_grid", &run.x_grid)?;
        }
        for (id, grid) in &self.x_grids {
            id.parse::<Theorem>()?;
            check_sorted(&format!("x_grids.{id}"), grid)?;
        }
        for id in &run.theorems {
            id.parse::<Theorem>()?;
        }
        for id in &run.estimators {
            id.parse::<Estimator>()?;
        }
        Ok(())
    }

    pub fn environment(&self) -> Result<EnvironmentModel, CliError> {
        let states = self
            .environment
            .states
            .iter()
            .map(|points| OffspringLaw::new(points))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EnvironmentModel::new(
            states,
            self.environment.weights.clone(),
        )?)
    }

    pub fn policy(&self) -> GrowthPolicy {
        GrowthPolicy {
            exact_threshold: self.growth.exact_threshold,
            mode: self.growth.mode,
        }
    }

    pub fn theorems(&self) -> Vec<Theorem> {
        if self.run.theorems.is_empty() {
            Theorem::ALL.to_vec()
        } else {
            self.run
                .theorems
                .iter()
                .map(|id| id.parse().expect("validated theorem id"))
                .collect()
        }
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        if self.run.estimators.is_empty() {
            Estimator::ALL.to_vec()
        } else {
            self.run
                .estimators
                .iter()
                .map(|id| id.parse().expect("validated estimator id"))
                .collect()
        }
    }

    /// Exact constants of the environment with the manifest's overrides applied.
    pub fn constants(&self, env: &EnvironmentModel) -> Result<BoundConstants, CliError> {
        let m = &self.moments;
        let mut c = BoundConstants::from_env(env, m.alpha, m.fuk_nagaev_p, m.von_bahr_esseen_p)?;
        if let Some(h) = m.bernstein_h {
            c.bernstein_h = h;
        }
        if let Some(h) = m.hoeffding_h {
            c.hoeffding_h = h;
        }
        if let Some(r) = m.range {
            c.range = r;
        }
        Ok(c)
    }

    pub fn verify_settings(&self, env: &EnvironmentModel) -> Result<VerifySettings, CliError> {
        let m = &self.moments;
        let overridden = m.bernstein_h.is_some() || m.hoeffding_h.is_some() || m.range.is_some();
        Ok(VerifySettings {
            policy: self.policy(),
            alpha: m.alpha,
            fn_p: m.fuk_nagaev_p,
            vbe_p: m.von_bahr_esseen_p,
            constants: if overridden {
                Some(self.constants(env)?)
            } else {
                None
            },
        })
    }

    pub fn x_grid(&self, theorem: Theorem, constants: &BoundConstants) -> Vec<f64> {
        self.x_grids
            .get(theorem.id())
            .cloned()
            .unwrap_or_else(|| theorem.default_x_grid(constants))
    }
}
