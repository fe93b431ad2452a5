//! Supercritical branching processes in i.i.d. random environments.
//!
//! The crate simulates `Z_n`, enumerates the exact law of `ln(Z_{n0+n}/Z_{n0})` for
//! short horizons, evaluates deviation bounds for that log ratio, builds the
//! corresponding interval estimators and checks all of it by Monte Carlo.

pub mod benchmarks;
pub mod bounds;
pub mod error;
pub mod exact;
pub mod harness;
pub mod intervals;
pub mod offspring;
pub mod process;
pub mod rng;
pub mod stats;

pub use bounds::{BoundConstants, BoundValue, Theorem};
pub use error::{Error, Result};
pub use exact::{exact_tail, EnumerationLimits, ExactTail, RatioDistribution};
pub use harness::{
    coverage_experiment, estimate_tail, martingale_check, normal_tail_diagnostic, verify_bound,
    verify_suite, CoverageReport, Estimator, TailEstimate, VerificationReport, VerifyGrid,
    VerifySettings, SCHEMA_VERSION,
};
pub use intervals::{IntervalKind, IntervalResult};
pub use offspring::{
    make_offspring_law, moment_profile, EnvironmentModel, MomentProfile, OffspringLaw,
};
pub use process::{
    simulate_trajectory, GrowthMode, GrowthPolicy, Scale, Simulator, Standardizer, Trajectory,
};
