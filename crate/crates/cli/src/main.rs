use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bpre_core::bounds::{bound_curve, write_bound_csv};
use bpre_core::exact::{EnumerationLimits, RatioDistribution};
use bpre_core::harness::{write_diagnostic_csv, write_verification_csv, VerifyGrid};
use bpre_core::process::write_trajectories_csv;
use bpre_core::{
    coverage_experiment, normal_tail_diagnostic, verify_suite, Simulator, Standardizer,
};
use clap::{Args, Parser, Subcommand};

mod config;
mod error;

use config::Config;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "bpre",
    version,
    about = "Branching processes in random environments: simulation, bounds and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated trajectories to trajectories.csv.
    Simulate(Common),
    /// Write bound curves for the selected theorems to bounds.csv.
    Bounds(Common),
    /// Check bound domination by Monte Carlo; writes verify.json and verify.csv.
    Verify(Common),
    /// Run interval coverage experiments; writes coverage.json.
    CiCoverage(Common),
    /// Enumerate exact tails; writes enumerate.csv.
    Enumerate(Common),
    /// Compare empirical tails with the normal tail; writes diagnose.csv and diagnose.json.
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment manifest.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Replica count of this command.
    #[arg(long)]
    replicas: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Status {
    Ok,
    Failed,
}

struct Context {
    config: Config,
    out: PathBuf,
    replicas: Option<u64>,
}

impl Context {
    fn new(args: &Common) -> Result<Self, CliError> {
        let mut config = Config::load(&args.config)?;
        if let Some(seed) = args.seed {
            config.run.seed = seed;
        }
        let out = args
            .out
            .clone()
            .unwrap_or_else(|| config.output.dir.clone());
        fs::create_dir_all(&out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self {
            config,
            out,
            replicas: args.replicas,
        })
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.out.join(name);
        let file = File::create(&path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        Ok((path, BufWriter::new(file)))
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(path)
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn simulate(ctx: &Context) -> Result<Status, CliError> {
    let env = ctx.config.environment()?;
    let run = &ctx.config.run;
    let sim = Simulator::new(&env, ctx.config.policy())?;
    let replicas = ctx.replicas.unwrap_or(run.simulate_replicas);
    let trajectories = (0..replicas)
        .map(|id| sim.simulate(run.generations, run.seed, id))
        .collect::<Result<Vec<_>, _>>()?;
    let (path, w) = ctx.create("trajectories.csv")?;
    write_trajectories_csv(
        w,
        trajectories.iter().enumerate().map(|(i, t)| (i as u64, t)),
    )?;
    announce(&path);
    Ok(Status::Ok)
}

fn bounds(ctx: &Context) -> Result<Status, CliError> {
    let env = ctx.config.environment()?;
    let constants = ctx.config.constants(&env)?;
    let mut points = Vec::new();
    for theorem in ctx.config.theorems() {
        let xs = ctx.config.x_grid(theorem, &constants);
        points.extend(bound_curve(theorem, &xs, &ctx.config.run.n, &constants)?);
    }
    let (path, w) = ctx.create("bounds.csv")?;
    write_bound_csv(w, &points)?;
    announce(&path);
    Ok(Status::Ok)
}

fn verify(ctx: &Context) -> Result<Status, CliError> {
    let env = ctx.config.environment()?;
    let run = &ctx.config.run;
    let settings = ctx.config.verify_settings(&env)?;
    let grid = VerifyGrid {
        n0: run.n0.clone(),
        n: run.n.clone(),
    };
    let reports = verify_suite(
        &env,
        &ctx.config.theorems(),
        |t, c| ctx.config.x_grid(t, c),
        &grid,
        ctx.replicas.unwrap_or(run.replicas),
        run.seed,
        &settings,
    )?;
    for r in &reports {
        let flag = if r.hypothesis_violations.is_empty() {
            ""
        } else {
            " (hypothesis violated)"
        };
        println!(
            "{:<17} {}/{} points dominated{flag}",
            r.theorem_id.id(),
            r.passed,
            r.points.len()
        );
    }
    announce(&ctx.write_json("verify.json", &reports)?);
    let (path, w) = ctx.create("verify.csv")?;
    write_verification_csv(w, &reports)?;
    announce(&path);
    Ok(if reports.iter().all(|r| r.all_pass()) {
        Status::Ok
    } else {
        Status::Failed
    })
}

fn ci_coverage(ctx: &Context) -> Result<Status, CliError> {
    let env = ctx.config.environment()?;
    let run = &ctx.config.run;
    let settings = ctx.config.verify_settings(&env)?;
    let replicas = ctx.replicas.unwrap_or(run.coverage_replicas);
    let mut reports = Vec::new();
    for estimator in ctx.config.estimators() {
        for &delta in &run.delta {
            for &n0 in &run.n0 {
                let r = coverage_experiment(
                    &env,
                    estimator,
                    n0,
                    run.coverage_n,
                    delta,
                    replicas,
                    run.seed,
                    &settings,
                )?;
                println!(
                    "{:<13} delta={delta} n0={n0}: coverage {:.4} (threshold {:.4})",
                    estimator.id(),
                    r.coverage,
                    r.threshold
                );
                reports.push(r);
            }
        }
    }
    announce(&ctx.write_json("coverage.json", &reports)?);
    Ok(if reports.iter().all(|r| r.pass) {
        Status::Ok
    } else {
        Status::Failed
    })
}

pub const ENUMERATE_CSV_HEADER: [&str; 7] = [
    "n0",
    "n",
    "scale",
    "x",
    "prob",
    "truncated_mass",
    "prob_upper",
];

fn default_x_grid() -> Vec<f64> {
    (0..10).map(|k| 0.05 + 0.2 * k as f64).collect()
}

fn enumerate(ctx: &Context) -> Result<Status, CliError> {
    let env = ctx.config.environment()?;
    let run = &ctx.config.run;
    let standardizer = Standardizer::from_env(&env);
    let xs = if run.x_grid.is_empty() {
        default_x_grid()
    } else {
        run.x_grid.clone()
    };
    let (path, w) = ctx.create("enumerate.csv")?;
    let mut w = csv::Writer::from_writer(w);
    w.write_record(ENUMERATE_CSV_HEADER)?;
    for &n0 in &run.n0 {
        for &n in &run.n {
            let dist = RatioDistribution::enumerate(&env, n0, n, EnumerationLimits::default())?;
            for &x in &xs {
                let t = dist.tail(x, run.scale, &standardizer);
                w.write_record([
                    n0.to_string(),
                    n.to_string(),
                    run.scale.as_str().to_string(),
                    x.to_string(),
                    t.prob.to_string(),
                    t.truncated_mass.to_string(),
                    t.upper().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    announce(&path);
    Ok(Status::Ok)
}

fn diagnose(ctx: &Context) -> Result<Status, CliError> {
    let env = ctx.config.environment()?;
    let run = &ctx.config.run;
    let report = normal_tail_diagnostic(
        &env,
        run.n0[0],
        &run.n,
        &run.x_grid,
        ctx.replicas.unwrap_or(run.replicas),
        run.seed,
        ctx.config.policy(),
    )?;
    let (path, w) = ctx.create("diagnose.csv")?;
    write_diagnostic_csv(w, &report)?;
    announce(&path);
    announce(&ctx.write_json("diagnose.json", &report)?);
    Ok(Status::Ok)
}

type Handler = fn(&Context) -> Result<Status, CliError>;

fn run(cli: Cli) -> Result<Status, CliError> {
    let (args, handler): (&Common, Handler) = match &cli.command {
        Command::Simulate(a) => (a, simulate),
        Command::Bounds(a) => (a, bounds),
        Command::Verify(a) => (a, verify),
        Command::CiCoverage(a) => (a, ci_coverage),
        Command::Enumerate(a) => (a, enumerate),
        Command::Diagnose(a) => (a, diagnose),
    };
    handler(&Context::new(args)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{}", e.envelope());
            ExitCode::from(1)
        }
    }
}
