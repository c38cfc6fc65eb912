//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error (including refusing to overwrite),
//! 2 invalid map or scenario, 3 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::geometry::{load_map, Vec2};
use crate::scenario::{
    jadpp_from_run, power_from_run, trajectory_from_waypoints, RunOptions, ScenarioConfig, Simulator, TensorFormat,
};
use crate::{Error, Result};

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "OMNISIM_LOG";

#[derive(Debug, Parser)]
#[command(name = "mmray", version, about = "Site-specific mmWave channel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a map (and optionally a scenario) and print a summary.
    Validate {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Write the path dump only.
    Trace(RunArgs),
    /// Run the full pipeline.
    Run(RunArgs),
    /// Recompute jadpp.csv of an existing run directory.
    Jadpp(PostArgs),
    /// Recompute power.csv of an existing run directory.
    Power(PostArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the map named in the scenario.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Tensor encoding.
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    format: Format,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct PostArgs {
    /// Run directory to post-process.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

/// Parses `args` (program name first), executes and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Exists(_) => 1,
        e if e.is_validation() => 2,
        _ => 3,
    }
}

/// Installs the logger, reading the filter from [`LOG_ENV`].
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Validate { map, scenario } => validate(map.as_deref(), scenario.as_deref()),
        Command::Trace(args) => simulate(&args, true),
        Command::Run(args) => simulate(&args, false),
        Command::Jadpp(args) => {
            let n = jadpp_from_run(&args.out, args.force)?;
            println!("jadpp.csv written for {n} UEs");
            Ok(())
        }
        Command::Power(args) => {
            let n = power_from_run(&args.out, args.force)?;
            println!("power.csv written for {n} UEs");
            Ok(())
        }
    }
}

fn load_scenario(path: &Path, map: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_file(path)?;
    if let Some(map) = map {
        cfg.map = std::path::absolute(map).map_err(|e| Error::io(map, e))?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn validate(map: Option<&Path>, scenario: Option<&Path>) -> Result<()> {
    let Some(scenario) = scenario else {
        let Some(map) = map else {
            return Err(Error::Config("validate needs --map or --scenario".into()));
        };
        println!("{}", load_map(map)?.summary());
        return Ok(());
    };
    let cfg = load_scenario(scenario, map, None)?;
    let map = load_map(cfg.map_path())?;
    cfg.validate()?;
    if !map.bounds.contains(Vec2::from(cfg.bs.position)) {
        return Err(Error::Config("BS lies outside the map bounds".into()));
    }
    let t = &cfg.ue.trajectory;
    let points: Vec<Vec2> = t.waypoints.iter().map(|&p| p.into()).collect();
    let states = trajectory_from_waypoints(&points, cfg.ue.height, t.speed, t.sample_interval)?;
    println!("{}", map.summary());
    println!("{} UE samples", states.len());
    Ok(())
}

fn simulate(args: &RunArgs, paths_only: bool) -> Result<()> {
    let cfg = load_scenario(&args.scenario, args.map.as_deref(), args.seed)?;
    let sim = Simulator::new(cfg)?;
    info!("{}", sim.map().summary());
    let opts = RunOptions {
        force: args.force,
        format: match args.format {
            Format::Csv => TensorFormat::Csv,
            Format::Bin => TensorFormat::Bin,
        },
        threads: args.threads,
    };
    let report = if paths_only {
        sim.trace(&args.out, &opts)?
    } else {
        sim.run(&args.out, &opts)?
    };
    println!(
        "{} UEs, {} failed, {:.2} s -> {}",
        report.ues,
        report.failed.len(),
        report.total_seconds,
        args.out.display()
    );
    if report.partial {
        return Err(Error::Domain(format!("{} UEs failed", report.failed.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_scenario_is_a_usage_error() {
        assert_eq!(run(["mmray", "run", "--out", "x"]), 1);
        assert_eq!(run(["mmray", "bogus"]), 1);
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::Exists("a".into())), 1);
        assert_eq!(exit_code(&Error::Parse("a".into())), 2);
        assert_eq!(exit_code(&Error::validation("surface", 1, "x")), 2);
        assert_eq!(exit_code(&Error::Domain("a".into())), 3);
    }
}
