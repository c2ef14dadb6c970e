use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use push_cli::config::ScenarioConfig;
use push_cli::run::{run_evaluate, run_mpc, run_plan, run_validate, RunStatus};

/// Planar pushing under uncertainty: plan robust trajectories, evaluate them
/// with stochastic rollouts, run closed-loop simulations, validate oracles.
#[derive(Parser)]
#[command(name = "push", version, about)]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Plan a pushing trajectory and write CSV/SVG artifacts.
    Plan(RunArgs),
    /// Run stochastic rollouts of a plan and report the success rate.
    Evaluate(EvaluateArgs),
    /// Closed-loop perturb-and-recover simulation with measurement updates.
    #[command(name = "mpc-sim")]
    MpcSim(RunArgs),
    /// Run the oracle validation suites; nonzero exit on any failure.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for artifacts and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Override the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of stochastic rollouts.
    #[arg(long, default_value_t = 1000)]
    rollouts: usize,
    /// Evaluate a saved commands.csv instead of planning first.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Optional scenario file; it is parsed and validated, and its seed
    /// drives the suites. Defaults are used otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optional directory for summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(path: &PathBuf, seed_override: Option<u64>) -> Result<(ScenarioConfig, u64), String> {
    match ScenarioConfig::load(path) {
        Ok(cfg) => {
            let seed = seed_override.unwrap_or(cfg.seed);
            Ok((cfg, seed))
        }
        Err(e) => Err(format!("{e:#}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match &cli.mode {
        Mode::Plan(args) => match load(&args.config, args.seed) {
            Ok((cfg, seed)) => run_plan(&cfg, &args.out, seed),
            Err(msg) => Ok(RunStatus::ConfigError(msg)),
        },
        Mode::Evaluate(args) => match load(&args.run.config, args.run.seed) {
            Ok((cfg, seed)) => {
                run_evaluate(&cfg, &args.run.out, seed, args.rollouts, args.plan.as_deref())
            }
            Err(msg) => Ok(RunStatus::ConfigError(msg)),
        },
        Mode::MpcSim(args) => match load(&args.config, args.seed) {
            Ok((cfg, seed)) => run_mpc(&cfg, &args.out, seed),
            Err(msg) => Ok(RunStatus::ConfigError(msg)),
        },
        Mode::Validate(args) => {
            let loaded = match &args.config {
                Some(path) => load(path, args.seed),
                None => Ok((ScenarioConfig::default(), args.seed.unwrap_or(0))),
            };
            match loaded {
                Ok((_, seed)) => run_validate(seed, args.out.as_deref()),
                Err(msg) => Ok(RunStatus::ConfigError(msg)),
            }
        }
    };
    match status {
        Ok(status) => {
            if let Some(msg) = status.message() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
