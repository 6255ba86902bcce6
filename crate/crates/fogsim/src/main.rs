//! Command-line front end for the F-RAN slice simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numeric failure,
//! 3 i/o failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fogsim::harness::{self, SimConfig};
use fogsim::SimError;

#[derive(Parser)]
#[command(name = "fogsim", about = "Uplink sliced F-RAN mode-selection and power-allocation simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML); omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-path config overrides, e.g. --override power.v=1e10.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment (all configured seeds).
    Run(CommonArgs),
    /// Sweep one dimension (config [sweep] section) and emit sweep.csv.
    Sweep(CommonArgs),
    /// Compare the configured policy set on identical worlds.
    Compare(CommonArgs),
    /// Exhaustive search of the first slot only.
    Oracle(CommonArgs),
}

fn load_config(args: &CommonArgs) -> Result<SimConfig, SimError> {
    let overrides: Vec<(String, String)> = args
        .overrides
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| SimError::config(format!("override '{kv}' is not KEY=VALUE")))
        })
        .collect::<Result<_, _>>()?;
    let mut cfg = match &args.config {
        Some(path) => SimConfig::load(path, &overrides)?,
        None => SimConfig::from_toml_with_overrides("", &overrides)?,
    };
    if let Some(seed) = args.seed {
        cfg.sim.seeds = vec![seed];
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let result = harness::run_to_files(&cfg, &args.out)?;
            println!(
                "run complete: {} seed(s) x {} slots -> {}",
                cfg.sim.seeds.len(),
                cfg.sim.horizon,
                args.out.display()
            );
            println!(
                "  p_bar {} W, q_bar {} bits, pmr_mean {}",
                harness::fmt9(result.mean.p_bar),
                harness::fmt9(result.mean.q_bar),
                harness::fmt9(result.mean.pmr_mean),
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let cfg = load_config(&args)?;
            let points = harness::sweep_to_files(&cfg, &args.out)?;
            println!(
                "sweep over {} complete: {} points -> {}",
                cfg.sweep.dimension,
                points.len(),
                args.out.display()
            );
            for p in &points {
                println!(
                    "  {} -> p_bar {} W, q_bar {} bits, pmr_mean {}",
                    p.label,
                    harness::fmt9(p.result.mean.p_bar),
                    harness::fmt9(p.result.mean.q_bar),
                    harness::fmt9(p.result.mean.pmr_mean),
                );
            }
            Ok(())
        }
        Command::Compare(args) => {
            let cfg = load_config(&args)?;
            let rows = harness::compare_to_files(&cfg, &args.out)?;
            println!("compare complete: {} policies -> {}", rows.len(), args.out.display());
            for r in &rows {
                println!(
                    "  {}: pmr_mean {}, reward_mean {}, wall {} s",
                    r.policy,
                    harness::fmt9(r.result.mean.pmr_mean),
                    harness::fmt9(r.result.mean.reward_mean),
                    harness::fmt9(r.result.wall_clock_s),
                );
            }
            Ok(())
        }
        Command::Oracle(args) => {
            let cfg = load_config(&args)?;
            let body = harness::oracle_to_files(&cfg, &args.out)?;
            print!("{body}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
