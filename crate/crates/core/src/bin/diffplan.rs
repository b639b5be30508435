//! `diffplan solve|simulate|mse --config <file> [--seed N] [--out DIR]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffplan::commands::{cmd_mse, cmd_simulate, cmd_solve};
use diffplan::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "diffplan", version, about = "Flow-field path planning: exact and finite-element policy iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classic and approximate policy iteration; policies, values, mesh, raster.
    Solve(Common),
    /// Monte-Carlo trials for every planner over the strength sweep.
    Simulate(Common),
    /// Value MSE of approximate vs classic PI over grid sizes.
    Mse(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Solve(c) => {
            let s = cmd_solve(&load(&c)?, &c.out)?;
            println!(
                "classic PI: {} iterations; approximate PI: {} iterations ({}), {} unknowns",
                s.classic_iterations,
                s.api_iterations,
                if s.api_converged { "converged" } else { "not converged" },
                s.unknowns
            );
            println!(
                "value RMSE {:.4e} (max |v| {:.4}), policy agreement {} states",
                s.rmse, s.max_abs_value, s.policy_agreement
            );
        }
        Command::Simulate(c) => {
            for r in cmd_simulate(&load(&c)?, &c.out)? {
                println!(
                    "{:14} A={:<4} time {:6.2} ± {:5.2} h  length {:6.2} ± {:5.2} km  reached {}/{}",
                    r.planner,
                    r.strength,
                    r.stats.mean_time_h,
                    r.stats.std_time_h,
                    r.stats.mean_len_km,
                    r.stats.std_len_km,
                    r.stats.reached,
                    r.stats.trials
                );
            }
        }
        Command::Mse(c) => {
            for r in cmd_mse(&load(&c)?, &c.out)? {
                println!("n={:<3} k={} mse {:.4e} max|v| {:.4}", r.grid_n, r.k, r.mse, r.max_abs_value);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("diffplan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
