//! Command-line front end for the OFDMA CFO-compensation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ofdma_cfo::harness::{
    run_ber_experiment, run_heatmap, run_sinr_comparison, write_complexity_report, RunOptions,
};
use ofdma_cfo::scenario::{load_complexity_cases, Scenario};
use ofdma_cfo::Error;

#[derive(Parser)]
#[command(
    name = "ofdma-cfo",
    about = "Uplink OFDMA simulations: receiver windowing and quasi-banded CFO compensation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo BER sweep of a scenario file.
    Run {
        scenario: PathBuf,
        /// Output directory for ber.csv and result.meta.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 = automatic).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit the windowed and plain interference power heatmaps.
    Heatmap {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate the complex-multiplication cost table.
    Complexity {
        params: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the paired SINR comparison of a single-SNR scenario.
    Sinr {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidScenario(_) | Error::InvalidConfig(_) | Error::Io { .. } => 2,
        Error::Singular { .. } | Error::NearSingular { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            workers,
            seed,
        } => {
            let s = Scenario::load(&scenario)?;
            let opts = RunOptions {
                workers,
                seed_override: seed,
            };
            let result = run_ber_experiment(&s, &opts)?;
            for path in result.write(&out)? {
                println!("wrote {}", path.display());
            }
            for point in &result.ber {
                println!(
                    "snr {:>5} dB  {:<24} ber {:.3e} ({} / {})",
                    point.snr_db,
                    point.technique,
                    point.ber(),
                    point.errors,
                    point.bits
                );
            }
            Ok(())
        }
        Command::Heatmap { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let maps = run_heatmap(&s, &RunOptions::default())?;
            for path in maps.write(&out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Complexity { params, out } => {
            let cases = load_complexity_cases(&params)?;
            let path = write_complexity_report(&cases, &out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sinr {
            scenario,
            out,
            workers,
            seed,
        } => {
            let s = Scenario::load(&scenario)?;
            let opts = RunOptions {
                workers,
                seed_override: seed,
            };
            let result = run_sinr_comparison(&s, &opts)?;
            for path in result.write(&out)? {
                println!("wrote {}", path.display());
            }
            for point in &result.sinr {
                println!(
                    "{:<24} sinr {:.2} dB over {} frames",
                    point.technique,
                    point.sinr_db(),
                    point.frames
                );
            }
            Ok(())
        }
    }
}
