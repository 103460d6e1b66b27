//! `forge`: batch driver for dissipative state-engineering
//! experiments. Reads a TOML config, fans seeded realizations over a
//! worker pool, and writes CSV tables plus a JSON sidecar.

mod config;
mod runner;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "forge", version, about = "Dissipative state engineering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        /// Path to the TOML config.
        config: PathBuf,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker pool size (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file and print its normalized form.
    Validate {
        /// Path to the TOML config.
        config: PathBuf,
    },
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };

    match cli.command {
        Command::Validate { config } => match config::load(&config, None, None) {
            Ok(cfg) => {
                println!("{:#}", config::echo_json(&cfg));
                0
            }
            Err(e) => {
                eprint!("{e}");
                1
            }
        },
        Command::Run { config, seed, workers, out } => {
            let cfg = match config::load(&config, seed, out) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprint!("{e}");
                    return 1;
                }
            };
            match runner::execute(&cfg, workers) {
                Ok(s) if s.total_rows > 0 && s.failed_rows == s.total_rows => {
                    eprintln!(
                        "all {} realizations failed numerically; see {}",
                        s.total_rows,
                        s.csv_path.display()
                    );
                    2
                }
                Ok(s) => {
                    println!(
                        "wrote {} rows ({} flagged) to {} and {}",
                        s.total_rows,
                        s.failed_rows,
                        s.csv_path.display(),
                        s.json_path.display()
                    );
                    0
                }
                Err(e) => {
                    eprintln!("run failed: {e:#}");
                    2
                }
            }
        }
    }
}
