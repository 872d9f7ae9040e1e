use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hilbert_rwm::{load_config, run_experiment, CliError};
use hilbert_rwm_core::limit::optimal_ell;

/// Verification harness for the spectrally preconditioned random-walk
/// Metropolis sampler and its diffusion limit.
#[derive(Parser)]
#[command(name = "hilbert-rwm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the TOML config.
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (falls back to HILBERT_RWM_THREADS, then 1).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config file, reporting every violation.
    Validate {
        /// Path to the TOML config.
        config: PathBuf,
    },
    /// Print the speed-maximizing jump size and its acceptance probability.
    OptimalEll,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(breaches) if breaches.is_empty() => ExitCode::SUCCESS,
        Ok(breaches) => {
            eprintln!("{} assertion breach(es); exit 2", breaches.len());
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<Vec<String>, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            threads,
            out,
        } => {
            let (mut cfg, raw) = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let threads = hilbert_rwm::runner::resolve_threads(threads);
            let (dir, breaches) = run_experiment(&cfg, &raw, threads, out)?;
            println!("artifacts written to {}", dir.display());
            Ok(breaches)
        }
        Command::Validate { config } => {
            let (cfg, _) = load_config(&config)?;
            println!(
                "OK: {} experiment, {} truncation level(s), output {}",
                cfg.experiment,
                cfg.n_grid.len(),
                cfg.output_dir.display()
            );
            Ok(Vec::new())
        }
        Command::OptimalEll => {
            let opt = optimal_ell(0.1_f64, 10.0, 1e-10)?;
            println!("ell*  = {:.6}", opt.ell);
            println!("beta* = {:.6}", opt.beta);
            println!("h*    = {:.6}", opt.h);
            Ok(Vec::new())
        }
    }
}
