use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latent_replay::experiment::{run_experiment_file, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "latent-replay", version, about = "Continual-learning experiments with generative latent replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, sequence, seed) cell of an experiment config.
    Run {
        config: PathBuf,
        /// Output directory (defaults to the config's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cells run in parallel; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Check the config and exit.
        #[arg(long)]
        validate_only: bool,
    },
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_SCHEMA: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Run {
        config,
        out,
        jobs,
        validate_only,
    } = Cli::parse().command;

    if validate_only {
        let text = match std::fs::read_to_string(&config) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", config.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
        };
        return match ExperimentConfig::from_json(&text) {
            Ok(cfg) => {
                println!(
                    "{}: ok ({} strategies x {} sequences x {} seeds)",
                    config.display(),
                    cfg.strategies.len(),
                    cfg.sequences.len(),
                    cfg.seeds.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_SCHEMA)
            }
        };
    }

    let opts = RunOptions { jobs, output_dir: out };
    match run_experiment_file(&config, &opts) {
        Ok((report, dir)) => {
            println!(
                "{} cells in {:.1}s, results in {}",
                report.cells.len() + report.alpha_cells.len(),
                report.total_seconds,
                dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_SCHEMA } else { EXIT_RUNTIME })
        }
    }
}
