use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod pipeline;
mod sweep;

use config::{ConfigError, ExperimentConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "mfgcn", version, about = "Mean-field imitation learning with common noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for checkpoints and tables.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the expert equilibrium policy.
    SolveExpert {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train vanilla and adaptive imitators of the saved expert.
    Imitate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute proxies, values, exploitability, bounds and lemma checks.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run all stages over the configured (alpha, eta) grid and seeds.
    /// Cells with existing metrics are skipped; MFGCN_JOBS sets parallelism.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides the seeds listed in the config.
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
    },
}

fn prepare(common: &Common) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(&common.config)?;
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    Ok(cfg)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

type Stage = fn(&config::Resolved, u64, &Path) -> Result<Vec<PathBuf>>;

fn run(cli: Cli) -> Result<()> {
    let single = |common: &Common, seed: u64, stage: Stage| -> Result<()> {
        let cfg = prepare(common)?;
        report(&stage(&cfg.resolve()?, seed, &common.out)?);
        Ok(())
    };
    match cli.command {
        Command::SolveExpert { common, seed } => single(&common, seed, pipeline::solve_expert),
        Command::Imitate { common, seed } => single(&common, seed, pipeline::imitate),
        Command::Evaluate { common, seed } => single(&common, seed, pipeline::evaluate),
        Command::Sweep { common, seed } => {
            let cfg = prepare(&common)?;
            let seeds = seed.unwrap_or_else(|| cfg.seeds.clone());
            let jobs = match std::env::var("MFGCN_JOBS") {
                Ok(v) => v
                    .parse::<usize>()
                    .map_err(|_| ConfigError(format!("MFGCN_JOBS must be a positive integer, got {v:?}")))?,
                Err(_) => 1,
            };
            report(&sweep::sweep(&cfg, &seeds, &common.out, jobs)?);
            Ok(())
        }
    }
}

/// 2 for configuration errors, 3 for numerical failures, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<mfgcn::Error>() {
            if e.is_numerical() {
                return 3;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
