//! `qornn`: batch runner for the benchmark sweeps.

mod config;
mod output;
mod run;
mod verify;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Task};
use output::Manifest;

/// Environment variable naming the default output root.
const OUT_ENV: &str = "QORNN_OUT";

#[derive(Parser, Debug)]
#[command(name = "qornn", version, about = "Train and evaluate quantum optical recurrent neural networks")]
struct Cli {
    /// TOML experiment configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed root, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output root; results go to `<out>/<task>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Short-term quantum memory over an (m_io, m_mem) grid.
    Stqm,
    /// Entangler over an (m_mem, spacing) grid.
    Entangler,
    /// Superadditivity gain over a (φ, n̄) grid.
    Superadditivity,
    /// Channel equalization over encoders and delays.
    Qce,
    /// Loop-interferometer emulation of channel equalization.
    #[command(name = "qce-tdm")]
    QceTdm,
    /// Re-check a finished run.
    Verify {
        /// Directory holding `manifest.json`.
        results: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output_root(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn run_task(cli: &Cli, task: Task) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let dir = output_root(cli, &cfg).join(task.name());
    let artifacts = run::run(task, &cfg)?;
    let manifest = Manifest {
        task: task.name().to_string(),
        config_hash: cfg.hash(task),
        seed_root: cfg.seed,
        config: cfg.task_section(task),
        files: Vec::new(),
        failed_points: 0,
        statistics: BTreeMap::new(),
        versions: BTreeMap::from([
            ("qornn-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("qornn".to_string(), qornn::VERSION.to_string()),
        ]),
    };
    let failures = artifacts.failures;
    let path = output::write_all(&dir, &artifacts, manifest)?;
    println!("wrote {} ({failures} failed points)", path.display());
    Ok(ExitCode::SUCCESS)
}

fn run_cli(cli: &Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Stqm => run_task(cli, Task::Stqm),
        Command::Entangler => run_task(cli, Task::Entangler),
        Command::Superadditivity => run_task(cli, Task::Superadditivity),
        Command::Qce => run_task(cli, Task::Qce),
        Command::QceTdm => run_task(cli, Task::QceTdm),
        Command::Verify { results } => {
            let cfg = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
            let report = verify::verify(results, cfg.as_ref())?;
            println!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
