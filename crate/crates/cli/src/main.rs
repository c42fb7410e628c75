use anyhow::Result;
use clap::{Parser, Subcommand};
use kdopt_cli::config::{ExperimentKind, RunConfig};
use kdopt_cli::experiments::run_experiment;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "kdopt",
    about = "Global black-box optimization experiments with kernel-density surrogates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run-configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker-pool size.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a benchmark objective over seeded repeats.
    Optimize(CommonArgs),
    /// Uniform random-search baseline on a benchmark objective.
    RandomSearch(CommonArgs),
    /// Benchmark suite: thresholds from random search, then optimizer
    /// runs across batch sizes.
    Suite(CommonArgs),
    /// Inverse design of the oscillating reaction model.
    Oregonator(CommonArgs),
    /// Dump acquisition values on a grid for a fixed observation set.
    DumpAcquisition(CommonArgs),
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Optimize(a) => (ExperimentKind::Optimize, a),
        Command::RandomSearch(a) => (ExperimentKind::RandomSearch, a),
        Command::Suite(a) => (ExperimentKind::Suite, a),
        Command::Oregonator(a) => (ExperimentKind::Oregonator, a),
        Command::DumpAcquisition(a) => (ExperimentKind::DumpAcquisition, a),
    };
    let mut cfg = RunConfig::load(&args.config, kind)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs.max(1);
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    let report = run_experiment(&cfg)?;
    println!(
        "wrote {} file(s) under {}",
        report.files_written,
        cfg.out_dir.display()
    );
    if let Some(summary) = report.summary_path {
        println!("summary: {}", summary.display());
    }
    Ok(())
}
