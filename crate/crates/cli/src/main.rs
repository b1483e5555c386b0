//! `pwidb` — reproducible experiment runner for streaming imbalanced
//! classification with racing-selected rebalancing.

mod compare;
mod config;
mod gen;
mod run;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::{RawConfig, RunConfig};
use pwidb_core::ingest::SynthConfig;
use std::path::PathBuf;
use std::process::ExitCode;

const OUT_DIR_ENV: &str = "PWIDB_OUT_DIR";

#[derive(Parser)]
#[command(name = "pwidb", version, about = "Streaming imbalanced-classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured protocol run and write its report artifacts.
    Run(RunArgs),
    /// Compare per-window metrics across finished run directories.
    Compare(CompareArgs),
    /// Generate a synthetic imbalanced dataset CSV.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML configuration file (flags below override its keys).
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override (default: out_dir key, then $PWIDB_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-thread cap; 0 uses all cores. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Protocol override: batch | accumulative | pwidb.
    #[arg(long)]
    protocol: Option<String>,
    /// Metric override: auc | f1.
    #[arg(long)]
    metric: Option<String>,
    /// Resume a halted run from its checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Two or more run output directories.
    #[arg(required = true, num_args = 1..)]
    reports: Vec<PathBuf>,
    /// Write the comparison grid here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Output CSV path.
    out: PathBuf,
    #[arg(long, default_value_t = 40_000)]
    n: usize,
    /// Target imbalance ratio (majority per minority).
    #[arg(long, default_value_t = 100.0)]
    ir: f64,
    /// Feature count.
    #[arg(long, default_value_t = 10)]
    p: usize,
    /// Class overlap in [0, 1]; 0 is separable.
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // Build errors only if a global pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn run_command(args: &RunArgs) -> Result<u8> {
    let file = RawConfig::from_file(&args.config)?;
    let overrides = RawConfig {
        seed: args.seed,
        out_dir: args.out.clone(),
        threads: args.threads,
        protocol: args.protocol.clone(),
        metric: args.metric.clone(),
        ..RawConfig::default()
    };
    let merged = file.overridden_by(&overrides);
    let default_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let config = RunConfig::resolve(&merged, default_out)?;
    init_threads(config.threads);
    run::cmd_run(&config, args.resume.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Compare(args) => compare::cmd_compare(&args.reports, args.out.as_deref()),
        Command::Gen(args) => gen::cmd_gen(
            &SynthConfig::new(args.n, args.ir, args.p, args.overlap, args.seed),
            &args.out,
        ),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
