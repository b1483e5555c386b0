//! The `run` subcommand: execute a configured protocol and write the report
//! artifacts (report CSVs, hypothesis CSV, race traces, summary, plot data,
//! and a reproducibility manifest).

use crate::config::{DatasetSource, Protocol, RunConfig};
use anyhow::{Context, Result};
use pwidb_core::frame::Frame;
use pwidb_core::ingest::{self, CsvSchema};
use pwidb_core::streaming::{
    plan_chunks, resume_pwidb, run_accumulative, run_batch, run_pwidb, Checkpoint, ProtocolRun,
    StreamError,
};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.csv";

pub fn load_dataset(config: &RunConfig) -> Result<Frame> {
    match &config.source {
        DatasetSource::Synthetic(cfg) => Ok(ingest::gen_synthetic(cfg)?),
        DatasetSource::Csv {
            path,
            label_column,
            positive_label,
            shuffle_seed,
        } => {
            let header = ingest::peek_header(path)?;
            let schema = CsvSchema::from_header(&header, label_column, positive_label)?;
            let frame = ingest::load_csv(path, &schema)
                .with_context(|| format!("loading {}", path.display()))?;
            Ok(match shuffle_seed {
                Some(seed) => ingest::shuffle_frame(&frame, *seed),
                None => frame,
            })
        }
    }
}

fn execute(config: &RunConfig, dataset: &Frame) -> Result<ProtocolRun, StreamError> {
    match config.protocol {
        Protocol::Batch => run_batch(dataset, config.race.as_ref(), &config.forest, config.seed),
        Protocol::Accumulative => {
            let plan = plan_chunks(dataset.len(), config.plan_mode)?;
            run_accumulative(
                dataset,
                &plan,
                config.race.as_ref(),
                &config.forest,
                config.seed,
            )
        }
        Protocol::Pwidb => {
            let plan = plan_chunks(dataset.len(), config.plan_mode)?;
            let race = config.race.as_ref().expect("validated: pwidb has a race");
            run_pwidb(dataset, &plan, race, &config.forest, config.seed, config.carry)
        }
    }
}

fn execute_resumed(
    config: &RunConfig,
    dataset: &Frame,
    checkpoint: Checkpoint,
) -> Result<ProtocolRun, StreamError> {
    let plan = plan_chunks(dataset.len(), config.plan_mode)?;
    let race = config.race.as_ref().expect("validated: pwidb has a race");
    resume_pwidb(
        dataset,
        &plan,
        race,
        &config.forest,
        config.seed,
        config.carry,
        checkpoint,
    )
}

fn write_summary(run: &ProtocolRun, dir: &Path) -> Result<()> {
    let n = run.rows.len().max(1) as f64;
    let avg_auc: f64 = run.rows.iter().map(|r| r.auc).sum::<f64>() / n;
    let avg_f1: f64 = run.rows.iter().map(|r| r.f1).sum::<f64>() / n;
    let mut text = String::from("metric,prediction_average,windows\n");
    text.push_str(&format!("AUC,{:.4},{}\n", avg_auc, run.rows.len()));
    text.push_str(&format!("F1,{:.4},{}\n", avg_f1, run.rows.len()));
    std::fs::write(dir.join(SUMMARY_FILE), text)?;
    Ok(())
}

/// Tidy (x, series, value) rows for external plotting.
fn write_plot_data(run: &ProtocolRun, dir: &Path) -> Result<()> {
    let mut text = String::from("x,series,value\n");
    for row in &run.rows {
        text.push_str(&format!("{},AUC,{}\n", row.window, row.auc));
        text.push_str(&format!("{},F1,{}\n", row.window, row.f1));
    }
    std::fs::write(dir.join(PLOT_FILE), text)?;
    Ok(())
}

fn write_traces(run: &ProtocolRun, dir: &Path) -> Result<()> {
    if run.races.is_empty() {
        return Ok(());
    }
    let races_dir = dir.join("races");
    std::fs::create_dir_all(&races_dir)?;
    for (window, outcome) in &run.races {
        std::fs::write(
            races_dir.join(format!("window_{window}_trace.csv")),
            outcome.trace_csv(),
        )?;
    }
    Ok(())
}

fn write_manifest(config: &RunConfig, dir: &Path) -> Result<()> {
    let config_json = serde_json::to_string_pretty(config)?;
    let hash = hex_digest(config_json.as_bytes());
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config_hash": hash,
        "config": serde_json::from_str::<serde_json::Value>(&config_json)?,
    });
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Returns the process exit code: 0 on success, 2 after a halted run (a
/// resumable checkpoint is left in the output directory).
pub fn cmd_run(config: &RunConfig, resume_from: Option<&Path>) -> Result<u8> {
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("cannot create {}", config.out_dir.display()))?;
    let dataset = load_dataset(config)?;

    let outcome = match resume_from {
        None => execute(config, &dataset),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
            let checkpoint: Checkpoint = serde_json::from_str(&text)
                .with_context(|| format!("cannot parse checkpoint {}", path.display()))?;
            execute_resumed(config, &dataset, checkpoint)
        }
    };

    match outcome {
        Ok(run) => {
            ingest::write_reports(&run.rows, &run.hypotheses, &config.out_dir)?;
            write_traces(&run, &config.out_dir)?;
            write_summary(&run, &config.out_dir)?;
            write_plot_data(&run, &config.out_dir)?;
            write_manifest(config, &config.out_dir)?;
            println!(
                "run complete: {} windows, artifacts in {}",
                run.rows.len(),
                config.out_dir.display()
            );
            Ok(0)
        }
        Err(StreamError::Halted {
            window,
            source,
            checkpoint,
        }) => {
            let path = config.out_dir.join(CHECKPOINT_FILE);
            std::fs::write(&path, serde_json::to_string(&checkpoint)?)?;
            eprintln!("window {window} failed: {source}");
            eprintln!("checkpoint written to {} (resume with --resume)", path.display());
            Ok(2)
        }
        Err(e) => Err(e.into()),
    }
}
