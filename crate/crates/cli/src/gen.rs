//! The `gen` subcommand: write a synthetic imbalanced stream as a dataset
//! CSV loadable by `run`.

use anyhow::{Context, Result};
use pwidb_core::ingest::{gen_synthetic, write_dataset_csv, CsvSchema, SynthConfig};
use std::path::Path;

pub fn cmd_gen(cfg: &SynthConfig, out: &Path) -> Result<u8> {
    let frame = gen_synthetic(cfg)?;
    let schema = CsvSchema::generic(cfg.p);
    write_dataset_csv(&frame, out, &schema)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} rows ({} fraud) to {}",
        frame.len(),
        frame.minority_count(),
        out.display()
    );
    Ok(0)
}
