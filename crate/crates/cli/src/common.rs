//! Plumbing shared by the subcommands: file I/O with path context, output
//! routing, seed resolution, and matrix-to-JSON conversion.

use std::env::VarError;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use memsim_core::Mat;

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to `out` when given, stdout otherwise. Content always ends with a
/// single newline so shell pipelines compose cleanly.
pub fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    let body = if content.ends_with('\n') {
        content.to_string()
    } else {
        format!("{content}\n")
    };
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

/// Seed resolution order: explicit flag, then `MEMSIM_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("MEMSIM_SEED") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .with_context(|| format!("MEMSIM_SEED must be a non-negative integer, got {raw:?}")),
        Err(VarError::NotPresent) => Ok(0),
        Err(VarError::NotUnicode(_)) => bail!("MEMSIM_SEED is not valid unicode"),
    }
}

/// Row-major nested-vector view of a matrix, for JSON output.
pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}
