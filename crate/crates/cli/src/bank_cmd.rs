//! `memsim bank`: episodic-bank file maintenance. `commit` appends one
//! seeded synthetic entry (respecting the monotonic clock), `show` prints a
//! summary or the canonical JSON form.
//!
//! Bank files survive any number of load/store cycles bit-for-bit: floats
//! are parsed exactly and re-serialized to their shortest round-trip form.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use memsim_core::memory::{MemoryBank, TimeEmbed};
use memsim_core::synthetic::SyntheticRng;

use crate::common;

#[derive(Subcommand)]
pub enum BankCommand {
    /// Append one seeded synthetic entry and write the bank back out.
    Commit(CommitArgs),
    /// Print a summary (or the canonical JSON) of a bank file.
    Show(ShowArgs),
}

#[derive(Args)]
pub struct CommitArgs {
    /// Bank file to extend.
    bank: PathBuf,
    /// Room the entry describes (one entry per room).
    #[arg(long)]
    room: u32,
    /// Timestep; defaults to one past the bank's clock.
    #[arg(long)]
    t: Option<u64>,
    /// Rows in the synthetic key/value matrices.
    #[arg(long, default_value_t = 4)]
    rows: usize,
    /// Memory width for a brand-new bank; an existing bank keeps its own.
    #[arg(long)]
    width: Option<usize>,
    /// RNG seed; falls back to MEMSIM_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Start from an empty bank when the file does not exist yet.
    #[arg(long)]
    create: bool,
    /// Commit without the timestamp embedding.
    #[arg(long)]
    no_time_embed: bool,
    /// Base of the sinusoidal timestamp embedding.
    #[arg(long, default_value_t = 10_000.0)]
    base: f64,
    /// Write here instead of back over the input file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ShowArgs {
    /// Bank file to inspect.
    bank: PathBuf,
    /// Emit the canonical JSON form instead of the summary.
    #[arg(long)]
    json: bool,
}

pub fn run(cmd: &BankCommand) -> Result<ExitCode> {
    match cmd {
        BankCommand::Commit(args) => commit(args),
        BankCommand::Show(args) => show(args),
    }
}

fn load_bank(path: &Path) -> Result<MemoryBank> {
    serde_json::from_str(&common::read(path)?).with_context(|| format!("bank {}", path.display()))
}

const DEFAULT_WIDTH: usize = 16;

fn commit(args: &CommitArgs) -> Result<ExitCode> {
    let mut bank = if !args.bank.exists() && args.create {
        MemoryBank::new()
    } else {
        load_bank(&args.bank)?
    };

    let width = match (bank.width(), args.width) {
        (Some(have), Some(want)) if have != want => {
            anyhow::bail!("bank width is {have}, --width {want} conflicts")
        }
        (Some(have), _) => have,
        (None, want) => want.unwrap_or(DEFAULT_WIDTH),
    };
    let t = args.t.unwrap_or_else(|| bank.clock() + 1);
    let embed = if args.no_time_embed {
        TimeEmbed::None
    } else {
        TimeEmbed::Sinusoidal { base: args.base }
    };

    let mut rng = SyntheticRng::from_seed(common::resolve_seed(args.seed)?);
    let key = rng.mat(args.rows, width, -0.5, 0.5);
    let value = rng.mat(args.rows, width, -0.5, 0.5);

    if let Err(err) = bank.commit(args.room, t, key, value, embed) {
        eprintln!("commit rejected: {err}");
        return Ok(ExitCode::from(1));
    }

    let target = args.out.as_deref().or(Some(args.bank.as_path()));
    common::emit(target, &serde_json::to_string_pretty(&bank)?)?;
    let plural = if bank.len() == 1 { "entry" } else { "entries" };
    eprintln!(
        "committed room {} at t={} ({}x{}); bank now holds {} {plural}, clock {}",
        args.room,
        t,
        args.rows,
        width,
        bank.len(),
        bank.clock(),
    );
    Ok(ExitCode::SUCCESS)
}

fn show(args: &ShowArgs) -> Result<ExitCode> {
    let bank = load_bank(&args.bank)?;
    if args.json {
        common::emit(None, &serde_json::to_string_pretty(&bank)?)?;
        return Ok(ExitCode::SUCCESS);
    }
    println!("clock {}", bank.clock());
    println!("entries {}", bank.len());
    for entry in bank.entries() {
        println!(
            "room {:>4}  t {:>6}  rows {:>4}  width {:>4}",
            entry.room,
            entry.t,
            entry.key.rows(),
            entry.key.cols(),
        );
    }
    Ok(ExitCode::SUCCESS)
}
