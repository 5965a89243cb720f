//! Command-line harness for the deterministic world model: trajectory
//! validation, task scoring, scene reconstruction from labeled surfaces,
//! episodic-bank maintenance, and a seeded attention-fusion demo.
//!
//! Exit codes follow one rule everywhere: 0 means the requested operation
//! succeeded (and, for `validate`, the trajectory was valid); 1 means the
//! inputs were usable but the domain answered no (invalid trajectory,
//! unscorable gold, stale bank timestep); 2 means the inputs could not be
//! used at all (missing file, malformed JSON, inconsistent scene).

mod bank_cmd;
mod common;
mod fuse_cmd;
mod scene_cmd;
mod score_cmd;
mod validate_cmd;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "memsim", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trajectory against a scene and report per-step verdicts.
    Validate(validate_cmd::ValidateArgs),
    /// Score predicted trajectories against gold ones, singly or as a suite.
    Score(score_cmd::ScoreArgs),
    /// Run seeded attention fusion over a synthetic episodic bank.
    Fuse(fuse_cmd::FuseArgs),
    /// Reconstruct a scene from labeled surface point sets.
    BuildScene(scene_cmd::BuildSceneArgs),
    /// Inspect or extend an episodic memory bank file.
    #[command(subcommand)]
    Bank(bank_cmd::BankCommand),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => validate_cmd::run(&args),
        Command::Score(args) => score_cmd::run(&args),
        Command::Fuse(args) => fuse_cmd::run(&args),
        Command::BuildScene(args) => scene_cmd::run(&args),
        Command::Bank(cmd) => bank_cmd::run(&cmd),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
