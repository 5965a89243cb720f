//! `memsim validate`: replay a trajectory against a scene, emit the full
//! verdict report as JSON, and exit 1 when the trajectory is invalid.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use memsim_core::grammar;
use memsim_core::scene::Scene;
use memsim_core::sim;

use crate::common;

#[derive(Args)]
pub struct ValidateArgs {
    /// Scene file: rooms, boxes, containment links.
    scene: PathBuf,
    /// Trajectory file: task, step lines, optional room-order annotation.
    trajectory: PathBuf,
    /// Room the agent starts in.
    #[arg(long)]
    start_room: u32,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: &ValidateArgs) -> Result<ExitCode> {
    let scene = Scene::parse(&common::read(&args.scene)?)
        .with_context(|| format!("scene {}", args.scene.display()))?;
    let trajectory = grammar::parse_trajectory(&common::read(&args.trajectory)?)
        .with_context(|| format!("trajectory {}", args.trajectory.display()))?;

    let report = sim::validate(&scene, &trajectory, args.start_room).context("replay setup")?;
    common::emit(args.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;

    if report.valid {
        eprintln!(
            "valid: {} steps, all accepted, hand empty at the end",
            report.verdicts.len()
        );
        return Ok(ExitCode::SUCCESS);
    }
    match report.verdicts.iter().find(|v| !v.valid) {
        Some(first) => eprintln!(
            "invalid: {} of {} steps rejected, first at step {} ({:?})",
            report.invalid_steps(),
            report.verdicts.len(),
            first.index,
            first.error_kind,
        ),
        None => eprintln!(
            "invalid: every step was accepted but the agent still holds {}",
            report
                .final_state
                .hand
                .as_ref()
                .map_or_else(|| "an object".to_string(), |h| h.object.clone()),
        ),
    }
    Ok(ExitCode::from(1))
}
