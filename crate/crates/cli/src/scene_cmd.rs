//! `memsim build-scene`: reconstruct a validated scene from labeled surface
//! point sets. Rooms with neither floor nor ceiling are discarded and noted
//! on stderr; that is expected behavior, not a failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use memsim_core::scene::{build_scene, LabeledSurfaces};

use crate::common;

#[derive(Args)]
pub struct BuildSceneArgs {
    /// Labeled-surface file: per-room floor/ceiling/object point sets.
    surfaces: PathBuf,
    /// Write the reconstructed scene here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: &BuildSceneArgs) -> Result<ExitCode> {
    let surfaces = LabeledSurfaces::parse(&common::read(&args.surfaces)?)
        .with_context(|| format!("surfaces {}", args.surfaces.display()))?;
    let build = build_scene(&surfaces).context("reconstructing scene")?;

    common::emit(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&build.scene)?,
    )?;
    for room in &build.discarded {
        eprintln!("discarded room {room}: no floor or ceiling surface");
    }
    let objects: usize = build.scene.rooms.iter().map(|r| r.objects.len()).sum();
    eprintln!(
        "built {} rooms, {} objects",
        build.scene.rooms.len(),
        objects
    );
    Ok(ExitCode::SUCCESS)
}
