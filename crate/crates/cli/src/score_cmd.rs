//! `memsim score`: sub-goal scoring for one task or a whole manifest.
//!
//! Single-task mode takes scene/gold/pred paths and prints the task score as
//! JSON. Suite mode (`--suite`) reads a manifest, scores every task, and
//! prints the per-tier table. An unscorable gold trajectory is a domain
//! failure (exit 1), not a crash.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use memsim_core::grammar::{self, Trajectory};
use memsim_core::metrics::{self, MetricsError, SuiteTask, Tier};
use memsim_core::scene::Scene;
use serde::{Deserialize, Serialize};

use crate::common;

#[derive(Args)]
pub struct ScoreArgs {
    /// Suite manifest `{tasks: [{name, tier, scene, gold, pred, start_room}]}`;
    /// relative paths resolve against the manifest's directory.
    #[arg(long, conflicts_with_all = ["scene", "gold", "pred", "start_room"])]
    suite: Option<PathBuf>,
    /// Scene file (single-task mode).
    #[arg(required_unless_present = "suite")]
    scene: Option<PathBuf>,
    /// Gold trajectory (single-task mode).
    #[arg(required_unless_present = "suite")]
    gold: Option<PathBuf>,
    /// Predicted trajectory (single-task mode).
    #[arg(required_unless_present = "suite")]
    pred: Option<PathBuf>,
    /// Room the agent starts in (single-task mode).
    #[arg(long, required_unless_present = "suite")]
    start_room: Option<u32>,
    /// Write machine-readable results to this file.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Score suite tasks one at a time even when the parallel path is built in.
    #[arg(long)]
    sequential: bool,
}

#[derive(Deserialize)]
struct Manifest {
    tasks: Vec<ManifestTask>,
}

#[derive(Deserialize)]
struct ManifestTask {
    name: String,
    tier: Tier,
    scene: PathBuf,
    gold: PathBuf,
    pred: PathBuf,
    start_room: u32,
}

/// Machine output for suite mode: per-task scores plus the aggregate rows.
#[derive(Serialize)]
struct SuiteJson {
    tasks: Vec<metrics::ScoredTask>,
    report: metrics::SuiteReport,
}

pub fn run(args: &ScoreArgs) -> Result<ExitCode> {
    match &args.suite {
        Some(manifest) => run_suite(args, manifest),
        None => run_single(args),
    }
}

fn load_scene(path: &Path) -> Result<Scene> {
    Scene::parse(&common::read(path)?).with_context(|| format!("scene {}", path.display()))
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    grammar::parse_trajectory(&common::read(path)?)
        .with_context(|| format!("trajectory {}", path.display()))
}

fn domain_failure(err: &MetricsError) -> ExitCode {
    eprintln!("unscorable: {err}");
    ExitCode::from(1)
}

fn run_single(args: &ScoreArgs) -> Result<ExitCode> {
    let scene = load_scene(args.scene.as_deref().expect("required by clap"))?;
    let gold = load_trajectory(args.gold.as_deref().expect("required by clap"))?;
    let pred = load_trajectory(args.pred.as_deref().expect("required by clap"))?;
    let start_room = args.start_room.expect("required by clap");

    let score = match metrics::score(&scene, &gold, &pred, start_room) {
        Ok(score) => score,
        Err(err) => return Ok(domain_failure(&err)),
    };
    eprintln!(
        "sr {:.0}, sub-sr {:.3} ({} of {} sub-goals)",
        score.sr,
        score.sub_sr,
        score.achieved.len(),
        score.total,
    );
    common::emit(args.json.as_deref(), &serde_json::to_string_pretty(&score)?)?;
    Ok(ExitCode::SUCCESS)
}

fn run_suite(args: &ScoreArgs, manifest_path: &Path) -> Result<ExitCode> {
    let manifest: Manifest = serde_json::from_str(&common::read(manifest_path)?)
        .with_context(|| format!("manifest {}", manifest_path.display()))?;
    anyhow::ensure!(!manifest.tasks.is_empty(), "manifest lists no tasks");
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for entry in &manifest.tasks {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        tasks.push(SuiteTask {
            name: entry.name.clone(),
            tier: entry.tier,
            scene: load_scene(&resolve(&entry.scene))?,
            gold: load_trajectory(&resolve(&entry.gold))?,
            pred: load_trajectory(&resolve(&entry.pred))?,
            start_room: entry.start_room,
        });
    }

    let scored = if args.sequential {
        metrics::score_suite_seq(&tasks)
    } else {
        metrics::score_suite(&tasks)
    };
    let scored = match scored {
        Ok(scored) => scored,
        Err(err) => return Ok(domain_failure(&err)),
    };
    let report = metrics::aggregate(&scored);

    print!("{}", metrics::render_table(&report));
    if args.json.is_some() {
        let machine = SuiteJson {
            tasks: scored,
            report,
        };
        common::emit(
            args.json.as_deref(),
            &serde_json::to_string_pretty(&machine)?,
        )?;
    }
    Ok(ExitCode::SUCCESS)
}
