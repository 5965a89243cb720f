//! Task scoring: sub-goal extraction, strict and partial success metrics,
//! and suite-level aggregation.
//!
//! Every pick-up and put-down in a gold trajectory, in order, is one
//! sub-goal. A prediction's partial score is the fraction of that list it
//! achieves *as an in-order prefix walk*: a pointer starts at the first
//! sub-goal and advances only when a valid predicted interaction matches it
//! exactly, so out-of-order or extra interactions never earn credit and the
//! achieved count is monotone in the pointer. Strict success additionally
//! requires the predicted trajectory to be valid end-to-end and its final
//! world state to agree with the gold one placement-for-placement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Action, ObjectRef, PutTarget, RoomId, Trajectory};
use crate::par;
use crate::scene::Scene;
use crate::sim::{self, ErrorKind, SimError};

/// Difficulty bucket for aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Simple,
    Medium,
    Hard,
}

impl Tier {
    #[must_use]
    pub fn label(self) -> &'static str {
        match self {
            Tier::Simple => "simple",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        }
    }
}

/// One required interaction from the gold trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubGoal {
    Pick {
        object: ObjectRef,
        origin: RoomId,
    },
    Put {
        object: ObjectRef,
        origin: RoomId,
        target: PutTarget,
        room: RoomId,
    },
}

impl SubGoal {
    fn matches(&self, action: &Action) -> bool {
        match (self, action) {
            (
                SubGoal::Pick { object, origin },
                Action::PickUp {
                    object: pred,
                    origin_room,
                    ..
                },
            ) => object == pred && origin == origin_room,
            (
                SubGoal::Put {
                    object,
                    origin,
                    target,
                    room,
                },
                Action::PutDown {
                    object: pred,
                    origin_room,
                    target: pred_target,
                    room: pred_room,
                },
            ) => {
                object == pred
                    && origin == origin_room
                    && target == pred_target
                    && room == pred_room
            }
            _ => false,
        }
    }
}

/// Scores for a single task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    /// Strict success: 1.0 or 0.0.
    pub sr: f64,
    /// Fraction of sub-goals achieved (1.0 when the gold has none).
    pub sub_sr: f64,
    /// Indices of achieved sub-goals — always a prefix of `0..total`.
    pub achieved: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold trajectory is invalid at step {index} ({kind:?})")]
    GoldInvalidStep { index: usize, kind: ErrorKind },
    #[error("gold trajectory ends while still holding an object")]
    GoldHandOccupied,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Validates the gold trajectory and lists its interactions in order.
pub fn extract_subgoals(
    scene: &Scene,
    gold: &Trajectory,
    start_room: RoomId,
) -> Result<Vec<SubGoal>, MetricsError> {
    let report = sim::validate(scene, gold, start_room)?;
    if let Some(bad) = report.verdicts.iter().find(|v| !v.valid) {
        return Err(MetricsError::GoldInvalidStep {
            index: bad.index,
            kind: bad.error_kind,
        });
    }
    if !report.valid {
        return Err(MetricsError::GoldHandOccupied);
    }
    Ok(gold
        .steps
        .iter()
        .filter_map(|action| match action {
            Action::PickUp {
                object,
                origin_room,
                ..
            } => Some(SubGoal::Pick {
                object: object.clone(),
                origin: *origin_room,
            }),
            Action::PutDown {
                object,
                origin_room,
                target,
                room,
            } => Some(SubGoal::Put {
                object: object.clone(),
                origin: *origin_room,
                target: target.clone(),
                room: *room,
            }),
            _ => None,
        })
        .collect())
}

/// Scores one prediction against its gold trajectory.
pub fn score(
    scene: &Scene,
    gold: &Trajectory,
    pred: &Trajectory,
    start_room: RoomId,
) -> Result<TaskScore, MetricsError> {
    let subgoals = extract_subgoals(scene, gold, start_room)?;
    let (_, gold_state) = sim::replay(scene, gold, start_room)?;
    let (pred_report, pred_state) = sim::replay(scene, pred, start_room)?;

    // In-order prefix walk over the sub-goal list, fed by valid predicted
    // interactions only.
    let mut pointer = 0;
    for (action, verdict) in pred.steps.iter().zip(&pred_report.verdicts) {
        if !verdict.valid || pointer == subgoals.len() {
            continue;
        }
        if matches!(action, Action::PickUp { .. } | Action::PutDown { .. })
            && subgoals[pointer].matches(action)
        {
            pointer += 1;
        }
    }
    let total = subgoals.len();
    let sub_sr = if total == 0 {
        1.0
    } else {
        pointer as f64 / total as f64
    };
    let worlds_agree = sim::world_diff(&pred_state, &gold_state)?.is_empty();
    let sr = if pred_report.valid && pointer == total && worlds_agree {
        1.0
    } else {
        0.0
    };
    Ok(TaskScore {
        sr,
        sub_sr,
        achieved: (0..pointer).collect(),
        total,
    })
}

/// One suite entry: a scene, its gold trajectory, and a prediction to score.
#[derive(Debug, Clone)]
pub struct SuiteTask {
    pub name: String,
    pub tier: Tier,
    pub scene: Scene,
    pub gold: Trajectory,
    pub pred: Trajectory,
    pub start_room: RoomId,
}

/// A scored suite entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredTask {
    pub name: String,
    pub tier: Tier,
    pub score: TaskScore,
}

/// Scores a whole suite, fanning out across tasks when the `parallel`
/// feature is enabled; output order matches input order either way.
pub fn score_suite(tasks: &[SuiteTask]) -> Result<Vec<ScoredTask>, MetricsError> {
    par::map_ordered(tasks, |task| {
        score(&task.scene, &task.gold, &task.pred, task.start_room).map(|s| ScoredTask {
            name: task.name.clone(),
            tier: task.tier,
            score: s,
        })
    })
    .into_iter()
    .collect()
}

/// Sequential twin of [`score_suite`], kept unconditionally for
/// parallel-vs-sequential comparison benches.
pub fn score_suite_seq(tasks: &[SuiteTask]) -> Result<Vec<ScoredTask>, MetricsError> {
    tasks
        .iter()
        .map(|task| {
            score(&task.scene, &task.gold, &task.pred, task.start_room).map(|s| ScoredTask {
                name: task.name.clone(),
                tier: task.tier,
                score: s,
            })
        })
        .collect()
}

/// Mean scores for one tier (or the whole suite), as percentages rounded to
/// one decimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierRow {
    pub label: String,
    pub tasks: usize,
    pub sr: f64,
    pub sub_sr: f64,
}

/// Aggregated suite results: one row per tier present, plus an overall row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<TierRow>,
    pub overall: TierRow,
}

/// Fraction → percentage with one decimal, round-half-up at the digit.
fn percent(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

fn mean_row(label: &str, scores: &[&TaskScore]) -> TierRow {
    let n = scores.len();
    let sr_mean = scores.iter().map(|s| s.sr).sum::<f64>() / n as f64;
    let sub_mean = scores.iter().map(|s| s.sub_sr).sum::<f64>() / n as f64;
    TierRow {
        label: label.to_string(),
        tasks: n,
        sr: percent(sr_mean),
        sub_sr: percent(sub_mean),
    }
}

/// Averages per tier (tiers with no tasks are omitted) and overall.
///
/// # Panics
/// If `scored` is empty — there is nothing to average.
#[must_use]
pub fn aggregate(scored: &[ScoredTask]) -> SuiteReport {
    assert!(!scored.is_empty(), "cannot aggregate an empty suite");
    let mut rows = Vec::new();
    for tier in [Tier::Simple, Tier::Medium, Tier::Hard] {
        let in_tier: Vec<&TaskScore> = scored
            .iter()
            .filter(|t| t.tier == tier)
            .map(|t| &t.score)
            .collect();
        if !in_tier.is_empty() {
            rows.push(mean_row(tier.label(), &in_tier));
        }
    }
    let all: Vec<&TaskScore> = scored.iter().map(|t| &t.score).collect();
    SuiteReport {
        rows,
        overall: mean_row("overall", &all),
    }
}

/// Fixed-width text table over a [`SuiteReport`]; byte-stable for identical
/// inputs.
#[must_use]
pub fn render_table(report: &SuiteReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:>5} {:>7} {:>9}\n",
        "tier", "tasks", "sr%", "sub-sr%"
    ));
    for row in report.rows.iter().chain(std::iter::once(&report.overall)) {
        out.push_str(&format!(
            "{:<8} {:>5} {:>7.1} {:>9.1}\n",
            row.label, row.tasks, row.sr, row.sub_sr
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_step;
    use crate::scene::{Aabb, ObjectInstance, Room, Vec3};

    fn boxed(min: [f64; 3], max: [f64; 3]) -> Aabb {
        Aabb::new(Vec3::from_array(min), Vec3::from_array(max))
    }

    fn object(name: &str, id: u32, min: [f64; 3], max: [f64; 3]) -> ObjectInstance {
        ObjectInstance {
            name: name.to_string(),
            id,
            aabb: boxed(min, max),
            movable: true,
            nested_in: None,
            home_room: 0,
        }
    }

    /// Room 1: table, box, mug. Room 2: shelf.
    fn test_scene() -> Scene {
        let mut scene = Scene {
            rooms: vec![
                Room {
                    id: 1,
                    aabb: boxed([0.0, 0.0, 0.0], [4.0, 3.0, 4.0]),
                    objects: vec![
                        object("table", 0, [1.0, 0.0, 1.0], [2.0, 0.8, 2.0]),
                        object("box", 0, [3.0, 0.0, 3.0], [3.4, 0.3, 3.4]),
                        object("mug", 0, [0.2, 0.0, 0.2], [0.3, 0.1, 0.3]),
                    ],
                },
                Room {
                    id: 2,
                    aabb: boxed([4.0, 0.0, 0.0], [8.0, 3.0, 4.0]),
                    objects: vec![object("shelf", 0, [5.0, 0.0, 1.0], [6.0, 1.5, 2.0])],
                },
            ],
            global_floor_elevations: vec![],
        };
        scene.validate().unwrap();
        scene
    }

    fn traj(lines: &[&str]) -> Trajectory {
        Trajectory {
            task: "test".to_string(),
            steps: lines.iter().map(|l| parse_step(l).unwrap()).collect(),
            new_room_order: None,
        }
    }

    fn gold_two_moves() -> Trajectory {
        traj(&[
            "<PICK UP box(0) from room(1) in room(1)>",
            "<GO TO NEW ROOM>",
            "<PUT DOWN box(0) from room(1) on shelf(0) in room(2)>",
            "<GO TO ROOM(1)>",
            "<PICK UP mug(0) from room(1) in room(1)>",
            "<PUT DOWN mug(0) from room(1) on table(0) in room(1)>",
        ])
    }

    #[test]
    fn subgoals_follow_gold_order() {
        let scene = test_scene();
        let subgoals = extract_subgoals(&scene, &gold_two_moves(), 1).unwrap();
        assert_eq!(subgoals.len(), 4);
        assert!(
            matches!(&subgoals[0], SubGoal::Pick { object, origin: 1 } if object.name == "box")
        );
        assert!(matches!(&subgoals[1], SubGoal::Put { room: 2, .. }));
        assert!(
            matches!(&subgoals[3], SubGoal::Put { room: 1, target: PutTarget::Object(t), .. } if t.name == "table")
        );
    }

    #[test]
    fn invalid_gold_is_rejected() {
        let scene = test_scene();
        let bad = traj(&["<PICK UP ghost(0) from room(1) in room(1)>"]);
        assert!(matches!(
            extract_subgoals(&scene, &bad, 1),
            Err(MetricsError::GoldInvalidStep {
                index: 0,
                kind: ErrorKind::ObjectAbsent
            })
        ));
        let holding = traj(&["<PICK UP box(0) from room(1) in room(1)>"]);
        assert!(matches!(
            extract_subgoals(&scene, &holding, 1),
            Err(MetricsError::GoldHandOccupied)
        ));
    }

    #[test]
    fn gold_scores_itself_perfectly() {
        let scene = test_scene();
        let gold = gold_two_moves();
        let s = score(&scene, &gold, &gold, 1).unwrap();
        assert_eq!(s.sr, 1.0);
        assert_eq!(s.sub_sr, 1.0);
        assert_eq!(s.achieved, vec![0, 1, 2, 3]);
        assert_eq!(s.total, 4);
    }

    #[test]
    fn half_the_subgoals_scores_half() {
        let scene = test_scene();
        let gold = gold_two_moves();
        // Only the box leg, not the mug leg.
        let pred = traj(&[
            "<PICK UP box(0) from room(1) in room(1)>",
            "<GO TO NEW ROOM>",
            "<PUT DOWN box(0) from room(1) on shelf(0) in room(2)>",
        ]);
        let s = score(&scene, &gold, &pred, 1).unwrap();
        assert_eq!(s.sub_sr, 0.5);
        assert_eq!(s.achieved, vec![0, 1]);
        assert_eq!(s.sr, 0.0, "world differs: mug was never moved");
    }

    #[test]
    fn out_of_order_interactions_earn_no_credit() {
        let scene = test_scene();
        let gold = gold_two_moves();
        // Mug leg first, then box leg: the walk skips the mug interactions
        // (pointer still on the box pick), then matches the box leg.
        let pred = traj(&[
            "<PICK UP mug(0) from room(1) in room(1)>",
            "<PUT DOWN mug(0) from room(1) on table(0) in room(1)>",
            "<PICK UP box(0) from room(1) in room(1)>",
            "<GO TO NEW ROOM>",
            "<PUT DOWN box(0) from room(1) on shelf(0) in room(2)>",
        ]);
        let s = score(&scene, &gold, &pred, 1).unwrap();
        assert_eq!(s.sub_sr, 0.5);
        assert_eq!(s.achieved, vec![0, 1]);
        // The final worlds actually agree; ordering alone costs the strict
        // score.
        assert_eq!(s.sr, 0.0);
    }

    #[test]
    fn extra_move_blocks_strict_success_but_not_partial() {
        let scene = test_scene();
        let gold = gold_two_moves();
        let mut lines = vec![
            "<PICK UP box(0) from room(1) in room(1)>",
            "<GO TO NEW ROOM>",
            "<PUT DOWN box(0) from room(1) on shelf(0) in room(2)>",
            "<GO TO ROOM(1)>",
            "<PICK UP mug(0) from room(1) in room(1)>",
            "<PUT DOWN mug(0) from room(1) on table(0) in room(1)>",
        ];
        // All four sub-goals achieved, then one gratuitous extra move.
        lines.push("<PICK UP mug(0) from room(1) in room(1)>");
        lines.push("<PUT DOWN mug(0) from room(1) on floor in room(1)>");
        let s = score(&scene, &gold, &traj(&lines), 1).unwrap();
        assert_eq!(s.sub_sr, 1.0);
        assert_eq!(s.sr, 0.0, "final mug placement differs from gold");
    }

    #[test]
    fn invalid_interactions_never_match() {
        let scene = test_scene();
        let gold = gold_two_moves();
        // The box pick happens in the wrong room clause, so it is invalid
        // and must not advance the walk even though the token text matches
        // the sub-goal's object.
        let pred = traj(&[
            "<PICK UP box(0) from room(1) in room(2)>",
            "<PICK UP box(0) from room(1) in room(1)>",
        ]);
        let s = score(&scene, &gold, &pred, 1).unwrap();
        assert_eq!(s.achieved, vec![0]);
        assert_eq!(s.sub_sr, 0.25);
    }

    #[test]
    fn empty_gold_interaction_list_scores_full_partial_credit() {
        let scene = test_scene();
        let gold = traj(&["<GO TO NEW ROOM>", "<GO TO ROOM(1)>"]);
        let pred = traj(&["<GO TO NEW ROOM>", "<GO TO ROOM(1)>"]);
        let s = score(&scene, &gold, &pred, 1).unwrap();
        assert_eq!(s.sub_sr, 1.0);
        assert_eq!(s.total, 0);
        assert_eq!(s.sr, 1.0);
    }

    #[test]
    fn aggregation_rounds_to_one_decimal() {
        let mk = |tier, sr, sub_sr| ScoredTask {
            name: "t".to_string(),
            tier,
            score: TaskScore {
                sr,
                sub_sr,
                achieved: vec![],
                total: 0,
            },
        };
        let scored = vec![
            mk(Tier::Simple, 1.0, 1.0),
            mk(Tier::Simple, 0.0, 0.5),
            mk(Tier::Simple, 1.0, 1.0),
            mk(Tier::Hard, 0.0, 0.25),
        ];
        let report = aggregate(&scored);
        assert_eq!(report.rows.len(), 2, "medium tier absent");
        let simple = &report.rows[0];
        assert_eq!(simple.label, "simple");
        assert_eq!(simple.sr, 66.7);
        assert_eq!(simple.sub_sr, 83.3);
        let hard = &report.rows[1];
        assert_eq!(hard.sr, 0.0);
        assert_eq!(hard.sub_sr, 25.0);
        assert_eq!(report.overall.tasks, 4);
        assert_eq!(report.overall.sr, 50.0);
        assert_eq!(report.overall.sub_sr, 68.8, "mean 0.6875 rounds up");
    }

    #[test]
    fn suite_scoring_matches_sequential_and_renders_stably() {
        let scene = test_scene();
        let gold = gold_two_moves();
        let pred_half = traj(&[
            "<PICK UP box(0) from room(1) in room(1)>",
            "<GO TO NEW ROOM>",
            "<PUT DOWN box(0) from room(1) on shelf(0) in room(2)>",
        ]);
        let tasks: Vec<SuiteTask> = vec![
            SuiteTask {
                name: "exact".to_string(),
                tier: Tier::Simple,
                scene: scene.clone(),
                gold: gold.clone(),
                pred: gold.clone(),
                start_room: 1,
            },
            SuiteTask {
                name: "half".to_string(),
                tier: Tier::Hard,
                scene,
                gold,
                pred: pred_half,
                start_room: 1,
            },
        ];
        let par = score_suite(&tasks).unwrap();
        let seq = score_suite_seq(&tasks).unwrap();
        assert_eq!(par, seq);
        let report = aggregate(&par);
        let table = render_table(&report);
        assert_eq!(table, render_table(&aggregate(&seq)));
        assert!(table.contains("simple"));
        assert!(table.contains("overall"));
        assert!(table.lines().count() == 4);
    }
}
