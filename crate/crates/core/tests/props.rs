//! Property tests: grammar round trips under generated actions and noisy
//! whitespace, simulator invariants under random action streams, fusion
//! distribution laws, and selection-order stability of the point sampler.

use proptest::prelude::*;

use memsim_core::grammar::{
    self, parse_step, serialize_step, Action, ObjectRef, PutTarget, Trajectory,
};
use memsim_core::linalg::Mat;
use memsim_core::memory::{
    attention_entropy, fps_seq, fuse_detailed, FusionConfig, MemoryBank, TimeEmbed,
};
use memsim_core::scene::{Scene, Vec3};
use memsim_core::sim::{self, SimState};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Object names in normalized form: words of letters/digits/hyphens joined by
/// single spaces, which is exactly what the parser's whitespace collapsing
/// produces.
fn name_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec("[a-z][a-z0-9-]{0,6}", 1..=3).prop_map(|words| words.join(" "))
}

fn object_ref_strategy() -> impl Strategy<Value = ObjectRef> {
    (name_strategy(), 0u32..50).prop_map(|(name, id)| ObjectRef { name, id })
}

fn put_target_strategy() -> impl Strategy<Value = PutTarget> {
    prop_oneof![
        2 => object_ref_strategy().prop_map(PutTarget::Object),
        1 => Just(PutTarget::Floor),
    ]
}

/// Thought lines: printable ASCII without angle brackets so they can never be
/// mistaken for tokens.
fn thought_strategy() -> impl Strategy<Value = Action> {
    "[ -;=?-~]{0,40}".prop_map(|text| Action::Thought { text })
}

fn action_strategy() -> impl Strategy<Value = Action> {
    prop_oneof![
        Just(Action::GoToNewRoom),
        (0u32..300).prop_map(|room| Action::GoToRoom { room }),
        (object_ref_strategy(), 0u32..30, 0u32..30).prop_map(
            |(object, origin_room, current_room)| {
                Action::PickUp {
                    object,
                    origin_room,
                    current_room,
                }
            }
        ),
        (
            object_ref_strategy(),
            0u32..30,
            put_target_strategy(),
            0u32..30
        )
            .prop_map(|(object, origin_room, target, room)| Action::PutDown {
                object,
                origin_room,
                target,
                room
            }),
        thought_strategy(),
    ]
}

// ---------------------------------------------------------------------------
// Grammar round trips
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(action in action_strategy()) {
        let line = serialize_step(&action);
        let back = parse_step(&line).expect("canonical lines must parse");
        prop_assert_eq!(back, action);
    }

    /// Extra interior whitespace and bracket padding never change the parse.
    #[test]
    fn parse_tolerates_extra_whitespace(
        action in action_strategy(),
        pad in proptest::collection::vec(1usize..=3, 0..20),
    ) {
        let canonical = serialize_step(&action);
        if let Action::Thought { .. } = action {
            return Ok(()); // thought text is preserved verbatim, not renormalized
        }
        // Expand each existing single space to 1-3 spaces, cycling the pad list.
        let mut noisy = String::new();
        let mut pads = pad.iter().copied().cycle();
        for ch in canonical.chars() {
            if ch == ' ' {
                let n = pads.next().unwrap_or(1);
                noisy.extend(std::iter::repeat_n(' ', n));
            } else {
                noisy.push(ch);
            }
        }
        // Pad just inside the brackets as well.
        let inner = &noisy[1..noisy.len() - 1];
        let padded = format!("< {inner} >");
        let back = parse_step(&padded).expect("whitespace-noisy token must parse");
        prop_assert_eq!(back, action);
    }

    /// A leading zero turns a canonical id into a parse error.
    #[test]
    fn leading_zero_room_ids_are_rejected(room in 0u32..100) {
        let line = format!("<GO TO ROOM(0{room})>");
        prop_assert!(parse_step(&line).is_err());
    }

    /// Whole documents survive the file round trip, including thought lines
    /// with JSON-hostile characters.
    #[test]
    fn trajectory_document_round_trip(
        actions in proptest::collection::vec(action_strategy(), 1..25),
        task in "[ -;=?-~]{1,30}",
        order in proptest::option::of(proptest::collection::vec(0u32..20, 0..5)),
    ) {
        let traj = Trajectory { task, steps: actions, new_room_order: order };
        let doc = serde_json::to_string(&traj.to_file()).unwrap();
        let back = grammar::parse_trajectory(&doc).expect("round-tripped document must parse");
        prop_assert_eq!(back, traj);
    }
}

// ---------------------------------------------------------------------------
// Simulator invariants
// ---------------------------------------------------------------------------

fn cooking_scene() -> Scene {
    let raw = std::fs::read_to_string(format!(
        "{}/tests/data/scene_cooking.json",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap();
    Scene::parse(&raw).unwrap()
}

/// Mixed pool of sensible and nonsensical steps over the kitchen fixture.
fn kitchen_action_strategy() -> impl Strategy<Value = Action> {
    let obj = |name: &str, id: u32| ObjectRef {
        name: name.to_string(),
        id,
    };
    let objects = prop_oneof![
        Just(obj("seasonings", 0)),
        Just(obj("apron", 0)),
        Just(obj("tomatoes", 0)),
        Just(obj("eggs", 0)),
        Just(obj("cooking pan", 0)),
        Just(obj("table", 0)),
        Just(obj("telescope", 0)), // never present anywhere
    ];
    let rooms = prop_oneof![Just(4u32), Just(5u32), Just(8u32), Just(99u32)];
    let targets = prop_oneof![
        Just(PutTarget::Object(obj("countertop", 0))),
        Just(PutTarget::Object(obj("countertop", 1))),
        Just(PutTarget::Object(obj("stove", 0))),
        Just(PutTarget::Object(obj("telescope", 9))),
        Just(PutTarget::Floor),
    ];
    prop_oneof![
        2 => Just(Action::GoToNewRoom),
        2 => rooms.clone().prop_map(|room| Action::GoToRoom { room }),
        3 => (objects.clone(), rooms.clone(), rooms.clone()).prop_map(
            |(object, origin_room, current_room)| Action::PickUp { object, origin_room, current_room }
        ),
        3 => (objects, rooms.clone(), targets, rooms).prop_map(
            |(object, origin_room, target, room)| Action::PutDown { object, origin_room, target, room }
        ),
    ]
}

/// Objects in a snapshot: everything in every room plus the held stack.
fn object_census(snapshot: &memsim_core::sim::StateSnapshot) -> usize {
    let in_rooms: usize = snapshot.rooms.iter().map(|r| r.contents.len()).sum();
    let in_hand = snapshot.hand.as_ref().map_or(0, |h| 1 + h.children.len());
    in_rooms + in_hand
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// No step — valid or not — creates or destroys objects; invalid steps
    /// are exact no-ops; the visited set only grows.
    #[test]
    fn random_streams_conserve_objects(actions in proptest::collection::vec(kitchen_action_strategy(), 1..40)) {
        let scene = cooking_scene();
        let mut state = SimState::init(&scene, 4, &[]).unwrap();
        let initial = object_census(&state.snapshot());
        prop_assert_eq!(initial, 13);

        for action in &actions {
            let before = state.snapshot();
            let verdict = sim::step(&mut state, action);
            let after = state.snapshot();
            if !verdict.valid {
                prop_assert_eq!(&after, &before, "invalid step must not mutate state");
            }
            prop_assert_eq!(object_census(&after), initial);
            for room in &before.visited {
                prop_assert!(after.visited.contains(room), "visited set must be monotone");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fusion distribution laws
// ---------------------------------------------------------------------------

fn small_config() -> FusionConfig {
    FusionConfig {
        d: 6,
        m: 4,
        n: 2,
        ..FusionConfig::default()
    }
}

fn mat_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    proptest::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |v| Mat::from_rows(v.chunks(cols).map(<[f64]>::to_vec).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_are_distributions(
        rows_per_room in proptest::collection::vec(1usize..=3, 1..=3),
        seed_cells in proptest::collection::vec(-2.0f64..2.0, 0..1),
    ) {
        let _ = seed_cells;
        let config = small_config();
        let mut bank = MemoryBank::new();
        let mut runner = 0u64;
        for (i, &rows) in rows_per_room.iter().enumerate() {
            runner += 1;
            // Deterministic but varied matrices; proptest varies the shape.
            let cell = |r: usize, c: usize, salt: u64| {
                let x = (r * 31 + c * 7) as f64 + salt as f64 * 0.37;
                (x * 0.7).sin() * 2.0
            };
            let key = Mat::from_rows(
                (0..rows).map(|r| (0..config.m).map(|c| cell(r, c, runner)).collect()).collect(),
            )
            .unwrap();
            let value = Mat::from_rows(
                (0..rows).map(|r| (0..config.m).map(|c| cell(r, c, runner + 100)).collect()).collect(),
            )
            .unwrap();
            bank.commit(i as u32 + 1, runner, key, value, TimeEmbed::None).unwrap();
        }

        let query = Mat::zeros(config.n, config.m);
        let out = fuse_detailed(&bank, &query, &config).unwrap();

        let total_rows: usize = rows_per_room.iter().sum();
        prop_assert_eq!(out.weights.rows(), config.n);
        prop_assert_eq!(out.weights.cols(), total_rows);
        for r in 0..out.weights.rows() {
            let row = out.weights.row(r);
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "row {} sums to {}", r, sum);
            prop_assert!(row.iter().all(|&w| w >= 0.0));
        }
        let h = attention_entropy(&out.weights);
        prop_assert!(h >= 0.0 && h <= (total_rows as f64).ln() + 1e-12);
    }

    /// The second half of every fused row is the query row, bit for bit.
    #[test]
    fn fused_output_carries_query_verbatim(query in mat_strategy(2, 4)) {
        let config = small_config();
        let mut bank = MemoryBank::new();
        let key = Mat::from_rows(vec![vec![0.3, -0.1, 0.8, 0.2], vec![1.0, 0.5, -0.4, 0.9]]).unwrap();
        let value = Mat::from_rows(vec![vec![2.0, 0.0, -1.0, 0.5], vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        bank.commit(1, 1, key, value, TimeEmbed::None).unwrap();

        let out = fuse_detailed(&bank, &query, &config).unwrap();
        prop_assert_eq!(out.fused.cols(), 2 * config.m);
        for r in 0..query.rows() {
            for c in 0..config.m {
                prop_assert_eq!(out.fused.get(r, config.m + c), query.get(r, c));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Point-sampler laws
// ---------------------------------------------------------------------------

fn points_strategy() -> impl Strategy<Value = Vec<Vec3>> {
    proptest::collection::vec(
        (-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0),
        1..64,
    )
    .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sampler_selects_unique_valid_indices(points in points_strategy(), k_frac in 0.0f64..=1.0) {
        let k = ((points.len() as f64) * k_frac).floor() as usize;
        let picked = fps_seq(&points, k, 0);
        prop_assert_eq!(picked.len(), k);
        let mut seen = std::collections::BTreeSet::new();
        for &i in &picked {
            prop_assert!(i < points.len());
            prop_assert!(seen.insert(i), "index {} picked twice", i);
        }
        if k > 0 {
            prop_assert_eq!(picked[0], 0, "selection starts at the given start index");
        }
    }

    /// Selecting more points never reorders the earlier picks.
    #[test]
    fn sampler_is_prefix_stable(points in points_strategy()) {
        let n = points.len();
        let full = fps_seq(&points, n, 0);
        for k in 0..n {
            let partial = fps_seq(&points, k, 0);
            prop_assert_eq!(&partial[..], &full[..k]);
        }
    }
}

#[cfg(feature = "parallel")]
mod parallel_props {
    use super::*;
    use memsim_core::memory::fps_par;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// The data-parallel reduction is bit-identical to the scan, ties and all.
        #[test]
        fn parallel_sampler_matches_sequential(points in points_strategy(), k_frac in 0.0f64..=1.0) {
            let k = ((points.len() as f64) * k_frac).floor() as usize;
            prop_assert_eq!(fps_par(&points, k, 0), fps_seq(&points, k, 0));
        }
    }
}
