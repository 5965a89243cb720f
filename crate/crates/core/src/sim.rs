//! Replayable trajectory validation against a scene.
//!
//! The simulator tracks the agent's room, a single-slot hand, the visited-room
//! set, and per-room contents with support relations. Every step gets a
//! verdict; an invalid step is a no-op (the world state is left untouched) and
//! validation always continues to the end. A trajectory is valid iff every
//! step is valid **and** the hand is empty afterwards.
//!
//! Step rules, checked in order — location, then referenced objects, then
//! hand state:
//!
//! * `GO TO ROOM(r)`: `r` must exist and already be visited. Navigating to
//!   the current room is a valid no-op, flagged with a warning.
//! * `GO TO NEW ROOM`: valid iff an unvisited room exists; the destination is
//!   the lowest-id unvisited room. A trajectory may carry a `new_room_order`
//!   replay annotation naming destinations for successive steps; entries that
//!   are stale (missing or already visited) fall back to the lowest-id rule —
//!   the annotation is a replay aid, never part of validity.
//! * `PICK UP o from room(origin) in room(cur)`: agent must be in `cur`, the
//!   object (matched by name, id, **and** origin) must be present there, and
//!   the hand must be free. Picking up takes the object along with any
//!   objects nested in it (explicit links only) that are still co-located.
//! * `PUT DOWN o from room(origin) on target in room(r)`: agent must be in
//!   `r`, must be holding exactly `o`, and the support must be present in `r`
//!   (the literal `floor` is always a legal support). The object's box is
//!   re-centered on the support's top face; nested children ride along.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Action, ObjectRef, PutTarget, RoomId, Trajectory};
use crate::par;
use crate::scene::{Aabb, Scene, Vec3};

/// Full identity of an object at runtime. Instance ids are scoped per name
/// per room, so identity needs the room the object originated in; tokens
/// carry it in their `from room(id)` clause and it never changes as the
/// object moves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectKey {
    pub name: String,
    pub id: u32,
    pub origin: RoomId,
}

impl ObjectKey {
    #[must_use]
    pub fn new(name: impl Into<String>, id: u32, origin: RoomId) -> Self {
        Self {
            name: name.into(),
            id,
            origin,
        }
    }

    /// The `name(id)` part, without the origin.
    #[must_use]
    pub fn label(&self) -> String {
        format!("{}({})", self.name, self.id)
    }

    #[must_use]
    pub fn object_ref(&self) -> ObjectRef {
        ObjectRef::new(self.name.clone(), self.id)
    }
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})@{}", self.name, self.id, self.origin)
    }
}

/// What an object currently rests on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SupportRef {
    Floor,
    Object(ObjectKey),
}

impl fmt::Display for SupportRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportRef::Floor => f.write_str("floor"),
            SupportRef::Object(k) => k.fmt(f),
        }
    }
}

/// An object's situation within a room.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub support: SupportRef,
    pub aabb: Aabb,
}

/// The held object plus any nested objects that came with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldObject {
    pub key: ObjectKey,
    pub children: Vec<ObjectKey>,
}

/// Mutable world state during replay.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    agent_room: RoomId,
    visited: BTreeSet<RoomId>,
    hand: Option<HeldObject>,
    rooms: BTreeMap<RoomId, BTreeMap<ObjectKey, Placement>>,
    /// Static forward containment links from the scene.
    nested_children: BTreeMap<ObjectKey, Vec<ObjectKey>>,
    /// Static full extents of every object, used to re-derive boxes on
    /// placement.
    extents: BTreeMap<ObjectKey, Vec3>,
    room_aabbs: BTreeMap<RoomId, Aabb>,
    /// Remaining replay annotation for `GO TO NEW ROOM` steps.
    new_room_queue: VecDeque<RoomId>,
    step_index: usize,
}

/// Why a step was rejected; `None` for valid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "none")]
    None,
    WrongRoomPick,
    WrongRoomPut,
    NoSuchRoom,
    AllRoomsExplored,
    ObjectAbsent,
    NotHolding,
    HandOccupied,
    RoomNotVisited,
}

/// Non-fatal observations on valid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepWarning {
    #[serde(rename = "go_to_current_room")]
    GoToCurrentRoom,
}

/// Per-step outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub index: usize,
    pub valid: bool,
    pub error_kind: ErrorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<StepWarning>,
}

/// Serializable view of a [`SimState`]; ordering is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub agent_room: RoomId,
    pub hand: Option<HandSnapshot>,
    pub visited: Vec<RoomId>,
    pub rooms: Vec<RoomSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandSnapshot {
    pub object: String,
    pub origin: RoomId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomSnapshot {
    pub room: RoomId,
    pub contents: Vec<ContentEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentEntry {
    pub object: String,
    pub origin: RoomId,
    pub support: String,
}

/// Outcome of replaying a whole trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub verdicts: Vec<StepVerdict>,
    pub final_state: StateSnapshot,
}

impl ValidationReport {
    /// Count of invalid steps.
    #[must_use]
    pub fn invalid_steps(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.valid).count()
    }
}

/// Setup-level failures; step-level problems are verdicts, not errors.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("start room {0} does not exist in the scene")]
    NoSuchStartRoom(RoomId),
    #[error("world states describe different scenes")]
    SceneMismatch,
}

impl SimState {
    /// Initial world state: every object in its home room, top-level objects
    /// on the floor, nested objects on their parent; the agent stands in
    /// `start_room` which counts as visited.
    pub fn init(
        scene: &Scene,
        start_room: RoomId,
        new_room_order: &[RoomId],
    ) -> Result<Self, SimError> {
        if scene.room(start_room).is_none() {
            return Err(SimError::NoSuchStartRoom(start_room));
        }
        let mut rooms: BTreeMap<RoomId, BTreeMap<ObjectKey, Placement>> = BTreeMap::new();
        let mut nested_children: BTreeMap<ObjectKey, Vec<ObjectKey>> = BTreeMap::new();
        let mut extents = BTreeMap::new();
        let mut room_aabbs = BTreeMap::new();
        for room in &scene.rooms {
            room_aabbs.insert(room.id, room.aabb);
            let contents = rooms.entry(room.id).or_default();
            for obj in &room.objects {
                let key = ObjectKey::new(obj.name.clone(), obj.id, room.id);
                let support = match &obj.nested_in {
                    Some(parent) => {
                        let parent_key = ObjectKey::new(parent.name.clone(), parent.id, room.id);
                        nested_children
                            .entry(parent_key.clone())
                            .or_default()
                            .push(key.clone());
                        SupportRef::Object(parent_key)
                    }
                    None => SupportRef::Floor,
                };
                extents.insert(key.clone(), obj.aabb.extents());
                contents.insert(
                    key,
                    Placement {
                        support,
                        aabb: obj.aabb,
                    },
                );
            }
        }
        Ok(Self {
            agent_room: start_room,
            visited: BTreeSet::from([start_room]),
            hand: None,
            rooms,
            nested_children,
            extents,
            room_aabbs,
            new_room_queue: new_room_order.iter().copied().collect(),
            step_index: 0,
        })
    }

    #[must_use]
    pub fn agent_room(&self) -> RoomId {
        self.agent_room
    }

    #[must_use]
    pub fn hand(&self) -> Option<&HeldObject> {
        self.hand.as_ref()
    }

    #[must_use]
    pub fn visited(&self) -> &BTreeSet<RoomId> {
        &self.visited
    }

    #[must_use]
    pub fn steps_taken(&self) -> usize {
        self.step_index
    }

    /// Every object identity currently anywhere in the world (rooms + hand).
    #[must_use]
    pub fn all_objects(&self) -> BTreeSet<ObjectKey> {
        let mut all: BTreeSet<ObjectKey> = self
            .rooms
            .values()
            .flat_map(|c| c.keys().cloned())
            .collect();
        if let Some(h) = &self.hand {
            all.insert(h.key.clone());
            all.extend(h.children.iter().cloned());
        }
        all
    }

    /// Deterministic serializable view (excludes the step counter and static
    /// scene data).
    #[must_use]
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            agent_room: self.agent_room,
            hand: self.hand.as_ref().map(|h| HandSnapshot {
                object: h.key.label(),
                origin: h.key.origin,
                children: h.children.iter().map(ObjectKey::to_string).collect(),
            }),
            visited: self.visited.iter().copied().collect(),
            rooms: self
                .rooms
                .iter()
                .map(|(&room, contents)| RoomSnapshot {
                    room,
                    contents: contents
                        .iter()
                        .map(|(key, placement)| ContentEntry {
                            object: key.label(),
                            origin: key.origin,
                            support: placement.support.to_string(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Static nested objects currently co-located with `root` in `room`,
    /// gathered breadth-first so parents precede descendants. A link only
    /// carries through objects that are actually present — a nested object
    /// that was moved elsewhere earlier no longer travels with its parent.
    fn collect_present_descendants(&self, root: &ObjectKey, room: RoomId) -> Vec<ObjectKey> {
        let contents = &self.rooms[&room];
        let mut out = Vec::new();
        let mut frontier = vec![root.clone()];
        while let Some(parent) = frontier.pop() {
            if let Some(children) = self.nested_children.get(&parent) {
                for child in children {
                    if contents.contains_key(child) {
                        out.push(child.clone());
                        frontier.push(child.clone());
                    }
                }
            }
        }
        out
    }

    /// Finds the support object named by a put-down in `room`. When two
    /// objects share `name(id)` (a native one and a visitor), the one whose
    /// origin is the room itself wins; otherwise the lowest origin wins.
    fn resolve_target(&self, room: RoomId, target: &ObjectRef) -> Option<ObjectKey> {
        let contents = self.rooms.get(&room)?;
        let mut candidates: Vec<&ObjectKey> = contents
            .keys()
            .filter(|k| k.name == target.name && k.id == target.id)
            .collect();
        candidates.sort_by_key(|k| (k.origin != room, k.origin));
        candidates.first().map(|k| (*k).clone())
    }

    /// Box for an object of the given extents resting on `support` in `room`.
    fn placement_aabb(&self, room: RoomId, extents: Vec3, support: &SupportRef) -> Aabb {
        let room_aabb = self.room_aabbs[&room];
        let (cx, cz, base_y) = match support {
            SupportRef::Floor => {
                let c = room_aabb.center();
                (c.x, c.z, room_aabb.min.y)
            }
            SupportRef::Object(parent) => {
                let parent_aabb = self.rooms[&room][parent].aabb;
                let c = parent_aabb.center();
                (c.x, c.z, parent_aabb.max.y)
            }
        };
        Aabb::new(
            Vec3::new(cx - 0.5 * extents.x, base_y, cz - 0.5 * extents.z),
            Vec3::new(
                cx + 0.5 * extents.x,
                base_y + extents.y,
                cz + 0.5 * extents.z,
            ),
        )
    }
}

/// Applies one action. Returns the verdict; on an invalid verdict the state
/// is untouched apart from the step counter.
pub fn step(state: &mut SimState, action: &Action) -> StepVerdict {
    let index = state.step_index;
    state.step_index += 1;
    let valid = StepVerdict {
        index,
        valid: true,
        error_kind: ErrorKind::None,
        warning: None,
    };
    let invalid = |error_kind| StepVerdict {
        index,
        valid: false,
        error_kind,
        warning: None,
    };

    match action {
        Action::Thought { .. } => valid,

        Action::GoToRoom { room } => {
            if !state.room_aabbs.contains_key(room) {
                return invalid(ErrorKind::NoSuchRoom);
            }
            if !state.visited.contains(room) {
                return invalid(ErrorKind::RoomNotVisited);
            }
            let warning = (*room == state.agent_room).then_some(StepWarning::GoToCurrentRoom);
            state.agent_room = *room;
            StepVerdict { warning, ..valid }
        }

        Action::GoToNewRoom => {
            let lowest_unvisited = state
                .room_aabbs
                .keys()
                .copied()
                .find(|r| !state.visited.contains(r));
            let Some(lowest) = lowest_unvisited else {
                return invalid(ErrorKind::AllRoomsExplored);
            };
            let dest = match state.new_room_queue.pop_front() {
                Some(annotated)
                    if state.room_aabbs.contains_key(&annotated)
                        && !state.visited.contains(&annotated) =>
                {
                    annotated
                }
                // Stale or absent annotation: lowest-id unvisited room.
                _ => lowest,
            };
            state.visited.insert(dest);
            state.agent_room = dest;
            valid
        }

        Action::PickUp {
            object,
            origin_room,
            current_room,
        } => {
            if state.agent_room != *current_room {
                return invalid(ErrorKind::WrongRoomPick);
            }
            let key = ObjectKey::new(object.name.clone(), object.id, *origin_room);
            if !state.rooms[&state.agent_room].contains_key(&key) {
                return invalid(ErrorKind::ObjectAbsent);
            }
            if state.hand.is_some() {
                return invalid(ErrorKind::HandOccupied);
            }
            let children = state.collect_present_descendants(&key, state.agent_room);
            let contents = state
                .rooms
                .get_mut(&state.agent_room)
                .expect("agent room exists");
            contents.remove(&key);
            for child in &children {
                contents.remove(child);
            }
            state.hand = Some(HeldObject { key, children });
            valid
        }

        Action::PutDown {
            object,
            origin_room,
            target,
            room,
        } => {
            if state.agent_room != *room {
                return invalid(ErrorKind::WrongRoomPut);
            }
            let key = ObjectKey::new(object.name.clone(), object.id, *origin_room);
            match &state.hand {
                Some(held) if held.key == key => {}
                _ => return invalid(ErrorKind::NotHolding),
            }
            let support = match target {
                PutTarget::Floor => SupportRef::Floor,
                PutTarget::Object(target_ref) => match state.resolve_target(*room, target_ref) {
                    Some(found) => SupportRef::Object(found),
                    None => return invalid(ErrorKind::ObjectAbsent),
                },
            };
            let held = state.hand.take().expect("checked above");
            // Root first, then children breadth-first so each child's static
            // parent is already placed when its box is derived.
            let root_aabb = state.placement_aabb(*room, state.extents[&held.key], &support);
            state
                .rooms
                .get_mut(room)
                .expect("agent room exists")
                .insert(
                    held.key.clone(),
                    Placement {
                        support,
                        aabb: root_aabb,
                    },
                );
            for child in &held.children {
                let parent = state
                    .nested_children
                    .iter()
                    .find(|(_, kids)| kids.contains(child))
                    .map(|(p, _)| p.clone())
                    .expect("collected via nesting links");
                let child_support = SupportRef::Object(parent);
                let child_aabb = state.placement_aabb(*room, state.extents[child], &child_support);
                state
                    .rooms
                    .get_mut(room)
                    .expect("agent room exists")
                    .insert(
                        child.clone(),
                        Placement {
                            support: child_support,
                            aabb: child_aabb,
                        },
                    );
            }
            valid
        }
    }
}

/// Replays a whole trajectory from `start_room`, returning the report along
/// with the final world state (for downstream state comparison). Never
/// aborts early: every step gets a verdict. The trajectory is valid iff all
/// steps are valid and the hand ends empty.
pub fn replay(
    scene: &Scene,
    trajectory: &Trajectory,
    start_room: RoomId,
) -> Result<(ValidationReport, SimState), SimError> {
    let order = trajectory.new_room_order.clone().unwrap_or_default();
    let mut state = SimState::init(scene, start_room, &order)?;
    let verdicts: Vec<StepVerdict> = trajectory
        .steps
        .iter()
        .map(|action| step(&mut state, action))
        .collect();
    let valid = verdicts.iter().all(|v| v.valid) && state.hand.is_none();
    let report = ValidationReport {
        valid,
        verdicts,
        final_state: state.snapshot(),
    };
    Ok((report, state))
}

/// [`replay`] without the final state.
pub fn validate(
    scene: &Scene,
    trajectory: &Trajectory,
    start_room: RoomId,
) -> Result<ValidationReport, SimError> {
    replay(scene, trajectory, start_room).map(|(report, _)| report)
}

/// Validates many (trajectory, start room) pairs against one scene. Fans out
/// across tasks when the `parallel` feature is enabled; results keep input
/// order either way.
pub fn validate_batch(
    scene: &Scene,
    items: &[(Trajectory, RoomId)],
) -> Vec<Result<ValidationReport, SimError>> {
    par::map_ordered(items, |(trajectory, start)| {
        validate(scene, trajectory, *start)
    })
}

/// Sequential twin of [`validate_batch`], kept unconditionally for
/// parallel-vs-sequential comparison benches.
pub fn validate_batch_seq(
    scene: &Scene,
    items: &[(Trajectory, RoomId)],
) -> Vec<Result<ValidationReport, SimError>> {
    items
        .iter()
        .map(|(trajectory, start)| validate(scene, trajectory, *start))
        .collect()
}

/// One side of a placement difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum DiffSide {
    OnlyInLeft,
    OnlyInRight,
}

/// Where an object is; the hand has no support component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Location {
    Room(RoomId),
    Hand,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Room(r) => write!(f, "room {r}"),
            Location::Hand => f.write_str("hand"),
        }
    }
}

/// One placement present in exactly one of two compared states.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DiffEntry {
    pub object: ObjectKey,
    pub location: Location,
    pub support: Option<SupportRef>,
    pub side: DiffSide,
}

/// Set difference over (object, location, support) triples of two states of
/// the same scene; placement coordinates are deliberately ignored. Empty
/// means the worlds agree.
pub fn world_diff(left: &SimState, right: &SimState) -> Result<Vec<DiffEntry>, SimError> {
    if left.rooms.keys().ne(right.rooms.keys()) || left.all_objects() != right.all_objects() {
        return Err(SimError::SceneMismatch);
    }
    let triples = |s: &SimState| -> BTreeSet<(ObjectKey, Location, Option<SupportRef>)> {
        let mut set = BTreeSet::new();
        for (&room, contents) in &s.rooms {
            for (key, placement) in contents {
                set.insert((
                    key.clone(),
                    Location::Room(room),
                    Some(placement.support.clone()),
                ));
            }
        }
        if let Some(h) = &s.hand {
            set.insert((h.key.clone(), Location::Hand, None));
            for child in &h.children {
                set.insert((child.clone(), Location::Hand, None));
            }
        }
        set
    };
    let l = triples(left);
    let r = triples(right);
    let mut out: Vec<DiffEntry> = l
        .difference(&r)
        .map(|(object, location, support)| DiffEntry {
            object: object.clone(),
            location: location.clone(),
            support: support.clone(),
            side: DiffSide::OnlyInLeft,
        })
        .chain(
            r.difference(&l)
                .map(|(object, location, support)| DiffEntry {
                    object: object.clone(),
                    location: location.clone(),
                    support: support.clone(),
                    side: DiffSide::OnlyInRight,
                }),
        )
        .collect();
    out.sort();
    Ok(out)
}
