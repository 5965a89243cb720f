//! Axis-aligned scene model and its reconstruction from labeled surfaces.
//!
//! A scene is a flat list of rooms, each an AABB containing objects that are
//! themselves AABBs. The up axis is +y. Scenes arrive two ways: hand-written
//! scene JSON, or reconstruction from per-room labeled surface point sets via
//! [`build_scene`], which applies the room-box rules:
//!
//! * floor and ceiling present: vertical extent spans floor minimum to ceiling
//!   maximum; horizontal extent is the x/z span of both point sets;
//! * floor missing: the lower bound falls back to the highest global floor
//!   elevation strictly below that room's ceiling maximum;
//! * ceiling missing: the upper bound is the highest point of the room's
//!   available cloud (floor points plus object vertices — the surface
//!   immediately above the floor);
//! * both missing: the room is discarded.
//!
//! Global floor elevations are the minimum heights of every floor surface in
//! the scan, deduplicated with a 1e-4 m merge tolerance.
//!
//! Within a room, instances sharing a name get ids by distance of their AABB
//! center to the world origin — `(0)` is the closest — which makes id
//! assignment deterministic and idempotent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::grammar::{self, ObjectRef, RoomId};

/// Tolerance for the object-center-inside-room invariant.
pub const ROOM_CONTAINMENT_EPSILON: f64 = 1e-6;

/// Merge tolerance for deduplicating global floor elevations, in meters.
pub const FLOOR_MERGE_TOLERANCE: f64 = 1e-4;

/// 3D point or vector; +y is up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    #[must_use]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[must_use]
    pub const fn from_array(a: [f64; 3]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            z: a[2],
        }
    }

    #[must_use]
    pub const fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[must_use]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Squared Euclidean distance to `other`.
    #[must_use]
    pub fn dist2(self, other: Vec3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }
}

impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Self::from_array(<[f64; 3]>::deserialize(deserializer)?))
    }
}

/// Axis-aligned bounding box; `min` is componentwise ≤ `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    #[must_use]
    pub const fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Smallest box containing all points; `None` on an empty slice.
    #[must_use]
    pub fn from_points(points: &[Vec3]) -> Option<Self> {
        let first = *points.first()?;
        let mut min = first;
        let mut max = first;
        for p in &points[1..] {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            min.z = min.z.min(p.z);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
            max.z = max.z.max(p.z);
        }
        Some(Self { min, max })
    }

    #[must_use]
    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
            0.5 * (self.min.z + self.max.z),
        )
    }

    /// Full edge lengths along each axis.
    #[must_use]
    pub fn extents(&self) -> Vec3 {
        Vec3::new(
            self.max.x - self.min.x,
            self.max.y - self.min.y,
            self.max.z - self.min.z,
        )
    }

    #[must_use]
    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x <= self.max.x
            && self.min.y <= self.max.y
            && self.min.z <= self.max.z
    }

    /// Point containment with a symmetric tolerance on every face.
    #[must_use]
    pub fn contains_point(&self, p: Vec3, eps: f64) -> bool {
        p.x >= self.min.x - eps
            && p.x <= self.max.x + eps
            && p.y >= self.min.y - eps
            && p.y <= self.max.y + eps
            && p.z >= self.min.z - eps
            && p.z <= self.max.z + eps
    }
}

/// One object instance inside a room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub name: String,
    pub id: u32,
    pub aabb: Aabb,
    #[serde(default)]
    pub movable: bool,
    /// Explicit containment link to another object in the same room, written
    /// as `name(id)`. Containment is never inferred from geometry.
    #[serde(
        default,
        with = "object_ref_string",
        skip_serializing_if = "Option::is_none"
    )]
    pub nested_in: Option<ObjectRef>,
    /// Room this instance belongs to; implied by file structure, filled in
    /// during validation.
    #[serde(skip)]
    pub home_room: RoomId,
}

impl ObjectInstance {
    #[must_use]
    pub fn object_ref(&self) -> ObjectRef {
        ObjectRef::new(self.name.clone(), self.id)
    }
}

/// Room: an AABB plus contained object instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    pub aabb: Aabb,
    #[serde(default)]
    pub objects: Vec<ObjectInstance>,
}

/// A validated scene. Rooms are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub rooms: Vec<Room>,
    /// Minimum heights of all floor surfaces in the originating scan,
    /// deduplicated; empty for hand-written scenes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub global_floor_elevations: Vec<f64>,
}

/// Scene-layer failures: all of these mean the input is unusable, as opposed
/// to a trajectory merely being invalid.
#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene document: {0}")]
    Document(String),
    #[error("duplicate room id {0}")]
    DuplicateRoom(RoomId),
    #[error("room {room}: invalid AABB (non-finite or min > max)")]
    InvalidRoomAabb { room: RoomId },
    #[error("room {room}, object {object}: invalid AABB (non-finite or min > max)")]
    InvalidObjectAabb { room: RoomId, object: ObjectRef },
    #[error("room {room}: illegal object name {name:?}")]
    IllegalObjectName { room: RoomId, name: String },
    #[error("room {room}: duplicate object {object}")]
    DuplicateObject { room: RoomId, object: ObjectRef },
    #[error("room {room}: ids for {name:?} are not in nearest-origin order")]
    NonCanonicalIds { room: RoomId, name: String },
    #[error("room {room}: object {object} center lies outside the room AABB")]
    ObjectOutsideRoom { room: RoomId, object: ObjectRef },
    #[error("room {room}: object {object} nests in unknown object {target}")]
    UnknownNestTarget {
        room: RoomId,
        object: ObjectRef,
        target: ObjectRef,
    },
    #[error("room {room}: containment cycle through {object}")]
    NestingCycle { room: RoomId, object: ObjectRef },
    #[error("room {room}: {surface} point set is present but empty")]
    EmptyPointSet { room: RoomId, surface: String },
    #[error("room {room}: {surface} contains a non-finite point")]
    NonFinitePoint { room: RoomId, surface: String },
    #[error("room {room}: no global floor elevation lies below the ceiling maximum")]
    NoElevationBelowCeiling { room: RoomId },
}

impl Scene {
    /// Deserializes and validates a scene document.
    pub fn parse(doc: &str) -> Result<Self, SceneError> {
        let mut scene: Scene =
            serde_json::from_str(doc).map_err(|e| SceneError::Document(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    /// Checks every scene invariant, sorts rooms by id, and fills in each
    /// object's `home_room`.
    pub fn validate(&mut self) -> Result<(), SceneError> {
        self.rooms.sort_by_key(|r| r.id);
        for w in self.rooms.windows(2) {
            if w[0].id == w[1].id {
                return Err(SceneError::DuplicateRoom(w[0].id));
            }
        }
        for room in &mut self.rooms {
            validate_room(room)?;
        }
        Ok(())
    }

    #[must_use]
    pub fn room(&self, id: RoomId) -> Option<&Room> {
        self.rooms
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.rooms[i])
    }

    #[must_use]
    pub fn room_ids(&self) -> Vec<RoomId> {
        self.rooms.iter().map(|r| r.id).collect()
    }
}

fn validate_room(room: &mut Room) -> Result<(), SceneError> {
    if !room.aabb.is_valid() {
        return Err(SceneError::InvalidRoomAabb { room: room.id });
    }
    let mut seen = BTreeSet::new();
    for obj in &mut room.objects {
        obj.home_room = room.id;
        if !grammar::is_valid_object_name(&obj.name) {
            return Err(SceneError::IllegalObjectName {
                room: room.id,
                name: obj.name.clone(),
            });
        }
        if !obj.aabb.is_valid() {
            return Err(SceneError::InvalidObjectAabb {
                room: room.id,
                object: obj.object_ref(),
            });
        }
        if !seen.insert((obj.name.clone(), obj.id)) {
            return Err(SceneError::DuplicateObject {
                room: room.id,
                object: obj.object_ref(),
            });
        }
        if !room
            .aabb
            .contains_point(obj.aabb.center(), ROOM_CONTAINMENT_EPSILON)
        {
            return Err(SceneError::ObjectOutsideRoom {
                room: room.id,
                object: obj.object_ref(),
            });
        }
    }
    check_canonical_ids(room)?;
    check_nesting(room)?;
    Ok(())
}

/// Verifies that within each name group, ids follow nearest-origin order —
/// i.e. that [`assign_instance_ids`] is a fixpoint on this room.
fn check_canonical_ids(room: &Room) -> Result<(), SceneError> {
    let mut groups: BTreeMap<&str, Vec<(usize, &ObjectInstance)>> = BTreeMap::new();
    for (i, obj) in room.objects.iter().enumerate() {
        groups.entry(obj.name.as_str()).or_default().push((i, obj));
    }
    for (name, mut members) in groups {
        members.sort_by(|a, b| {
            origin_order_key(a.1)
                .partial_cmp(&origin_order_key(b.1))
                .unwrap()
                .then(a.0.cmp(&b.0))
        });
        for (rank, (_, obj)) in members.iter().enumerate() {
            if obj.id != rank as u32 {
                return Err(SceneError::NonCanonicalIds {
                    room: room.id,
                    name: name.to_string(),
                });
            }
        }
    }
    Ok(())
}

fn check_nesting(room: &Room) -> Result<(), SceneError> {
    let refs: BTreeSet<ObjectRef> = room
        .objects
        .iter()
        .map(ObjectInstance::object_ref)
        .collect();
    let parents: BTreeMap<ObjectRef, ObjectRef> = room
        .objects
        .iter()
        .filter_map(|o| o.nested_in.clone().map(|p| (o.object_ref(), p)))
        .collect();
    for obj in &room.objects {
        let Some(target) = &obj.nested_in else {
            continue;
        };
        if !refs.contains(target) || *target == obj.object_ref() {
            return Err(SceneError::UnknownNestTarget {
                room: room.id,
                object: obj.object_ref(),
                target: target.clone(),
            });
        }
        // Walk the parent chain; a chain longer than the room is a cycle.
        let mut cursor = target;
        let mut hops = 0;
        while let Some(next) = parents.get(cursor) {
            hops += 1;
            if hops > room.objects.len() {
                return Err(SceneError::NestingCycle {
                    room: room.id,
                    object: obj.object_ref(),
                });
            }
            cursor = next;
        }
    }
    Ok(())
}

/// Sort key for instance-id assignment: squared distance of the AABB center
/// to the origin, then the center lexicographically for exact ties.
fn origin_order_key(obj: &ObjectInstance) -> (f64, f64, f64, f64) {
    let c = obj.aabb.center();
    (c.dist2(Vec3::new(0.0, 0.0, 0.0)), c.x, c.y, c.z)
}

/// Rewrites the `id` field of every object so that, per name, ids count
/// outward from the world origin. Idempotent; ids form `0..k` per name group.
pub fn assign_instance_ids(objects: &mut [ObjectInstance]) {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, obj) in objects.iter().enumerate() {
        groups.entry(obj.name.clone()).or_default().push(i);
    }
    for members in groups.values() {
        let mut order: Vec<usize> = members.clone();
        order.sort_by(|&a, &b| {
            origin_order_key(&objects[a])
                .partial_cmp(&origin_order_key(&objects[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        for (rank, &idx) in order.iter().enumerate() {
            objects[idx].id = rank as u32;
        }
    }
}

// ---------------------------------------------------------------------------
// Labeled surfaces and reconstruction
// ---------------------------------------------------------------------------

/// Raw labeled point data for one object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceObject {
    pub name: String,
    #[serde(default)]
    pub movable: bool,
    pub vertices: Vec<Vec3>,
}

/// Raw labeled surfaces for one room: optional floor/ceiling clouds plus
/// object vertex sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceRoom {
    pub id: RoomId,
    #[serde(default)]
    pub floor: Option<Vec<Vec3>>,
    #[serde(default)]
    pub ceiling: Option<Vec<Vec3>>,
    #[serde(default)]
    pub objects: Vec<SurfaceObject>,
}

/// A whole labeled scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSurfaces {
    pub rooms: Vec<SurfaceRoom>,
}

impl LabeledSurfaces {
    pub fn parse(doc: &str) -> Result<Self, SceneError> {
        serde_json::from_str(doc).map_err(|e| SceneError::Document(e.to_string()))
    }
}

/// Result of applying the room-box rules to one room.
#[derive(Debug, Clone, PartialEq)]
pub enum RoomAabbOutcome {
    Built(Aabb),
    /// Both floor and ceiling were absent.
    Discarded,
}

/// Rejects empty or non-finite point sets.
fn check_points(pts: &[Vec3], room: RoomId, surface: &str) -> Result<(), SceneError> {
    if pts.is_empty() {
        return Err(SceneError::EmptyPointSet {
            room,
            surface: surface.to_string(),
        });
    }
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(SceneError::NonFinitePoint {
            room,
            surface: surface.to_string(),
        });
    }
    Ok(())
}

fn checked_points<'a>(
    points: &'a Option<Vec<Vec3>>,
    room: RoomId,
    surface: &str,
) -> Result<Option<&'a [Vec3]>, SceneError> {
    let Some(pts) = points else { return Ok(None) };
    check_points(pts, room, surface)?;
    Ok(Some(pts.as_slice()))
}

fn min_y(points: &[Vec3]) -> f64 {
    points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min)
}

fn max_y(points: &[Vec3]) -> f64 {
    points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max)
}

/// Horizontal x/z span over one or two point sets.
fn horizontal_span(sets: &[&[Vec3]]) -> (f64, f64, f64, f64) {
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_z, mut max_z) = (f64::INFINITY, f64::NEG_INFINITY);
    for set in sets {
        for p in *set {
            min_x = min_x.min(p.x);
            max_x = max_x.max(p.x);
            min_z = min_z.min(p.z);
            max_z = max_z.max(p.z);
        }
    }
    (min_x, max_x, min_z, max_z)
}

/// Collects the minimum height of every floor surface in the scan, sorted
/// ascending and deduplicated with the merge tolerance.
pub fn compute_global_floor_elevations(surfaces: &LabeledSurfaces) -> Result<Vec<f64>, SceneError> {
    let mut elevations = Vec::new();
    for room in &surfaces.rooms {
        if let Some(floor) = checked_points(&room.floor, room.id, "floor")? {
            elevations.push(min_y(floor));
        }
    }
    elevations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<f64> = Vec::with_capacity(elevations.len());
    for e in elevations {
        match merged.last() {
            Some(&last) if (e - last).abs() < FLOOR_MERGE_TOLERANCE => {}
            _ => merged.push(e),
        }
    }
    Ok(merged)
}

/// Applies the room-box rules to one room given the scan-wide floor
/// elevations. See the module docs for the branch definitions.
pub fn build_room_aabb(
    room: &SurfaceRoom,
    global_floor_elevations: &[f64],
) -> Result<RoomAabbOutcome, SceneError> {
    let floor = checked_points(&room.floor, room.id, "floor")?;
    let ceiling = checked_points(&room.ceiling, room.id, "ceiling")?;

    let (lower, upper, spans): (f64, f64, Vec<&[Vec3]>) = match (floor, ceiling) {
        (None, None) => return Ok(RoomAabbOutcome::Discarded),
        (Some(f), Some(c)) => (min_y(f), max_y(c), vec![f, c]),
        (None, Some(c)) => {
            let ceiling_top = max_y(c);
            let lower = global_floor_elevations
                .iter()
                .copied()
                .filter(|&e| e < ceiling_top)
                .fold(f64::NEG_INFINITY, f64::max);
            if lower == f64::NEG_INFINITY {
                return Err(SceneError::NoElevationBelowCeiling { room: room.id });
            }
            (lower, ceiling_top, vec![c])
        }
        (Some(f), None) => {
            // Highest point of the available cloud: floor plus object vertices.
            let mut upper = max_y(f);
            for obj in &room.objects {
                check_points(&obj.vertices, room.id, &obj.name)?;
                upper = upper.max(max_y(&obj.vertices));
            }
            (min_y(f), upper, vec![f])
        }
    };

    let (min_x, max_x, min_z, max_z) = horizontal_span(&spans);
    Ok(RoomAabbOutcome::Built(Aabb::new(
        Vec3::new(min_x, lower, min_z),
        Vec3::new(max_x, upper, max_z),
    )))
}

/// Tight AABB over an object's labeled vertices.
pub fn build_object_aabb(obj: &SurfaceObject, room: RoomId) -> Result<Aabb, SceneError> {
    check_points(&obj.vertices, room, &obj.name)?;
    Ok(Aabb::from_points(&obj.vertices).expect("non-empty checked above"))
}

/// Output of [`build_scene`]: the validated scene plus the ids of rooms that
/// were discarded for having neither floor nor ceiling.
#[derive(Debug, Clone)]
pub struct SceneBuild {
    pub scene: Scene,
    pub discarded: Vec<RoomId>,
}

/// Reconstructs a full scene from labeled surfaces: room boxes via the rules
/// above, object boxes from vertices, instance ids by nearest-origin order.
pub fn build_scene(surfaces: &LabeledSurfaces) -> Result<SceneBuild, SceneError> {
    let mut ids = BTreeSet::new();
    for room in &surfaces.rooms {
        if !ids.insert(room.id) {
            return Err(SceneError::DuplicateRoom(room.id));
        }
    }
    let elevations = compute_global_floor_elevations(surfaces)?;

    let mut rooms = Vec::new();
    let mut discarded = Vec::new();
    for surface_room in &surfaces.rooms {
        let aabb = match build_room_aabb(surface_room, &elevations)? {
            RoomAabbOutcome::Built(aabb) => aabb,
            RoomAabbOutcome::Discarded => {
                discarded.push(surface_room.id);
                continue;
            }
        };
        let mut objects = Vec::with_capacity(surface_room.objects.len());
        for obj in &surface_room.objects {
            if !grammar::is_valid_object_name(&obj.name) {
                return Err(SceneError::IllegalObjectName {
                    room: surface_room.id,
                    name: obj.name.clone(),
                });
            }
            objects.push(ObjectInstance {
                name: obj.name.clone(),
                id: 0,
                aabb: build_object_aabb(obj, surface_room.id)?,
                movable: obj.movable,
                nested_in: None,
                home_room: surface_room.id,
            });
        }
        assign_instance_ids(&mut objects);
        rooms.push(Room {
            id: surface_room.id,
            aabb,
            objects,
        });
    }

    let mut scene = Scene {
        rooms,
        global_floor_elevations: elevations,
    };
    scene.validate()?;
    Ok(SceneBuild { scene, discarded })
}

/// Serde adapter storing `Option<ObjectRef>` as the string `name(id)`.
mod object_ref_string {
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::grammar::{parse_object_ref, ObjectRef};

    pub fn serialize<S: Serializer>(v: &Option<ObjectRef>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_some(&r.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ObjectRef>, D::Error> {
        let raw = Option::<String>::deserialize(d)?;
        raw.map(|s| parse_object_ref(&s).map_err(D::Error::custom))
            .transpose()
    }
}

impl fmt::Display for RoomAabbOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoomAabbOutcome::Built(aabb) => write!(
                f,
                "built [{:.3}, {:.3}, {:.3}]..[{:.3}, {:.3}, {:.3}]",
                aabb.min.x, aabb.min.y, aabb.min.z, aabb.max.x, aabb.max.y, aabb.max.z
            ),
            RoomAabbOutcome::Discarded => f.write_str("discarded"),
        }
    }
}
