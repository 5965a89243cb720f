//! Line-oriented action-token grammar.
//!
//! A trajectory step is one logical line. Lines whose trimmed form starts with
//! `<` must be one of four angle-bracketed command tokens; every other line is
//! free-form reasoning text and passes through untouched:
//!
//! ```text
//! <GO TO ROOM(id)>
//! <GO TO NEW ROOM>
//! <PICK UP name(id) from room(id) in room(id)>          pick  name(id), origin room, current room
//! <PUT DOWN name(id) from room(id) on name(id) in room(id)>
//! ```
//!
//! Uppercase keywords are case-sensitive. Object names may contain spaces
//! (letters, digits, spaces, and hyphens); the grammar binds the longest name
//! prefix before the final `(id)` of each object slot, so `flower vase(0)`
//! parses as one reference. Ids are unsigned decimal integers without leading
//! zeros. Canonical output uses single spaces; parsing tolerates arbitrary
//! internal whitespace, so `serialize(parse(s))` differs from a valid `s` only
//! in whitespace. The put-down support slot also accepts the literal `floor`,
//! which is always a legal support.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Room identifier as it appears in tokens and scene files.
pub type RoomId = u32;

/// An object reference `name(id)`. Instance ids are scoped per name per room,
/// so a full object identity also needs the room the object originated in;
/// tokens carry that origin separately.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectRef {
    pub name: String,
    pub id: u32,
}

impl ObjectRef {
    #[must_use]
    pub fn new(name: impl Into<String>, id: u32) -> Self {
        Self {
            name: name.into(),
            id,
        }
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.id)
    }
}

/// Support slot of a put-down: a referenced object or the literal floor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PutTarget {
    Object(ObjectRef),
    Floor,
}

impl fmt::Display for PutTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PutTarget::Object(o) => o.fmt(f),
            PutTarget::Floor => f.write_str("floor"),
        }
    }
}

/// One parsed trajectory step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// `<GO TO ROOM(id)>` — move to an already-visited room.
    GoToRoom { room: RoomId },
    /// `<GO TO NEW ROOM>` — move to an unvisited room.
    GoToNewRoom,
    /// `<PICK UP object from room(origin) in room(current)>`
    PickUp {
        object: ObjectRef,
        origin_room: RoomId,
        current_room: RoomId,
    },
    /// `<PUT DOWN object from room(origin) on target in room(room)>`
    PutDown {
        object: ObjectRef,
        origin_room: RoomId,
        target: PutTarget,
        room: RoomId,
    },
    /// Any line that is not a command token; preserved verbatim.
    Thought { text: String },
}

/// Parse failure for a single step line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    /// The line looked like a token (leading `<`) but matched no production,
    /// had unbalanced brackets, or used an illegal object name.
    #[error("malformed token: {0:?}")]
    MalformedToken(String),
    /// A token matched a production but an id slot held something other than a
    /// canonical unsigned decimal integer.
    #[error("non-integer id {found:?} in token {token:?}")]
    NonIntegerId { token: String, found: String },
}

/// Parse failure for a whole trajectory document.
#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory document: {0}")]
    Document(String),
    #[error("trajectory has no steps")]
    Empty,
    #[error("step {index}: {source}")]
    Step { index: usize, source: ParseError },
}

/// A parsed trajectory: the task description plus ordered steps. The optional
/// `new_room_order` is a replay aid consumed by successive `GO TO NEW ROOM`
/// steps (see the simulator); it is not part of the token language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub task: String,
    pub steps: Vec<Action>,
    pub new_room_order: Option<Vec<RoomId>>,
}

/// On-disk form of a trajectory: `{task, steps: [line, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub task: String,
    pub steps: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_room_order: Option<Vec<RoomId>>,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

fn go_new_re() -> &'static Regex {
    static C: OnceLock<Regex> = OnceLock::new();
    re(&C, r"^GO\s+TO\s+NEW\s+ROOM$")
}

fn go_room_re() -> &'static Regex {
    static C: OnceLock<Regex> = OnceLock::new();
    re(&C, r"^GO\s+TO\s+ROOM\s*\(([^()]*)\)$")
}

fn pick_up_re() -> &'static Regex {
    static C: OnceLock<Regex> = OnceLock::new();
    re(
        &C,
        r"^PICK\s+UP\s+(.+)\(([^()]*)\)\s+from\s+room\s*\(([^()]*)\)\s+in\s+room\s*\(([^()]*)\)$",
    )
}

fn put_down_re() -> &'static Regex {
    static C: OnceLock<Regex> = OnceLock::new();
    re(
        &C,
        r"^PUT\s+DOWN\s+(.+)\(([^()]*)\)\s+from\s+room\s*\(([^()]*)\)\s+on\s+(.+)\(([^()]*)\)\s+in\s+room\s*\(([^()]*)\)$",
    )
}

fn put_down_floor_re() -> &'static Regex {
    static C: OnceLock<Regex> = OnceLock::new();
    re(
        &C,
        r"^PUT\s+DOWN\s+(.+)\(([^()]*)\)\s+from\s+room\s*\(([^()]*)\)\s+on\s+floor\s+in\s+room\s*\(([^()]*)\)$",
    )
}

/// Collapses internal whitespace runs to single spaces and trims the ends.
fn normalize_name(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True when `name` is a legal object name: non-empty, drawn from letters,
/// digits, spaces, and hyphens. Scene validation shares this rule so that
/// every name a scene can contain is expressible in the token language.
#[must_use]
pub fn is_valid_object_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == ' ' || c == '-')
}

/// Parses one id slot. Canonical ids are unsigned decimals without leading
/// zeros; anything else is [`ParseError::NonIntegerId`].
fn parse_id(raw: &str, token: &str) -> Result<u32, ParseError> {
    let trimmed = raw.trim();
    let non_integer = || ParseError::NonIntegerId {
        token: token.to_string(),
        found: trimmed.to_string(),
    };
    if trimmed.is_empty() || !trimmed.bytes().all(|b| b.is_ascii_digit()) {
        return Err(non_integer());
    }
    if trimmed.len() > 1 && trimmed.starts_with('0') {
        return Err(non_integer());
    }
    trimmed.parse::<u32>().map_err(|_| non_integer())
}

fn parse_name(raw: &str, token: &str) -> Result<String, ParseError> {
    let name = normalize_name(raw);
    if is_valid_object_name(&name) {
        Ok(name)
    } else {
        Err(ParseError::MalformedToken(token.to_string()))
    }
}

fn object_ref_from(raw_name: &str, raw_id: &str, token: &str) -> Result<ObjectRef, ParseError> {
    Ok(ObjectRef {
        name: parse_name(raw_name, token)?,
        id: parse_id(raw_id, token)?,
    })
}

/// Parses a bare `name(id)` reference (used by scene containment links).
pub fn parse_object_ref(text: &str) -> Result<ObjectRef, ParseError> {
    static C: OnceLock<Regex> = OnceLock::new();
    let rx = re(&C, r"^(.+)\(([^()]*)\)$");
    let trimmed = text.trim();
    let caps = rx
        .captures(trimmed)
        .ok_or_else(|| ParseError::MalformedToken(trimmed.to_string()))?;
    object_ref_from(&caps[1], &caps[2], trimmed)
}

/// Parses one logical line into an [`Action`].
///
/// Lines that do not begin with `<` (after trimming) become
/// [`Action::Thought`] with their text preserved verbatim, including any
/// surrounding whitespace.
pub fn parse_step(line: &str) -> Result<Action, ParseError> {
    let trimmed = line.trim();
    if !trimmed.starts_with('<') {
        return Ok(Action::Thought {
            text: line.to_string(),
        });
    }
    let malformed = || ParseError::MalformedToken(trimmed.to_string());
    if !trimmed.ends_with('>') || trimmed.len() < 2 {
        return Err(malformed());
    }
    let inner = trimmed[1..trimmed.len() - 1].trim();
    if inner.contains('<') || inner.contains('>') {
        return Err(malformed());
    }

    if go_new_re().is_match(inner) {
        return Ok(Action::GoToNewRoom);
    }
    if let Some(caps) = go_room_re().captures(inner) {
        return Ok(Action::GoToRoom {
            room: parse_id(&caps[1], trimmed)?,
        });
    }
    if let Some(caps) = pick_up_re().captures(inner) {
        return Ok(Action::PickUp {
            object: object_ref_from(&caps[1], &caps[2], trimmed)?,
            origin_room: parse_id(&caps[3], trimmed)?,
            current_room: parse_id(&caps[4], trimmed)?,
        });
    }
    if let Some(caps) = put_down_re().captures(inner) {
        return Ok(Action::PutDown {
            object: object_ref_from(&caps[1], &caps[2], trimmed)?,
            origin_room: parse_id(&caps[3], trimmed)?,
            target: PutTarget::Object(object_ref_from(&caps[4], &caps[5], trimmed)?),
            room: parse_id(&caps[6], trimmed)?,
        });
    }
    if let Some(caps) = put_down_floor_re().captures(inner) {
        return Ok(Action::PutDown {
            object: object_ref_from(&caps[1], &caps[2], trimmed)?,
            origin_room: parse_id(&caps[3], trimmed)?,
            target: PutTarget::Floor,
            room: parse_id(&caps[4], trimmed)?,
        });
    }
    Err(malformed())
}

/// Renders an [`Action`] in canonical form: single spaces, `name(id)` slots
/// with no inner padding. Thought text is returned unchanged.
#[must_use]
pub fn serialize_step(action: &Action) -> String {
    match action {
        Action::GoToRoom { room } => format!("<GO TO ROOM({room})>"),
        Action::GoToNewRoom => "<GO TO NEW ROOM>".to_string(),
        Action::PickUp {
            object,
            origin_room,
            current_room,
        } => {
            format!("<PICK UP {object} from room({origin_room}) in room({current_room})>")
        }
        Action::PutDown {
            object,
            origin_room,
            target,
            room,
        } => {
            format!("<PUT DOWN {object} from room({origin_room}) on {target} in room({room})>")
        }
        Action::Thought { text } => text.clone(),
    }
}

/// Parses a trajectory document (`{task, steps: [...]}`); the first bad step
/// is reported with its zero-based index.
pub fn parse_trajectory(doc: &str) -> Result<Trajectory, TrajectoryError> {
    let file: TrajectoryFile =
        serde_json::from_str(doc).map_err(|e| TrajectoryError::Document(e.to_string()))?;
    trajectory_from_file(&file)
}

/// Converts an already-deserialized [`TrajectoryFile`] into parsed steps.
pub fn trajectory_from_file(file: &TrajectoryFile) -> Result<Trajectory, TrajectoryError> {
    if file.steps.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let mut steps = Vec::with_capacity(file.steps.len());
    for (index, line) in file.steps.iter().enumerate() {
        steps.push(parse_step(line).map_err(|source| TrajectoryError::Step { index, source })?);
    }
    Ok(Trajectory {
        task: file.task.clone(),
        steps,
        new_room_order: file.new_room_order.clone(),
    })
}

impl Trajectory {
    /// Canonical on-disk form: every step rendered via [`serialize_step`].
    #[must_use]
    pub fn to_file(&self) -> TrajectoryFile {
        TrajectoryFile {
            task: self.task.clone(),
            steps: self.steps.iter().map(serialize_step).collect(),
            new_room_order: self.new_room_order.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(line: &str) -> Action {
        parse_step(line).unwrap()
    }

    #[test]
    fn parses_go_to_room() {
        assert_eq!(rt("<GO TO ROOM(3)>"), Action::GoToRoom { room: 3 });
    }

    #[test]
    fn parses_go_to_new_room() {
        assert_eq!(rt("<GO TO NEW ROOM>"), Action::GoToNewRoom);
    }

    #[test]
    fn parses_multiword_object_name() {
        let a = rt("<PICK UP flower vase(0) from room(8) in room(8)>");
        assert_eq!(
            a,
            Action::PickUp {
                object: ObjectRef::new("flower vase", 0),
                origin_room: 8,
                current_room: 8,
            }
        );
    }

    #[test]
    fn parses_put_down_with_object_target() {
        let a = rt("<PUT DOWN cooking pan(0) from room(8) on stove(0) in room(8)>");
        assert_eq!(
            a,
            Action::PutDown {
                object: ObjectRef::new("cooking pan", 0),
                origin_room: 8,
                target: PutTarget::Object(ObjectRef::new("stove", 0)),
                room: 8,
            }
        );
    }

    #[test]
    fn parses_put_down_on_floor() {
        let a = rt("<PUT DOWN box(1) from room(2) on floor in room(4)>");
        assert_eq!(
            a,
            Action::PutDown {
                object: ObjectRef::new("box", 1),
                origin_room: 2,
                target: PutTarget::Floor,
                room: 4,
            }
        );
    }

    #[test]
    fn non_token_line_is_a_verbatim_thought() {
        let text = "  I see a printer(0) on the desk(0). ";
        assert_eq!(
            rt(text),
            Action::Thought {
                text: text.to_string()
            }
        );
    }

    #[test]
    fn missing_clauses_are_malformed() {
        assert!(matches!(
            parse_step("<PICK UP vase>"),
            Err(ParseError::MalformedToken(_))
        ));
        assert!(matches!(
            parse_step("<PICK UP vase(0) from room(1)>"),
            Err(ParseError::MalformedToken(_))
        ));
    }

    #[test]
    fn unbalanced_brackets_are_malformed() {
        assert!(matches!(
            parse_step("<GO TO ROOM(5)"),
            Err(ParseError::MalformedToken(_))
        ));
        assert!(matches!(
            parse_step("<GO TO <ROOM(5)>>"),
            Err(ParseError::MalformedToken(_))
        ));
    }

    #[test]
    fn lowercase_keywords_do_not_match() {
        assert!(matches!(
            parse_step("<go to room(5)>"),
            Err(ParseError::MalformedToken(_))
        ));
    }

    #[test]
    fn non_integer_ids_are_rejected() {
        assert!(matches!(
            parse_step("<GO TO ROOM(x7)>"),
            Err(ParseError::NonIntegerId { ref found, .. }) if found == "x7"
        ));
        assert!(matches!(
            parse_step("<GO TO ROOM(1.5)>"),
            Err(ParseError::NonIntegerId { .. })
        ));
        assert!(matches!(
            parse_step("<GO TO ROOM()>"),
            Err(ParseError::NonIntegerId { .. })
        ));
    }

    #[test]
    fn leading_zero_ids_are_rejected() {
        assert!(matches!(
            parse_step("<GO TO ROOM(07)>"),
            Err(ParseError::NonIntegerId { .. })
        ));
        // A bare zero is canonical and fine.
        assert_eq!(rt("<GO TO ROOM(0)>"), Action::GoToRoom { room: 0 });
    }

    #[test]
    fn whitespace_is_tolerated_and_canonicalized() {
        let messy = "<PICK  UP   flower   vase( 0 )   from  room( 8 )  in  room(8)>";
        let a = rt(messy);
        let canon = serialize_step(&a);
        assert_eq!(canon, "<PICK UP flower vase(0) from room(8) in room(8)>");
        // Canonicalization is a fixpoint.
        assert_eq!(serialize_step(&rt(&canon)), canon);
    }

    #[test]
    fn illegal_name_characters_are_malformed() {
        assert!(matches!(
            parse_step("<PICK UP va_se(0) from room(1) in room(1)>"),
            Err(ParseError::MalformedToken(_))
        ));
    }

    #[test]
    fn object_ref_atom_parses_and_rejects() {
        assert_eq!(
            parse_object_ref("desk(0)").unwrap(),
            ObjectRef::new("desk", 0)
        );
        assert_eq!(
            parse_object_ref("flower vase(2)").unwrap(),
            ObjectRef::new("flower vase", 2)
        );
        assert!(parse_object_ref("desk").is_err());
        assert!(parse_object_ref("desk(00)").is_err());
    }

    #[test]
    fn trajectory_reports_first_bad_step_index() {
        let doc = r#"{"task":"t","steps":["ok","<GO TO ROOM(2)>","<BAD>"]}"#;
        match parse_trajectory(doc) {
            Err(TrajectoryError::Step { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected step error, got {other:?}"),
        }
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        assert!(matches!(
            parse_trajectory(r#"{"task":"t","steps":[]}"#),
            Err(TrajectoryError::Empty)
        ));
    }

    #[test]
    fn round_trip_preserves_every_action_shape() {
        let actions = vec![
            Action::GoToRoom { room: 12 },
            Action::GoToNewRoom,
            Action::PickUp {
                object: ObjectRef::new("two-tier rack", 3),
                origin_room: 0,
                current_room: 7,
            },
            Action::PutDown {
                object: ObjectRef::new("box", 0),
                origin_room: 10,
                target: PutTarget::Floor,
                room: 10,
            },
            Action::Thought {
                text: "sizes: vase < box < printer".to_string(),
            },
        ];
        for a in actions {
            assert_eq!(rt(&serialize_step(&a)), a);
        }
    }
}
