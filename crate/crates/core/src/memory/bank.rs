//! Per-room episodic memory bank.
//!
//! The bank keeps at most one entry per room — a key matrix and a value
//! matrix — stamped with the commit timestep. A monotonic clock (the largest
//! committed timestep) guards writes: commits must carry a strictly newer
//! timestep, whether they add a room or replace one. Optionally a sinusoidal
//! embedding of the timestep is added to both matrices at commit, marking
//! *when* a room was seen directly in the stored features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::RoomId;
use crate::linalg::Mat;
use crate::memory::embed::time_embed;

/// Whether commits stamp entries with a time embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeEmbed {
    None,
    Sinusoidal { base: f64 },
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("commit timestep {t} is not newer than the bank clock {clock}")]
    NonMonotonicTimestep { t: u64, clock: u64 },
    #[error("key is {key_rows}×{key_cols} but value is {value_rows}×{value_cols}")]
    KeyValueShapeMismatch {
        key_rows: usize,
        key_cols: usize,
        value_rows: usize,
        value_cols: usize,
    },
    #[error("entry width {found} does not match the bank's width {expected}")]
    WidthMismatch { found: usize, expected: usize },
    #[error("entry for room {0} has no rows")]
    EmptyEntry(RoomId),
    #[error("entry for room {0} contains a non-finite value")]
    NonFinite(RoomId),
    #[error("duplicate entry for room {0}")]
    DuplicateRoom(RoomId),
    #[error("stored clock {clock} does not match the newest entry timestep {max_t}")]
    ClockMismatch { clock: u64, max_t: u64 },
}

/// One room's episodic record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub room: RoomId,
    pub t: u64,
    pub key: Mat,
    pub value: Mat,
}

/// Serialized form: entries sorted by room, clock alongside.
#[derive(Serialize, Deserialize)]
struct BankFile {
    clock: u64,
    entries: Vec<MemoryEntry>,
}

/// The episodic store.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BankFile", into = "BankFile")]
pub struct MemoryBank {
    clock: u64,
    entries: BTreeMap<RoomId, MemoryEntry>,
}

impl MemoryBank {
    #[must_use]
    pub fn new() -> Self {
        Self::default()
    }

    /// Largest committed timestep; 0 for an empty bank.
    #[must_use]
    pub fn clock(&self) -> u64 {
        self.clock
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending room order.
    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.values()
    }

    #[must_use]
    pub fn get(&self, room: RoomId) -> Option<&MemoryEntry> {
        self.entries.get(&room)
    }

    /// The most recently committed entry (largest timestep). Timesteps are
    /// unique by construction, so this is unambiguous.
    #[must_use]
    pub fn latest(&self) -> Option<&MemoryEntry> {
        self.entries.values().max_by_key(|e| e.t)
    }

    /// Feature width shared by all entries, if any entry exists.
    #[must_use]
    pub fn width(&self) -> Option<usize> {
        self.entries.values().next().map(|e| e.key.cols())
    }

    /// Total key rows across entries — the token count fusion will attend
    /// over.
    #[must_use]
    pub fn total_rows(&self) -> usize {
        self.entries.values().map(|e| e.key.rows()).sum()
    }

    /// Writes a room's entry. Replacing an existing room keeps the bank size,
    /// a new room grows it; either way `t` must beat the clock, which then
    /// advances to `t`. (The very first commit is exempt — an empty bank has
    /// nothing to be stale against, so `t = 0` is accepted there.) With
    /// [`TimeEmbed::Sinusoidal`] the embedding of `t` is added to every row
    /// of both matrices before storage.
    pub fn commit(
        &mut self,
        room: RoomId,
        t: u64,
        mut key: Mat,
        mut value: Mat,
        embed: TimeEmbed,
    ) -> Result<(), BankError> {
        if !self.entries.is_empty() && t <= self.clock {
            return Err(BankError::NonMonotonicTimestep {
                t,
                clock: self.clock,
            });
        }
        if key.rows() != value.rows() || key.cols() != value.cols() {
            return Err(BankError::KeyValueShapeMismatch {
                key_rows: key.rows(),
                key_cols: key.cols(),
                value_rows: value.rows(),
                value_cols: value.cols(),
            });
        }
        if key.rows() == 0 {
            return Err(BankError::EmptyEntry(room));
        }
        if let Some(width) = self.width() {
            if key.cols() != width {
                return Err(BankError::WidthMismatch {
                    found: key.cols(),
                    expected: width,
                });
            }
        }
        if !key.all_finite() || !value.all_finite() {
            return Err(BankError::NonFinite(room));
        }
        if let TimeEmbed::Sinusoidal { base } = embed {
            let te = time_embed(t, key.cols(), base);
            key.add_row_broadcast(&te);
            value.add_row_broadcast(&te);
        }
        self.entries.insert(
            room,
            MemoryEntry {
                room,
                t,
                key,
                value,
            },
        );
        self.clock = t;
        Ok(())
    }
}

impl TryFrom<BankFile> for MemoryBank {
    type Error = BankError;

    fn try_from(file: BankFile) -> Result<Self, Self::Error> {
        let mut entries = BTreeMap::new();
        let mut width: Option<usize> = None;
        let mut max_t = 0;
        for entry in file.entries {
            if entry.key.rows() != entry.value.rows() || entry.key.cols() != entry.value.cols() {
                return Err(BankError::KeyValueShapeMismatch {
                    key_rows: entry.key.rows(),
                    key_cols: entry.key.cols(),
                    value_rows: entry.value.rows(),
                    value_cols: entry.value.cols(),
                });
            }
            if entry.key.rows() == 0 {
                return Err(BankError::EmptyEntry(entry.room));
            }
            match width {
                Some(w) if entry.key.cols() != w => {
                    return Err(BankError::WidthMismatch {
                        found: entry.key.cols(),
                        expected: w,
                    })
                }
                None => width = Some(entry.key.cols()),
                _ => {}
            }
            if !entry.key.all_finite() || !entry.value.all_finite() {
                return Err(BankError::NonFinite(entry.room));
            }
            max_t = max_t.max(entry.t);
            let room = entry.room;
            if entries.insert(room, entry).is_some() {
                return Err(BankError::DuplicateRoom(room));
            }
        }
        if !entries.is_empty() && file.clock != max_t {
            return Err(BankError::ClockMismatch {
                clock: file.clock,
                max_t,
            });
        }
        Ok(Self {
            clock: file.clock,
            entries,
        })
    }
}

impl From<MemoryBank> for BankFile {
    fn from(bank: MemoryBank) -> Self {
        BankFile {
            clock: bank.clock,
            entries: bank.entries.into_values().collect(),
        }
    }
}
