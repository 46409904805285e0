//! Base objects, rmw primitives and the cached-access model of hardware
//! transactions.
//!
//! Every process owns a [`TrackingSet`] that stands in for its L1 cache while
//! a hardware transaction is live. Cached primitives consult and extend it;
//! direct primitives and cache-commit write-backs invalidate the tracking sets
//! of other processes that hold a conflicting entry.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{ObjId, ObjectKind, ProcessId, Word};

/// Default tracking-set capacity.
pub const DEFAULT_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemoryError {
    #[error("unknown base object {0}")]
    UnknownObject(ObjId),
    #[error("tracking-set capacity must be at least 2, got {0}")]
    InvalidCapacity(usize),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Triviality {
    Trivial,
    Nontrivial,
}

/// An atomic read-modify-write primitive `<g, h>`.
///
/// Every built-in primitive responds with the value the object held before
/// the update, so callers decide success of a `Cas` by comparing that value
/// with `expected`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Primitive {
    Read,
    Write { value: Word },
    Cas { expected: Word, new: Word },
    FetchAdd { delta: i64 },
}

impl Primitive {
    /// `g`: the new value of the object.
    pub fn transform(&self, current: Word) -> Word {
        match *self {
            Primitive::Read => current,
            Primitive::Write { value } => value,
            Primitive::Cas { expected, new } => {
                if current == expected {
                    new
                } else {
                    current
                }
            }
            Primitive::FetchAdd { delta } => Word {
                val: current.val.wrapping_add(delta),
                ver: current.ver,
            },
        }
    }

    /// `h`: the value returned to the caller.
    pub fn response(&self, current: Word) -> Word {
        current
    }

    /// A primitive is trivial iff `g` is the identity in every configuration.
    pub fn triviality(&self) -> Triviality {
        match *self {
            Primitive::Read => Triviality::Trivial,
            Primitive::Cas { expected, new } if expected == new => Triviality::Trivial,
            Primitive::FetchAdd { delta: 0 } => Triviality::Trivial,
            _ => Triviality::Nontrivial,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.triviality() == Triviality::Trivial
    }

    /// Whether a primitive that observed `prior` took effect (always true
    /// except for a failed cas).
    pub fn succeeded(&self, prior: Word) -> bool {
        match *self {
            Primitive::Cas { expected, .. } => prior == expected,
            _ => true,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Read => write!(f, "read"),
            Primitive::Write { value } => write!(f, "write({value})"),
            Primitive::Cas { expected, new } => write!(f, "cas({expected},{new})"),
            Primitive::FetchAdd { delta } => write!(f, "fetch-and-add({delta})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseObject {
    pub id: ObjId,
    pub name: String,
    pub kind: ObjectKind,
    pub initial: Word,
    pub value: Word,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Shared,
    Exclusive,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub value: Word,
    pub mode: Mode,
}

/// Per-process cache model backing one hardware transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackingSet {
    owner: ProcessId,
    entries: BTreeMap<ObjId, Entry>,
    valid: bool,
}

impl TrackingSet {
    fn new(owner: ProcessId) -> Self {
        TrackingSet {
            owner,
            entries: BTreeMap::new(),
            valid: true,
        }
    }

    pub fn owner(&self) -> ProcessId {
        self.owner
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn get(&self, obj: ObjId) -> Option<&Entry> {
        self.entries.get(&obj)
    }

    pub fn entries(&self) -> impl Iterator<Item = (ObjId, &Entry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    fn reset(&mut self) {
        self.entries.clear();
        self.valid = true;
    }

    // An invalid tracking set is doomed: its entries no longer guard anything,
    // so they are dropped along with the validity flag.
    fn invalidate(&mut self) {
        self.entries.clear();
        self.valid = false;
    }
}

/// Result of a cached primitive.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CachedOutcome {
    Value { value: Word },
    CapacityAbort,
    TrackingSetAbort,
}

/// Result of a cache-commit.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CommitOutcome {
    /// `written` counts the exclusive entries flushed to memory.
    Commit { written: u32 },
    TrackingSetAbort,
}

/// Shared memory: the base objects plus one tracking set per process.
#[derive(Clone, Debug)]
pub struct Memory {
    objects: Vec<BaseObject>,
    tracking: BTreeMap<ProcessId, TrackingSet>,
    capacity: usize,
}

impl Memory {
    /// Objects get ids in declaration order.
    pub fn new(
        capacity: usize,
        objects: impl IntoIterator<Item = (String, ObjectKind, Word)>,
    ) -> Result<Self, MemoryError> {
        if capacity < 2 {
            return Err(MemoryError::InvalidCapacity(capacity));
        }
        let objects = objects
            .into_iter()
            .enumerate()
            .map(|(i, (name, kind, initial))| BaseObject {
                id: ObjId(i as u32),
                name,
                kind,
                initial,
                value: initial,
            })
            .collect();
        Ok(Memory {
            objects,
            tracking: BTreeMap::new(),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn objects(&self) -> &[BaseObject] {
        &self.objects
    }

    pub fn object(&self, obj: ObjId) -> Result<&BaseObject, MemoryError> {
        self.objects
            .get(obj.0 as usize)
            .ok_or(MemoryError::UnknownObject(obj))
    }

    /// Current committed value of `obj`.
    pub fn value(&self, obj: ObjId) -> Result<Word, MemoryError> {
        self.object(obj).map(|o| o.value)
    }

    pub fn tracking_set(&self, process: ProcessId) -> Option<&TrackingSet> {
        self.tracking.get(&process)
    }

    fn tracking_mut(&mut self, process: ProcessId) -> &mut TrackingSet {
        self.tracking
            .entry(process)
            .or_insert_with(|| TrackingSet::new(process))
    }

    /// Starts a hardware transaction on `process` with an empty, valid
    /// tracking set.
    pub fn begin_hardware(&mut self, process: ProcessId) {
        self.tracking_mut(process).reset();
    }

    /// Discards the tracking set of `process` after its hardware transaction
    /// ended without a cache-commit.
    pub fn discard(&mut self, process: ProcessId) {
        if let Some(ts) = self.tracking.get_mut(&process) {
            ts.reset();
        }
    }

    /// Test hook: marks the tracking set of `process` invalid so its next
    /// cached primitive or cache-commit returns a tracking-set abort.
    pub fn inject_abort(&mut self, process: ProcessId) {
        self.tracking_mut(process).invalidate();
    }

    /// Applies `prim` to `obj` directly in shared memory.
    pub fn apply_direct(
        &mut self,
        process: ProcessId,
        obj: ObjId,
        prim: Primitive,
    ) -> Result<Word, MemoryError> {
        let slot = self
            .objects
            .get_mut(obj.0 as usize)
            .ok_or(MemoryError::UnknownObject(obj))?;
        let current = slot.value;
        slot.value = prim.transform(current);
        self.invalidate_on_access(process, obj, prim.triviality());
        Ok(prim.response(current))
    }

    /// Applies `prim` to `obj` inside the hardware transaction of `process`.
    pub fn apply_cached(
        &mut self,
        process: ProcessId,
        obj: ObjId,
        prim: Primitive,
    ) -> Result<CachedOutcome, MemoryError> {
        let memory_value = self.value(obj)?;
        let capacity = self.capacity;
        let nontrivial = !prim.is_trivial();

        let conflict = self.tracking.iter().any(|(&j, ts)| {
            j != process
                && ts.get(obj).is_some_and(|e| nontrivial || e.mode == Mode::Exclusive)
        });

        let ts = self.tracking_mut(process);
        if !ts.valid {
            ts.reset();
            return Ok(CachedOutcome::TrackingSetAbort);
        }
        let present = ts.entries.get(&obj).copied();
        if present.is_none() && ts.entries.len() >= capacity {
            ts.reset();
            return Ok(CachedOutcome::CapacityAbort);
        }
        if conflict {
            ts.reset();
            return Ok(CachedOutcome::TrackingSetAbort);
        }

        let current = present.map_or(memory_value, |e| e.value);
        let entry = if nontrivial {
            Entry {
                value: prim.transform(current),
                mode: Mode::Exclusive,
            }
        } else {
            Entry {
                value: current,
                mode: present.map_or(Mode::Shared, |e| e.mode),
            }
        };
        ts.entries.insert(obj, entry);
        Ok(CachedOutcome::Value {
            value: prim.response(current),
        })
    }

    /// Invalidates every other tracking set holding `obj` exclusively, or
    /// holding it at all when the access was nontrivial. Returns the
    /// processes whose tracking sets were invalidated.
    pub fn invalidate_on_access(
        &mut self,
        actor: ProcessId,
        obj: ObjId,
        triviality: Triviality,
    ) -> Vec<ProcessId> {
        let mut hit = Vec::new();
        for (&j, ts) in self.tracking.iter_mut() {
            if j == actor {
                continue;
            }
            let doomed = ts.get(obj).is_some_and(|e| {
                e.mode == Mode::Exclusive || triviality == Triviality::Nontrivial
            });
            if doomed {
                ts.invalidate();
                hit.push(j);
            }
        }
        hit
    }

    /// Writes back every exclusive entry of `process` and empties its
    /// tracking set. Atomic at step granularity.
    pub fn cache_commit(&mut self, process: ProcessId) -> CommitOutcome {
        let ts = self.tracking_mut(process);
        if !ts.valid {
            ts.reset();
            return CommitOutcome::TrackingSetAbort;
        }
        let writes: Vec<(ObjId, Word)> = ts
            .entries
            .iter()
            .filter(|(_, e)| e.mode == Mode::Exclusive)
            .map(|(&o, e)| (o, e.value))
            .collect();
        ts.reset();
        for &(obj, value) in &writes {
            // Exclusive entries only exist for declared objects.
            self.objects[obj.0 as usize].value = value;
            self.invalidate_on_access(process, obj, Triviality::Nontrivial);
        }
        CommitOutcome::Commit {
            written: writes.len() as u32,
        }
    }
}
