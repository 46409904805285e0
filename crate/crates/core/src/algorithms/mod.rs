//! The HyTM implementations.
//!
//! Each t-operation is written as straight-line code against a [`Port`]. The
//! runtime resumes an operation by replaying the responses of the primitives
//! it already executed, so every call into the port past the replayed prefix
//! is one fresh scheduler step. A port answers the second fresh primitive of
//! a step with [`Yield::Suspend`], which unwinds the operation until the next
//! step.

mod constant;
mod naive;
mod progressive;
mod slow;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::history::{AbortClass, OpResult, TOp};
use crate::memory::{CachedOutcome, CommitOutcome, MemoryError, Primitive};
use crate::types::{ObjId, ObjectKind, Path, ProcessId, TObj, TxId, Word};

/// Which HyTM runs the transactions.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Progressive, opaque, uninstrumented writes, invisible reads. Fast-path
    /// reads check the per-object lock bit.
    Progressive,
    /// Opaque with invisible reads; fast-path reads only check a global
    /// counter of in-flight updating slow-path commits.
    Constant,
    /// Uninstrumented strawman with no locks and no validation. Not strictly
    /// serializable.
    Naive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Progressive, Algorithm::Constant, Algorithm::Naive];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Progressive => "progressive",
            Algorithm::Constant => "constant",
            Algorithm::Naive => "naive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown algorithm `{0}` (expected progressive, constant or naive)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| UnknownAlgorithm(s.into()))
    }
}

/// Mapping from t-objects to base objects.
///
/// Ids are dense: data objects `v_j` first, then lock bits `r_j`, then the
/// global counter.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub algorithm: Algorithm,
    pub n_tobjects: u32,
}

impl Layout {
    pub fn new(algorithm: Algorithm, n_tobjects: u32) -> Self {
        Layout {
            algorithm,
            n_tobjects,
        }
    }

    pub fn data(&self, x: TObj) -> ObjId {
        ObjId(x.0)
    }

    pub fn lock(&self, x: TObj) -> ObjId {
        debug_assert!(self.algorithm != Algorithm::Naive);
        ObjId(self.n_tobjects + x.0)
    }

    pub fn counter(&self) -> ObjId {
        debug_assert!(self.algorithm == Algorithm::Constant);
        ObjId(2 * self.n_tobjects)
    }

    pub fn contains(&self, x: TObj) -> bool {
        x.0 < self.n_tobjects
    }

    /// Object declarations in id order: name, classification, initial value.
    pub fn catalog(&self) -> Vec<(String, ObjectKind, Word)> {
        let n = self.n_tobjects;
        let mut out: Vec<_> = (0..n)
            .map(|j| (format!("v{j}"), ObjectKind::Data { tobj: TObj(j) }, Word::ZERO))
            .collect();
        if self.algorithm != Algorithm::Naive {
            out.extend((0..n).map(|j| (format!("r{j}"), ObjectKind::Metadata, Word::ZERO)));
        }
        if self.algorithm == Algorithm::Constant {
            out.push((String::from("fa"), ObjectKind::Metadata, Word::ZERO));
        }
        out
    }
}

/// A buffered slow-path write: the pair observed at write time and the new value.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct WriteEntry {
    pub old: Word,
    pub new: i64,
}

/// Transaction-local state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxCtx {
    pub id: TxId,
    pub process: ProcessId,
    pub path: Path,
    /// t-object -> `[value, writer]` pair returned by the first read.
    pub rset: BTreeMap<TObj, Word>,
    pub wset: BTreeMap<TObj, WriteEntry>,
    /// Write-set in first-invocation order.
    pub write_order: Vec<TObj>,
    /// Locks held.
    pub lset: BTreeSet<TObj>,
    /// Data objects already overwritten during commit.
    pub oset: BTreeSet<TObj>,
}

impl TxCtx {
    pub fn new(id: TxId, process: ProcessId, path: Path) -> Self {
        TxCtx {
            id,
            process,
            path,
            rset: BTreeMap::new(),
            wset: BTreeMap::new(),
            write_order: Vec::new(),
            lset: BTreeSet::new(),
            oset: BTreeSet::new(),
        }
    }

    /// The `[value, writer]` pair this transaction installs for `value`.
    pub fn tag(&self, value: i64) -> Word {
        Word::new(value, self.id.0)
    }

    fn buffer_write(&mut self, x: TObj, entry: WriteEntry) {
        if self.wset.insert(x, entry).is_none() {
            self.write_order.push(x);
        }
    }

    pub fn data_set_len(&self) -> usize {
        self.rset
            .keys()
            .chain(self.wset.keys())
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Why an operation stopped before producing a response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Yield {
    /// The step's one fresh primitive has been spent.
    Suspend,
    Fault(PortFault),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PortFault {
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("{path}-path transaction attempted a {attempted} access")]
    WrongAccess { path: Path, attempted: &'static str },
    #[error("replayed operation diverged from its recorded primitives")]
    Diverged,
}

/// Primitive access as seen by an algorithm.
pub trait Port {
    fn direct(&mut self, obj: ObjId, prim: Primitive) -> Result<Word, Yield>;
    fn cached(&mut self, obj: ObjId, prim: Primitive) -> Result<CachedOutcome, Yield>;
    fn cache_commit(&mut self) -> Result<CommitOutcome, Yield>;
}

pub(crate) fn abort(class: AbortClass) -> Result<OpResult, Yield> {
    Ok(OpResult::Abort { class })
}

pub(crate) fn value(v: i64) -> Result<OpResult, Yield> {
    Ok(OpResult::Value { value: v })
}

/// Maps a `⊥` from the cache to the abort it causes.
pub(crate) fn cached_abort(outcome: CachedOutcome) -> Option<AbortClass> {
    match outcome {
        CachedOutcome::Value { .. } => None,
        CachedOutcome::CapacityAbort => Some(AbortClass::Capacity),
        CachedOutcome::TrackingSetAbort => Some(AbortClass::TrackingSet),
    }
}

pub(crate) fn cache_commit(port: &mut dyn Port) -> Result<OpResult, Yield> {
    match port.cache_commit()? {
        CommitOutcome::Commit { .. } => Ok(OpResult::Commit),
        CommitOutcome::TrackingSetAbort => abort(AbortClass::TrackingSet),
    }
}

impl Algorithm {
    /// Runs `op` for `tx` from its start. Deterministic in the responses the
    /// port hands back.
    pub fn execute(
        &self,
        layout: &Layout,
        tx: &mut TxCtx,
        op: TOp,
        port: &mut dyn Port,
    ) -> Result<OpResult, Yield> {
        match (self, tx.path) {
            (Algorithm::Naive, Path::Slow) => naive::slow(layout, tx, op, port),
            (Algorithm::Naive, Path::Fast) => naive::fast(layout, tx, op, port),
            (_, Path::Slow) => {
                let counter = (*self == Algorithm::Constant).then(|| layout.counter());
                slow::execute(layout, counter, tx, op, port)
            }
            (Algorithm::Progressive, Path::Fast) => progressive::fast(layout, tx, op, port),
            (Algorithm::Constant, Path::Fast) => constant::fast(layout, tx, op, port),
        }
    }

    /// Upper bound on fresh primitives one t-operation may take, given the
    /// transaction's data-set size. Every shipped operation is loop-free over
    /// its data set, so a linear bound holds.
    pub fn step_budget(&self, data_set: usize) -> usize {
        6 * data_set + 4
    }
}

/// Shared fast-path write: one cached write of the tagged pair to `v_j`.
pub(crate) fn fast_write(
    layout: &Layout,
    tx: &mut TxCtx,
    x: TObj,
    v: i64,
    port: &mut dyn Port,
) -> Result<OpResult, Yield> {
    let out = port.cached(layout.data(x), Primitive::Write { value: tx.tag(v) })?;
    if let Some(class) = cached_abort(out) {
        return abort(class);
    }
    tx.buffer_write(
        x,
        WriteEntry {
            old: Word::ZERO,
            new: v,
        },
    );
    Ok(OpResult::Ok)
}
