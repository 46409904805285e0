//! Event logs produced by the runtime and consumed by the checker and the
//! metrics audits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::memory::{CachedOutcome, CommitOutcome, Primitive};
use crate::types::{ObjId, ObjectKind, Path, ProcessId, TObj, TxId, Word};

/// A t-operation as invoked by a transaction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TOp {
    Read { tobj: TObj },
    Write { tobj: TObj, value: i64 },
    TryCommit,
}

impl fmt::Display for TOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TOp::Read { tobj } => write!(f, "read({tobj})"),
            TOp::Write { tobj, value } => write!(f, "write({tobj},{value})"),
            TOp::TryCommit => write!(f, "tryC"),
        }
    }
}

/// Why a transaction returned `A_k`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortClass {
    Capacity,
    TrackingSet,
    LockObserved,
    Validation,
    CasFailure,
}

impl fmt::Display for AbortClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbortClass::Capacity => "capacity",
            AbortClass::TrackingSet => "tracking-set",
            AbortClass::LockObserved => "lock-observed",
            AbortClass::Validation => "validation",
            AbortClass::CasFailure => "cas-failure",
        })
    }
}

/// Response of a t-operation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum OpResult {
    Value { value: i64 },
    Ok,
    Commit,
    Abort { class: AbortClass },
}

impl OpResult {
    pub fn is_abort(&self) -> bool {
        matches!(self, OpResult::Abort { .. })
    }

    pub fn abort_class(&self) -> Option<AbortClass> {
        match self {
            OpResult::Abort { class } => Some(*class),
            _ => None,
        }
    }
}

impl fmt::Display for OpResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpResult::Value { value } => write!(f, "{value}"),
            OpResult::Ok => write!(f, "ok"),
            OpResult::Commit => write!(f, "C"),
            OpResult::Abort { class } => write!(f, "A({class})"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Direct,
    Cached,
}

/// Outcome of a primitive event as recorded in the log.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PrimOutcome {
    Value { value: Word },
    CapacityAbort,
    TrackingSetAbort,
}

impl From<CachedOutcome> for PrimOutcome {
    fn from(c: CachedOutcome) -> Self {
        match c {
            CachedOutcome::Value { value } => PrimOutcome::Value { value },
            CachedOutcome::CapacityAbort => PrimOutcome::CapacityAbort,
            CachedOutcome::TrackingSetAbort => PrimOutcome::TrackingSetAbort,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Bookkeeping record announcing a transaction; not a t-operation event.
    Begin { process: ProcessId, path: Path },
    Invoke { op: TOp },
    Respond { op: TOp, result: OpResult },
    Primitive {
        process: ProcessId,
        obj: ObjId,
        prim: Primitive,
        access: Access,
        outcome: PrimOutcome,
    },
    CacheCommit {
        process: ProcessId,
        outcome: CommitOutcome,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub tx: TxId,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    /// Whether this step may change shared memory.
    pub fn is_nontrivial(&self) -> bool {
        match &self.kind {
            EventKind::Primitive { prim, outcome, .. } => {
                !prim.is_trivial() && !matches!(
                    outcome,
                    PrimOutcome::CapacityAbort | PrimOutcome::TrackingSetAbort
                )
            }
            EventKind::CacheCommit { outcome, .. } => {
                matches!(outcome, CommitOutcome::Commit { written } if *written > 0)
            }
            _ => false,
        }
    }
}

/// Catalog entry describing one base object of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub id: ObjId,
    pub name: String,
    pub kind: ObjectKind,
}

/// A complete event log together with the object catalog it refers to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub objects: Vec<ObjectInfo>,
    pub events: Vec<Event>,
}

/// One t-operation of a transaction, with its response if it has one.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct OpRecord {
    pub op: TOp,
    pub result: Option<OpResult>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TxStatus {
    Committed,
    Aborted(AbortClass),
    /// Last t-operation has responded but the transaction is not t-complete.
    Live,
    /// Last t-operation is still waiting for its response.
    Pending,
}

/// The projection `H|k` of a history onto one transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxRecord {
    pub id: TxId,
    pub process: Option<ProcessId>,
    pub path: Option<Path>,
    pub ops: Vec<OpRecord>,
    /// Sequence number of the first t-operation event.
    pub first: u64,
    /// Sequence number of the last event of any kind.
    pub last: u64,
}

impl TxRecord {
    pub fn status(&self) -> TxStatus {
        match self.ops.last() {
            None => TxStatus::Live,
            Some(OpRecord { result: None, .. }) => TxStatus::Pending,
            Some(OpRecord {
                result: Some(OpResult::Abort { class }),
                ..
            }) => TxStatus::Aborted(*class),
            Some(OpRecord {
                op: TOp::TryCommit,
                result: Some(OpResult::Commit),
            }) => TxStatus::Committed,
            Some(_) => TxStatus::Live,
        }
    }

    pub fn is_t_complete(&self) -> bool {
        matches!(self.status(), TxStatus::Committed | TxStatus::Aborted(_))
    }

    pub fn read_set(&self) -> impl Iterator<Item = TObj> + '_ {
        self.ops.iter().filter_map(|r| match r.op {
            TOp::Read { tobj } => Some(tobj),
            _ => None,
        })
    }

    pub fn write_set(&self) -> impl Iterator<Item = TObj> + '_ {
        self.ops.iter().filter_map(|r| match r.op {
            TOp::Write { tobj, .. } => Some(tobj),
            _ => None,
        })
    }

    pub fn is_read_only(&self) -> bool {
        self.write_set().next().is_none()
    }

    /// `self` precedes `other` in real-time order.
    pub fn precedes(&self, other: &TxRecord) -> bool {
        self.is_t_complete() && self.last < other.first
    }

    pub fn concurrent_with(&self, other: &TxRecord) -> bool {
        self.id != other.id && !self.precedes(other) && !other.precedes(self)
    }

    pub fn data_set(&self) -> BTreeSet<TObj> {
        self.read_set().chain(self.write_set()).collect()
    }

    /// Data-set conflict: a shared t-object that at least one of the two writes.
    pub fn conflicts_with(&self, other: &TxRecord) -> bool {
        let theirs = other.data_set();
        let writes: BTreeSet<TObj> = self.write_set().chain(other.write_set()).collect();
        self.data_set()
            .intersection(&theirs)
            .any(|x| writes.contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("event {seq}: response for {tx} without a pending invocation")]
    UnmatchedResponse { seq: u64, tx: TxId },
    #[error("event {seq}: {tx} invoked a t-operation while another is pending")]
    OverlappingInvocation { seq: u64, tx: TxId },
    #[error("event {seq}: {tx} acts after becoming t-complete")]
    AfterCompletion { seq: u64, tx: TxId },
}

impl History {
    pub fn new(objects: Vec<ObjectInfo>) -> Self {
        History {
            objects,
            events: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn object_kind(&self, obj: ObjId) -> Option<ObjectKind> {
        self.objects.iter().find(|o| o.id == obj).map(|o| o.kind)
    }

    /// Events of one transaction, in order.
    pub fn project(&self, tx: TxId) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.tx == tx)
    }

    /// Groups the log into per-transaction records, checking that
    /// invocations and responses are well formed.
    pub fn transactions(&self) -> Result<Vec<TxRecord>, HistoryError> {
        let mut txs: BTreeMap<TxId, TxRecord> = BTreeMap::new();
        for e in &self.events {
            let rec = txs.entry(e.tx).or_insert_with(|| TxRecord {
                id: e.tx,
                process: None,
                path: None,
                ops: Vec::new(),
                first: u64::MAX,
                last: e.seq,
            });
            rec.last = e.seq;
            match e.kind {
                EventKind::Begin { process, path } => {
                    rec.process = Some(process);
                    rec.path = Some(path);
                }
                EventKind::Invoke { op } => {
                    if rec.is_t_complete() && !rec.ops.is_empty() {
                        return Err(HistoryError::AfterCompletion { seq: e.seq, tx: e.tx });
                    }
                    if rec.status() == TxStatus::Pending {
                        return Err(HistoryError::OverlappingInvocation { seq: e.seq, tx: e.tx });
                    }
                    rec.first = rec.first.min(e.seq);
                    rec.ops.push(OpRecord { op, result: None });
                }
                EventKind::Respond { result, .. } => match rec.ops.last_mut() {
                    Some(r) if r.result.is_none() => r.result = Some(result),
                    _ => return Err(HistoryError::UnmatchedResponse { seq: e.seq, tx: e.tx }),
                },
                EventKind::Primitive { .. } | EventKind::CacheCommit { .. } => {
                    rec.first = rec.first.min(e.seq);
                }
            }
        }
        Ok(txs
            .into_values()
            .filter(|r| !r.ops.is_empty())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ev(seq: u64, tx: u64, kind: EventKind) -> Event {
        Event {
            seq,
            tx: TxId(tx),
            kind,
        }
    }

    fn inv(seq: u64, tx: u64, op: TOp) -> Event {
        ev(seq, tx, EventKind::Invoke { op })
    }

    fn resp(seq: u64, tx: u64, op: TOp, result: OpResult) -> Event {
        ev(seq, tx, EventKind::Respond { op, result })
    }

    #[test]
    fn statuses_and_real_time_order() {
        let x = TObj(0);
        let h = History {
            objects: vec![],
            events: vec![
                inv(0, 1, TOp::Write { tobj: x, value: 5 }),
                resp(1, 1, TOp::Write { tobj: x, value: 5 }, OpResult::Ok),
                inv(2, 1, TOp::TryCommit),
                resp(3, 1, TOp::TryCommit, OpResult::Commit),
                inv(4, 2, TOp::Read { tobj: x }),
                inv(5, 3, TOp::Read { tobj: x }),
                resp(6, 3, TOp::Read { tobj: x }, OpResult::Value { value: 5 }),
            ],
        };
        let txs = h.transactions().unwrap();
        assert_eq!(txs[0].status(), TxStatus::Committed);
        assert_eq!(txs[1].status(), TxStatus::Pending);
        assert_eq!(txs[2].status(), TxStatus::Live);
        assert!(txs[0].precedes(&txs[1]));
        assert!(txs[1].concurrent_with(&txs[2]));
        assert!(txs[0].conflicts_with(&txs[2]));
        assert!(!txs[1].conflicts_with(&txs[2]));
    }

    #[test]
    fn unmatched_response_is_rejected() {
        let h = History {
            objects: vec![],
            events: vec![resp(0, 1, TOp::TryCommit, OpResult::Commit)],
        };
        assert_eq!(
            h.transactions(),
            Err(HistoryError::UnmatchedResponse { seq: 0, tx: TxId(1) })
        );
    }
}
