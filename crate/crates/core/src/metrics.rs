//! Instrumentation cost and audits over recorded histories.
//!
//! The cost metric is the number of distinct metadata base objects a
//! transaction accesses. Every primitive counts, trivial or not, including
//! cached accesses answered with `⊥`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::algorithms::Algorithm;
use crate::history::{AbortClass, EventKind, History, HistoryError, TxRecord, TxStatus};
use crate::memory::Primitive;
use crate::types::{ObjId, Path, TxId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("transaction {0} does not occur in the history")]
    UnknownTx(TxId),
    #[error(transparent)]
    Malformed(#[from] HistoryError),
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveCounts {
    pub read: u64,
    pub write: u64,
    pub cas: u64,
    pub fetch_add: u64,
    pub cache_commit: u64,
}

impl PrimitiveCounts {
    pub fn total(&self) -> u64 {
        self.read + self.write + self.cas + self.fetch_add + self.cache_commit
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxMetrics {
    pub tx_id: TxId,
    pub path: Option<Path>,
    pub read_only: bool,
    pub write_only: bool,
    pub committed: bool,
    pub distinct_metadata_accessed: usize,
    pub distinct_data_accessed: usize,
    pub primitive_counts: PrimitiveCounts,
    pub abort_class: Option<AbortClass>,
}

/// Distinct (metadata, data) objects touched by `tx`.
fn touched(h: &History, tx: TxId) -> (BTreeSet<ObjId>, BTreeSet<ObjId>) {
    let mut meta = BTreeSet::new();
    let mut data = BTreeSet::new();
    for e in h.project(tx) {
        if let EventKind::Primitive { obj, .. } = e.kind {
            match h.object_kind(obj) {
                Some(k) if k.is_metadata() => meta.insert(obj),
                _ => data.insert(obj),
            };
        }
    }
    (meta, data)
}

/// Number of distinct metadata objects in the primitive events of `tx`.
pub fn metadata_footprint(h: &History, tx: TxId) -> Result<usize, MetricsError> {
    if !h.events.iter().any(|e| e.tx == tx) {
        return Err(MetricsError::UnknownTx(tx));
    }
    Ok(touched(h, tx).0.len())
}

fn metrics_of(h: &History, rec: &TxRecord) -> TxMetrics {
    let (meta, data) = touched(h, rec.id);
    let mut counts = PrimitiveCounts::default();
    for e in h.project(rec.id) {
        match e.kind {
            EventKind::Primitive { prim, .. } => match prim {
                Primitive::Read => counts.read += 1,
                Primitive::Write { .. } => counts.write += 1,
                Primitive::Cas { .. } => counts.cas += 1,
                Primitive::FetchAdd { .. } => counts.fetch_add += 1,
            },
            EventKind::CacheCommit { .. } => counts.cache_commit += 1,
            _ => {}
        }
    }
    let status = rec.status();
    TxMetrics {
        tx_id: rec.id,
        path: rec.path,
        read_only: rec.is_read_only(),
        write_only: rec.read_set().next().is_none() && !rec.is_read_only(),
        committed: status == TxStatus::Committed,
        distinct_metadata_accessed: meta.len(),
        distinct_data_accessed: data.len(),
        primitive_counts: counts,
        abort_class: match status {
            TxStatus::Aborted(c) => Some(c),
            _ => None,
        },
    }
}

/// Per-transaction metrics in transaction-id order.
pub fn tx_metrics(h: &History) -> Result<Vec<TxMetrics>, HistoryError> {
    Ok(h.transactions()?.iter().map(|r| metrics_of(h, r)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAggregate {
    pub path: Path,
    pub transactions: u64,
    pub committed: u64,
    pub max_footprint: usize,
    pub mean_footprint: f64,
    pub max_footprint_read_only: usize,
    pub max_footprint_write_only: usize,
    pub aborts: BTreeMap<AbortClass, u64>,
}

impl PathAggregate {
    fn empty(path: Path) -> Self {
        PathAggregate {
            path,
            transactions: 0,
            committed: 0,
            max_footprint: 0,
            mean_footprint: 0.0,
            max_footprint_read_only: 0,
            max_footprint_write_only: 0,
            aborts: BTreeMap::new(),
        }
    }
}

/// Folds per-transaction metrics (possibly from many histories) by path.
/// Transactions with no recorded path are skipped.
pub fn aggregate<'a>(metrics: impl IntoIterator<Item = &'a TxMetrics>) -> Vec<PathAggregate> {
    let mut fast = PathAggregate::empty(Path::Fast);
    let mut slow = PathAggregate::empty(Path::Slow);
    let mut sums = [0usize; 2];
    for m in metrics {
        let (agg, sum) = match m.path {
            Some(Path::Fast) => (&mut fast, &mut sums[0]),
            Some(Path::Slow) => (&mut slow, &mut sums[1]),
            None => continue,
        };
        let f = m.distinct_metadata_accessed;
        agg.transactions += 1;
        agg.committed += u64::from(m.committed);
        agg.max_footprint = agg.max_footprint.max(f);
        *sum += f;
        if m.read_only {
            agg.max_footprint_read_only = agg.max_footprint_read_only.max(f);
        } else if m.write_only {
            agg.max_footprint_write_only = agg.max_footprint_write_only.max(f);
        }
        if let Some(c) = m.abort_class {
            *agg.aborts.entry(c).or_default() += 1;
        }
    }
    for (agg, sum) in [(&mut fast, sums[0]), (&mut slow, sums[1])] {
        if agg.transactions > 0 {
            agg.mean_footprint = sum as f64 / agg.transactions as f64;
        }
    }
    alloc::vec![fast, slow]
}

/// Progress condition an abort is audited against.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// An abort needs a capacity cause or a concurrent conflicting transaction.
    Progressive,
    /// An abort needs a capacity cause or any concurrent transaction.
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub tx: TxId,
    pub clause: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.tx, self.clause)
    }
}

fn selected(rec: &TxRecord, filter: Option<Path>) -> bool {
    filter.is_none() || rec.path == filter
}

/// Aborts that the condition does not justify. `filter` restricts the audit
/// to one path.
pub fn audit_progress(
    h: &History,
    condition: Condition,
    filter: Option<Path>,
) -> Result<Vec<Violation>, HistoryError> {
    let recs = h.transactions()?;
    let mut out = Vec::new();
    for rec in recs.iter().filter(|r| selected(r, filter)) {
        let TxStatus::Aborted(class) = rec.status() else {
            continue;
        };
        if class == AbortClass::Capacity {
            continue;
        }
        let mut concurrent = recs.iter().filter(|o| rec.concurrent_with(o));
        let clause = match condition {
            Condition::Progressive => (!concurrent.any(|o| rec.conflicts_with(o)))
                .then_some("aborted without a capacity cause or a concurrent conflicting transaction"),
            Condition::Sequential => concurrent
                .next()
                .is_none()
                .then_some("aborted without a capacity cause or a concurrent transaction"),
        };
        if let Some(clause) = clause {
            out.push(Violation {
                tx: rec.id,
                clause: alloc::format!("{clause} ({class})"),
            });
        }
    }
    Ok(out)
}

/// Read-only transactions whose steps include a nontrivial primitive.
pub fn audit_invisible_reads(h: &History, filter: Option<Path>) -> Result<Vec<Violation>, HistoryError> {
    let recs = h.transactions()?;
    let mut out = Vec::new();
    for rec in recs.iter().filter(|r| selected(r, filter) && r.is_read_only()) {
        if let Some(e) = h.project(rec.id).find(|e| e.is_nontrivial()) {
            out.push(Violation {
                tx: rec.id,
                clause: alloc::format!("read-only transaction applied a nontrivial step at event {}", e.seq),
            });
        }
    }
    Ok(out)
}

/// Fast-path transactions whose metadata footprint exceeds the bound of
/// `algorithm`: the number of distinct t-objects read for the progressive
/// algorithm, one for the constant one, zero for the naive one.
pub fn audit_footprint(h: &History, algorithm: Algorithm) -> Result<Vec<Violation>, HistoryError> {
    let mut out = Vec::new();
    for rec in h.transactions()?.iter().filter(|r| r.path == Some(Path::Fast)) {
        let bound = match algorithm {
            Algorithm::Progressive => rec.read_set().collect::<BTreeSet<_>>().len(),
            Algorithm::Constant => 1,
            Algorithm::Naive => 0,
        };
        let got = touched(h, rec.id).0.len();
        if got > bound {
            out.push(Violation {
                tx: rec.id,
                clause: alloc::format!("accessed {got} metadata objects, bound is {bound}"),
            });
        }
    }
    Ok(out)
}
