//! Opacity and strict serializability of finite histories.
//!
//! A history passes when some completion of it admits a legal t-complete
//! t-sequential ordering of its transactions that respects real-time order.
//! Opacity orders every transaction of the completion; strict
//! serializability only the committed ones. The search is a depth-first
//! walk over linear extensions of the real-time order. A prefix is extended
//! only by a transaction whose reads are legal after it, and prefix legality
//! never depends on what follows, so dead `(placed set, committed state)`
//! pairs are memoized.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::history::{History, HistoryError, OpResult, TOp, TxRecord, TxStatus};
use crate::types::{TObj, TxId};

pub const DEFAULT_TX_LIMIT: usize = 8;
/// Completions branch two ways per pending `tryC`; beyond this many the
/// checker refuses.
pub const MAX_PENDING_COMMITS: usize = 10;
/// Every t-object starts with this value, written by the implicit `T_0`.
pub const INITIAL_VALUE: i64 = 0;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Opacity,
    StrictSerializability,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Opacity => "opacity",
            Property::StrictSerializability => "strict-serializability",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("history has {count} transactions, above the limit of {limit}")]
    TooManyTransactions { count: usize, limit: usize },
    #[error("history has {count} pending tryC operations, above the limit of {MAX_PENDING_COMMITS}")]
    TooManyPending { count: usize },
    #[error(transparent)]
    Malformed(#[from] HistoryError),
}

/// How a transaction is completed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionChoice {
    /// Already t-complete.
    Unchanged,
    /// Pending read or write answered with `A_k`.
    AbortPendingOp,
    /// Pending `tryC` answered with `A_k`.
    AbortCommit,
    /// Pending `tryC` answered with `C_k`.
    Commit,
    /// Complete but not t-complete: `tryC_k · A_k` appended.
    AppendAbort,
}

/// A t-complete transaction of some completion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqTx {
    pub id: TxId,
    /// Responded operations only; an op completed with `A_k` by the
    /// completion is dropped since it carries no value.
    pub ops: Vec<(TOp, OpResult)>,
    pub committed: bool,
}

impl SeqTx {
    /// Checks the reads of this transaction against `state` (the values
    /// committed before it) and returns the state after it.
    fn apply(&self, state: &BTreeMap<TObj, i64>) -> Option<BTreeMap<TObj, i64>> {
        let mut local: BTreeMap<TObj, i64> = BTreeMap::new();
        for &(op, result) in &self.ops {
            match (op, result) {
                (TOp::Read { tobj }, OpResult::Value { value }) => {
                    let latest = local
                        .get(&tobj)
                        .or_else(|| state.get(&tobj))
                        .copied()
                        .unwrap_or(INITIAL_VALUE);
                    if latest != value {
                        return None;
                    }
                }
                (TOp::Write { tobj, value }, OpResult::Ok) => {
                    local.insert(tobj, value);
                }
                _ => {}
            }
        }
        let mut next = state.clone();
        if self.committed {
            next.extend(local);
        }
        Some(next)
    }

    /// Final value written to each t-object.
    fn final_writes(&self) -> BTreeMap<TObj, i64> {
        self.ops
            .iter()
            .filter_map(|&(op, r)| match (op, r) {
                (TOp::Write { tobj, value }, OpResult::Ok) => Some((tobj, value)),
                _ => None,
            })
            .collect()
    }
}

/// A t-complete history derived from the input by one set of choices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub txs: Vec<SeqTx>,
    pub choices: BTreeMap<TxId, CompletionChoice>,
    /// `(a, b)` index pairs with `txs[a]` preceding `txs[b]` in real time.
    pub real_time: Vec<(usize, usize)>,
}

/// Whether `s`, taken in order as a t-sequential history, is legal: every
/// read that did not abort returns its own latest write, else the latest
/// write of a preceding committed transaction, else the initial value.
pub fn is_legal_tsequential(s: &[SeqTx]) -> bool {
    let mut state = BTreeMap::new();
    for tx in s {
        match tx.apply(&state) {
            Some(next) => state = next,
            None => return false,
        }
    }
    true
}

fn seq_tx(rec: &TxRecord, commit: bool) -> SeqTx {
    SeqTx {
        id: rec.id,
        ops: rec
            .ops
            .iter()
            .filter_map(|r| r.result.map(|res| (r.op, res)))
            .collect(),
        committed: commit,
    }
}

fn real_time(recs: &[TxRecord]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, ra) in recs.iter().enumerate() {
        for (b, rb) in recs.iter().enumerate() {
            if a != b && ra.precedes(rb) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Every completion allowed by the completion rules: pending reads and writes
/// abort, pending `tryC` commits or aborts, complete but live transactions
/// abort. Insertions are placed at the end of the history, which leaves the
/// real-time order of the input unchanged.
pub fn completions(h: &History) -> Result<Vec<Completion>, CheckError> {
    let recs = h.transactions()?;
    completions_of(&recs)
}

fn completions_of(recs: &[TxRecord]) -> Result<Vec<Completion>, CheckError> {
    let pending: Vec<usize> = recs
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            r.status() == TxStatus::Pending && r.ops.last().is_some_and(|o| o.op == TOp::TryCommit)
        })
        .map(|(i, _)| i)
        .collect();
    if pending.len() > MAX_PENDING_COMMITS {
        return Err(CheckError::TooManyPending {
            count: pending.len(),
        });
    }
    let rt = real_time(recs);
    let mut out = Vec::with_capacity(1 << pending.len());
    for mask in 0u32..(1 << pending.len()) {
        let mut txs = Vec::with_capacity(recs.len());
        let mut choices = BTreeMap::new();
        for (i, rec) in recs.iter().enumerate() {
            let (choice, commit) = match rec.status() {
                TxStatus::Committed => (CompletionChoice::Unchanged, true),
                TxStatus::Aborted(_) => (CompletionChoice::Unchanged, false),
                TxStatus::Live => (CompletionChoice::AppendAbort, false),
                TxStatus::Pending => match pending.iter().position(|&p| p == i) {
                    Some(bit) if mask & (1 << bit) != 0 => (CompletionChoice::Commit, true),
                    Some(_) => (CompletionChoice::AbortCommit, false),
                    None => (CompletionChoice::AbortPendingOp, false),
                },
            };
            choices.insert(rec.id, choice);
            txs.push(seq_tx(rec, commit));
        }
        out.push(Completion {
            txs,
            choices,
            real_time: rt.clone(),
        });
    }
    Ok(out)
}

/// Why one transaction must precede another in any serialization.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum DepReason {
    RealTime,
    /// `to` reads the value `from` wrote.
    ReadsFrom { tobj: TObj },
    /// `from` reads the initial value of a t-object `to` overwrites.
    AntiDependency { tobj: TObj },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub from: TxId,
    pub to: TxId,
    #[serde(flatten)]
    pub reason: DepReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Outcome {
    Pass {
        /// Serialization order.
        witness: Vec<TxId>,
        /// Transactions committed in the chosen completion.
        committed: Vec<TxId>,
    },
    Fail {
        /// A shortest cycle of forced precedences, if one exists.
        cycle: Vec<Dependency>,
        /// `(pending, reader)`: a pending `tryC` that must commit because a
        /// transaction read a value only it wrote.
        forced_commits: Vec<(TxId, TxId)>,
        note: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: Property,
    pub transactions: usize,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self.outcome, Outcome::Pass { .. })
    }

    /// Transactions named by the failure explanation.
    pub fn involved(&self) -> BTreeSet<TxId> {
        match &self.outcome {
            Outcome::Pass { .. } => BTreeSet::new(),
            Outcome::Fail {
                cycle,
                forced_commits,
                ..
            } => cycle
                .iter()
                .flat_map(|d| [d.from, d.to])
                .chain(forced_commits.iter().flat_map(|&(a, b)| [a, b]))
                .collect(),
        }
    }
}

struct Search<'a> {
    txs: Vec<&'a SeqTx>,
    preds: Vec<u64>,
    dead: BTreeSet<(u64, Vec<(TObj, i64)>)>,
    order: Vec<usize>,
}

impl Search<'_> {
    fn run(&mut self, placed: u64, state: &BTreeMap<TObj, i64>) -> bool {
        let n = self.txs.len();
        if placed.count_ones() as usize == n {
            return true;
        }
        let key = (placed, state.iter().map(|(&k, &v)| (k, v)).collect());
        if self.dead.contains(&key) {
            return false;
        }
        for i in 0..n {
            let bit = 1u64 << i;
            if placed & bit != 0 || self.preds[i] & !placed != 0 {
                continue;
            }
            if let Some(next) = self.txs[i].apply(state) {
                self.order.push(i);
                if self.run(placed | bit, &next) {
                    return true;
                }
                self.order.pop();
            }
        }
        self.dead.insert(key);
        false
    }
}

/// Searches one completion for a serialization. Returns the order as indices
/// into `c.txs`.
fn serialize(c: &Completion, property: Property) -> Option<Vec<usize>> {
    let included: Vec<usize> = (0..c.txs.len())
        .filter(|&i| property == Property::Opacity || c.txs[i].committed)
        .collect();
    let local = |i: usize| included.iter().position(|&j| j == i);
    let mut preds = alloc::vec![0u64; included.len()];
    for &(a, b) in &c.real_time {
        if let (Some(la), Some(lb)) = (local(a), local(b)) {
            preds[lb] |= 1 << la;
        }
    }
    let mut search = Search {
        txs: included.iter().map(|&i| &c.txs[i]).collect(),
        preds,
        dead: BTreeSet::new(),
        order: Vec::new(),
    };
    search
        .run(0, &BTreeMap::new())
        .then(|| search.order.iter().map(|&l| included[l]).collect())
}

/// Decides `property` for `h`, refusing histories with more than `limit`
/// transactions.
pub fn check(h: &History, property: Property, limit: usize) -> Result<Verdict, CheckError> {
    let recs = h.transactions()?;
    let limit = limit.min(63);
    if recs.len() > limit {
        return Err(CheckError::TooManyTransactions {
            count: recs.len(),
            limit,
        });
    }
    for c in completions_of(&recs)? {
        if let Some(order) = serialize(&c, property) {
            let witness: Vec<TxId> = order.iter().map(|&i| c.txs[i].id).collect();
            let committed: Vec<TxId> = c.txs.iter().filter(|t| t.committed).map(|t| t.id).collect();
            debug_assert!(verify_witness(
                h,
                property,
                &witness,
                &committed.iter().copied().collect()
            ));
            return Ok(Verdict {
                property,
                transactions: recs.len(),
                outcome: Outcome::Pass { witness, committed },
            });
        }
    }
    Ok(Verdict {
        property,
        transactions: recs.len(),
        outcome: explain(&recs, property),
    })
}

pub fn check_opacity(h: &History, limit: usize) -> Result<Verdict, CheckError> {
    check(h, Property::Opacity, limit)
}

pub fn check_strict_serializability(h: &History, limit: usize) -> Result<Verdict, CheckError> {
    check(h, Property::StrictSerializability, limit)
}

/// Re-validates a pass witness from scratch: `committed` must describe a
/// valid completion, `witness` must list exactly the transactions the
/// property orders, respect real-time order and be legal.
pub fn verify_witness(
    h: &History,
    property: Property,
    witness: &[TxId],
    committed: &BTreeSet<TxId>,
) -> bool {
    let Ok(recs) = h.transactions() else {
        return false;
    };
    let mut seq = Vec::new();
    for rec in &recs {
        let commit = committed.contains(&rec.id);
        let allowed = match rec.status() {
            TxStatus::Committed => commit,
            TxStatus::Aborted(_) | TxStatus::Live => !commit,
            TxStatus::Pending => {
                rec.ops.last().is_some_and(|o| o.op == TOp::TryCommit) || !commit
            }
        };
        if !allowed {
            return false;
        }
        seq.push(seq_tx(rec, commit));
    }
    let expected: BTreeSet<TxId> = seq
        .iter()
        .filter(|t| property == Property::Opacity || t.committed)
        .map(|t| t.id)
        .collect();
    let listed: BTreeSet<TxId> = witness.iter().copied().collect();
    if listed != expected || listed.len() != witness.len() {
        return false;
    }
    let pos = |id: TxId| witness.iter().position(|&w| w == id);
    for a in &recs {
        for b in &recs {
            if let (Some(pa), Some(pb)) = (pos(a.id), pos(b.id)) {
                if a.precedes(b) && pa > pb {
                    return false;
                }
            }
        }
    }
    let ordered: Vec<SeqTx> = witness
        .iter()
        .map(|&id| seq.iter().find(|t| t.id == id).unwrap().clone())
        .collect();
    is_legal_tsequential(&ordered)
}

/// Builds the forced-precedence graph of the most constrained completion
/// and extracts a shortest cycle from it.
fn explain(recs: &[TxRecord], property: Property) -> Outcome {
    // A pending tryC commits iff some other transaction read a value that
    // only it wrote.
    let mut forced: Vec<(TxId, TxId)> = Vec::new();
    let mut commit: BTreeMap<TxId, bool> = recs
        .iter()
        .map(|r| (r.id, r.status() == TxStatus::Committed))
        .collect();
    let all: Vec<SeqTx> = recs.iter().map(|r| seq_tx(r, true)).collect();
    let external_reads = |t: &SeqTx| -> Vec<(TObj, i64)> {
        let mut own = BTreeSet::new();
        let mut out = Vec::new();
        for &(op, r) in &t.ops {
            match (op, r) {
                (TOp::Write { tobj, .. }, OpResult::Ok) => {
                    own.insert(tobj);
                }
                (TOp::Read { tobj }, OpResult::Value { value }) if !own.contains(&tobj) => {
                    out.push((tobj, value))
                }
                _ => {}
            }
        }
        out
    };
    for rec in recs.iter().filter(|r| r.status() == TxStatus::Pending) {
        if rec.ops.last().map(|o| o.op) != Some(TOp::TryCommit) {
            continue;
        }
        let mine = all.iter().find(|t| t.id == rec.id).unwrap().final_writes();
        for reader in &all {
            if reader.id == rec.id {
                continue;
            }
            let reader_counts = property == Property::Opacity || commit[&reader.id];
            let hit = external_reads(reader).into_iter().any(|(x, v)| {
                mine.get(&x) == Some(&v)
                    && v != INITIAL_VALUE
                    && all
                        .iter()
                        .filter(|o| o.id != rec.id && o.id != reader.id)
                        .all(|o| o.final_writes().get(&x) != Some(&v))
            });
            if reader_counts && hit {
                commit.insert(rec.id, true);
                forced.push((rec.id, reader.id));
                break;
            }
        }
    }

    let nodes: Vec<&SeqTx> = all
        .iter()
        .filter(|t| property == Property::Opacity || commit[&t.id])
        .collect();
    let committed_writers = |x: TObj| -> Vec<(TxId, i64)> {
        all.iter()
            .filter(|t| commit[&t.id])
            .filter_map(|t| t.final_writes().get(&x).map(|&v| (t.id, v)))
            .collect()
    };
    let mut edges: Vec<Dependency> = Vec::new();
    for a in recs {
        for b in recs {
            let both = nodes.iter().any(|n| n.id == a.id) && nodes.iter().any(|n| n.id == b.id);
            if both && a.precedes(b) {
                edges.push(Dependency {
                    from: a.id,
                    to: b.id,
                    reason: DepReason::RealTime,
                });
            }
        }
    }
    let mut unexplained = Vec::new();
    for reader in &nodes {
        for (x, v) in external_reads(reader) {
            let writers: Vec<TxId> = committed_writers(x)
                .into_iter()
                .filter(|&(w, val)| w != reader.id && val == v)
                .map(|(w, _)| w)
                .collect();
            let from_init = v == INITIAL_VALUE;
            match (writers.as_slice(), from_init) {
                ([w], false) => edges.push(Dependency {
                    from: *w,
                    to: reader.id,
                    reason: DepReason::ReadsFrom { tobj: x },
                }),
                ([], true) => {
                    for (w, _) in committed_writers(x) {
                        if w != reader.id {
                            edges.push(Dependency {
                                from: reader.id,
                                to: w,
                                reason: DepReason::AntiDependency { tobj: x },
                            });
                        }
                    }
                }
                ([], false) => unexplained.push(format!("{} reads {x}={v}", reader.id)),
                _ => {}
            }
        }
    }
    edges.sort_by_key(|d| (d.from, d.to));
    edges.dedup_by_key(|d| (d.from, d.to));
    let cycle = shortest_cycle(&edges);
    let note = if !unexplained.is_empty() {
        format!(
            "no committed transaction wrote the value observed: {}",
            unexplained.join(", ")
        )
    } else if cycle.is_empty() {
        String::from("exhaustive search found no serialization in any completion")
    } else {
        String::from("precedence cycle: no serialization can respect every constraint")
    };
    Outcome::Fail {
        cycle,
        forced_commits: forced,
        note,
    }
}

fn shortest_cycle(edges: &[Dependency]) -> Vec<Dependency> {
    let nodes: BTreeSet<TxId> = edges.iter().flat_map(|d| [d.from, d.to]).collect();
    let mut best: Vec<Dependency> = Vec::new();
    for &start in &nodes {
        // BFS from start back to start.
        let mut parent: BTreeMap<TxId, Dependency> = BTreeMap::new();
        let mut queue = VecDeque::from([start]);
        let mut found = None;
        'bfs: while let Some(u) = queue.pop_front() {
            for d in edges.iter().filter(|d| d.from == u) {
                if d.to == start {
                    found = Some(*d);
                    break 'bfs;
                }
                if d.to != start && !parent.contains_key(&d.to) {
                    parent.insert(d.to, *d);
                    queue.push_back(d.to);
                }
            }
        }
        if let Some(last) = found {
            let mut cycle = alloc::vec![last];
            let mut at = last.from;
            while at != start {
                let d = parent[&at];
                cycle.push(d);
                at = d.from;
            }
            cycle.reverse();
            if best.is_empty() || cycle.len() < best.len() {
                best = cycle;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{Event, EventKind};
    use alloc::vec;

    /// Builds a history from `(tx, op, result)` triples; `None` leaves the
    /// operation pending. Each triple is an invocation immediately followed
    /// by its response.
    fn hist(ops: &[(u64, TOp, Option<OpResult>)]) -> History {
        let mut events = Vec::new();
        for &(tx, op, result) in ops {
            let seq = events.len() as u64;
            events.push(Event {
                seq,
                tx: TxId(tx),
                kind: EventKind::Invoke { op },
            });
            if let Some(result) = result {
                events.push(Event {
                    seq: seq + 1,
                    tx: TxId(tx),
                    kind: EventKind::Respond { op, result },
                });
            }
        }
        History {
            objects: vec![],
            events,
        }
    }

    const X: TObj = TObj(0);
    const Y: TObj = TObj(1);

    fn r(x: TObj, v: i64) -> (TOp, Option<OpResult>) {
        (TOp::Read { tobj: x }, Some(OpResult::Value { value: v }))
    }
    fn w(x: TObj, v: i64) -> (TOp, Option<OpResult>) {
        (TOp::Write { tobj: x, value: v }, Some(OpResult::Ok))
    }
    fn c() -> (TOp, Option<OpResult>) {
        (TOp::TryCommit, Some(OpResult::Commit))
    }
    fn a() -> (TOp, Option<OpResult>) {
        (
            TOp::TryCommit,
            Some(OpResult::Abort {
                class: crate::history::AbortClass::Validation,
            }),
        )
    }
    fn at(tx: u64, (op, res): (TOp, Option<OpResult>)) -> (u64, TOp, Option<OpResult>) {
        (tx, op, res)
    }

    fn seq(id: u64, ops: &[(TOp, Option<OpResult>)], committed: bool) -> SeqTx {
        SeqTx {
            id: TxId(id),
            ops: ops.iter().map(|&(o, r)| (o, r.unwrap())).collect(),
            committed,
        }
    }

    #[test]
    fn legality_cases() {
        assert!(is_legal_tsequential(&[
            seq(1, &[w(X, 5), c()], true),
            seq(2, &[r(X, 5), c()], true)
        ]));
        assert!(!is_legal_tsequential(&[
            seq(1, &[w(X, 5), a()], false),
            seq(2, &[r(X, 5), c()], true)
        ]));
        assert!(is_legal_tsequential(&[seq(
            1,
            &[r(X, 0), w(X, 5), r(X, 5), c()],
            true
        )]));
    }

    #[test]
    fn t_complete_history_has_one_completion() {
        let h = hist(&[at(1, w(X, 1)), at(1, c())]);
        let cs = completions(&h).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].choices[&TxId(1)], CompletionChoice::Unchanged);
    }

    #[test]
    fn pending_commit_branches_two_ways() {
        let h = hist(&[at(1, w(X, 1)), (1, TOp::TryCommit, None)]);
        let cs = completions(&h).unwrap();
        let choices: Vec<_> = cs.iter().map(|c| c.choices[&TxId(1)]).collect();
        assert_eq!(choices, [CompletionChoice::AbortCommit, CompletionChoice::Commit]);
    }

    #[test]
    fn live_reader_gets_abort_appended() {
        let h = hist(&[at(1, r(X, 0)), at(1, r(Y, 0))]);
        let cs = completions(&h).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].choices[&TxId(1)], CompletionChoice::AppendAbort);
        assert!(!cs[0].txs[0].committed);
    }

    #[test]
    fn too_many_pending_commits_is_refused() {
        let ops: Vec<_> = (1..=11).map(|t| (t, TOp::TryCommit, None)).collect();
        assert_eq!(
            completions(&hist(&ops)),
            Err(CheckError::TooManyPending { count: 11 })
        );
    }

    #[test]
    fn transaction_limit_is_enforced() {
        let ops: Vec<_> = (1..=9).map(|t| at(t, c())).collect();
        assert_eq!(
            check_opacity(&hist(&ops), DEFAULT_TX_LIMIT),
            Err(CheckError::TooManyTransactions { count: 9, limit: 8 })
        );
    }

    #[test]
    fn sequential_history_passes_with_identity_witness() {
        let h = hist(&[at(1, w(X, 5)), at(1, c()), at(2, r(X, 5)), at(2, c())]);
        let v = check_strict_serializability(&h, 8).unwrap();
        assert_eq!(
            v.outcome,
            Outcome::Pass {
                witness: vec![TxId(1), TxId(2)],
                committed: vec![TxId(1), TxId(2)]
            }
        );
    }

    #[test]
    fn read_of_unwritten_value_fails() {
        let h = hist(&[at(1, w(X, 5)), at(1, c()), at(2, r(X, 7)), at(2, c())]);
        let v = check_opacity(&h, 8).unwrap();
        assert!(!v.passed());
        match v.outcome {
            Outcome::Fail { note, .. } => assert!(note.contains("T2 reads X0=7"), "{note}"),
            _ => unreachable!(),
        }
    }

    #[test]
    fn aborted_reader_matters_for_opacity_only() {
        // T2 observes T1's write to X but the initial Y while T1 wrote both:
        // inconsistent snapshot, then aborts.
        let h = hist(&[
            at(1, w(X, 1)),
            at(1, w(Y, 1)),
            at(2, r(X, 1)),
            at(1, c()),
            at(2, r(Y, 0)),
            at(2, a()),
        ]);
        assert!(!check_opacity(&h, 8).unwrap().passed());
        assert!(check_strict_serializability(&h, 8).unwrap().passed());
    }

    #[test]
    fn pending_writer_observed_must_commit() {
        let h = hist(&[
            at(1, w(X, 4)),
            (1, TOp::TryCommit, None),
            at(2, r(X, 4)),
            at(2, c()),
        ]);
        let v = check_strict_serializability(&h, 8).unwrap();
        assert_eq!(
            v.outcome,
            Outcome::Pass {
                witness: vec![TxId(1), TxId(2)],
                committed: vec![TxId(1), TxId(2)]
            }
        );
    }

    #[test]
    fn write_skew_cycle_is_reported() {
        // Each reads the initial value of what the other writes.
        let h = hist(&[
            at(1, r(Y, 0)),
            at(2, r(X, 0)),
            at(1, w(X, 1)),
            at(2, w(Y, 1)),
            at(1, c()),
            at(2, c()),
        ]);
        let v = check_strict_serializability(&h, 8).unwrap();
        match &v.outcome {
            Outcome::Fail { cycle, .. } => {
                assert_eq!(cycle.len(), 2);
                assert!(cycle.iter().all(|d| matches!(d.reason, DepReason::AntiDependency { .. })));
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn witness_verification_rejects_tampering() {
        let h = hist(&[at(1, w(X, 5)), at(1, c()), at(2, r(X, 5)), at(2, c())]);
        let committed: BTreeSet<TxId> = [TxId(1), TxId(2)].into();
        assert!(verify_witness(&h, Property::Opacity, &[TxId(1), TxId(2)], &committed));
        assert!(!verify_witness(&h, Property::Opacity, &[TxId(2), TxId(1)], &committed));
        assert!(!verify_witness(&h, Property::Opacity, &[TxId(1)], &committed));
        let only_one: BTreeSet<TxId> = [TxId(2)].into();
        assert!(!verify_witness(&h, Property::Opacity, &[TxId(1), TxId(2)], &only_one));
    }
}
