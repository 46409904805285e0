//! Scheduler-driven execution of transactions.
//!
//! The runtime owns one [`Memory`] and advances transactions one primitive
//! at a time as directed by a [`Schedule`], recording every event in a
//! [`History`]. Responses are emitted in the same step as the final
//! primitive of their t-operation.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, Layout, Port, PortFault, TxCtx, Yield};
use crate::history::{Access, Event, EventKind, History, ObjectInfo, OpResult, PrimOutcome, TOp};
use crate::memory::{CachedOutcome, CommitOutcome, Memory, MemoryError, Primitive, DEFAULT_CAPACITY};
use crate::schedule::{Schedule, Step};
use crate::types::{ObjId, Path, ProcessId, TxId, Word};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub n_tobjects: u32,
    /// Tracking-set capacity.
    pub capacity: usize,
}

impl SimConfig {
    pub fn new(algorithm: Algorithm, n_tobjects: u32) -> Self {
        SimConfig {
            algorithm,
            n_tobjects,
            capacity: DEFAULT_CAPACITY,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("{process} already runs live transaction {tx}")]
    ProcessBusy { process: ProcessId, tx: TxId },
    #[error("transaction id {0} is already in use")]
    DuplicateTx(TxId),
    #[error("transaction id must be positive")]
    ReservedTx,
    #[error("unknown transaction {0}")]
    UnknownTx(TxId),
    #[error("{0} is t-complete")]
    TxComplete(TxId),
    #[error("{0} already has a pending t-operation")]
    OpPending(TxId),
    #[error("{0} has no pending t-operation")]
    NoPendingOp(TxId),
    #[error("{0} has no program operation left")]
    ProgramExhausted(TxId),
    #[error("{tx} addresses {tobj}, outside the {n} declared t-objects")]
    UnknownTObj { tx: TxId, tobj: crate::types::TObj, n: u32 },
    #[error("{tx}: {op} took more than {budget} steps")]
    BudgetExceeded { tx: TxId, op: TOp, budget: usize },
    #[error("{tx}: {fault}")]
    Fault { tx: TxId, fault: PortFault },
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// A runtime error tagged with the index of the schedule step that caused it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("schedule step {step}: {source}")]
pub struct ScheduleError {
    pub step: usize,
    pub source: RuntimeError,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Reply {
    Direct(Word),
    Cached(CachedOutcome),
    Commit(CommitOutcome),
}

#[derive(Clone, Debug)]
struct Pending {
    op: TOp,
    replies: Vec<Reply>,
}

#[derive(Clone, Debug)]
struct Slot {
    ctx: TxCtx,
    done: bool,
    program: VecDeque<TOp>,
    pending: Option<Pending>,
}

pub struct Runtime {
    config: SimConfig,
    layout: Layout,
    memory: Memory,
    txs: BTreeMap<TxId, Slot>,
    busy: BTreeMap<ProcessId, TxId>,
    history: History,
}

struct ReplayPort<'a> {
    memory: &'a mut Memory,
    process: ProcessId,
    path: Path,
    replies: &'a mut Vec<Reply>,
    cursor: usize,
    fresh: bool,
    events: &'a mut Vec<EventKind>,
}

impl ReplayPort<'_> {
    /// Returns the recorded reply for the next call, or `None` if this call
    /// should run for real. A second fresh call suspends.
    fn replayed(&mut self) -> Result<Option<Reply>, Yield> {
        if self.cursor < self.replies.len() {
            self.cursor += 1;
            return Ok(Some(self.replies[self.cursor - 1]));
        }
        if self.fresh {
            return Err(Yield::Suspend);
        }
        self.fresh = true;
        self.cursor += 1;
        Ok(None)
    }

    fn require(&self, path: Path, attempted: &'static str) -> Result<(), Yield> {
        if self.path == path {
            Ok(())
        } else {
            Err(Yield::Fault(PortFault::WrongAccess {
                path: self.path,
                attempted,
            }))
        }
    }
}

impl Port for ReplayPort<'_> {
    fn direct(&mut self, obj: ObjId, prim: Primitive) -> Result<Word, Yield> {
        self.require(Path::Slow, "direct")?;
        match self.replayed()? {
            Some(Reply::Direct(w)) => Ok(w),
            Some(_) => Err(Yield::Fault(PortFault::Diverged)),
            None => {
                let w = self
                    .memory
                    .apply_direct(self.process, obj, prim)
                    .map_err(|e| Yield::Fault(e.into()))?;
                self.replies.push(Reply::Direct(w));
                self.events.push(EventKind::Primitive {
                    process: self.process,
                    obj,
                    prim,
                    access: Access::Direct,
                    outcome: PrimOutcome::Value { value: w },
                });
                Ok(w)
            }
        }
    }

    fn cached(&mut self, obj: ObjId, prim: Primitive) -> Result<CachedOutcome, Yield> {
        self.require(Path::Fast, "cached")?;
        match self.replayed()? {
            Some(Reply::Cached(c)) => Ok(c),
            Some(_) => Err(Yield::Fault(PortFault::Diverged)),
            None => {
                let c = self
                    .memory
                    .apply_cached(self.process, obj, prim)
                    .map_err(|e| Yield::Fault(e.into()))?;
                self.replies.push(Reply::Cached(c));
                self.events.push(EventKind::Primitive {
                    process: self.process,
                    obj,
                    prim,
                    access: Access::Cached,
                    outcome: c.into(),
                });
                Ok(c)
            }
        }
    }

    fn cache_commit(&mut self) -> Result<CommitOutcome, Yield> {
        self.require(Path::Fast, "cache-commit")?;
        match self.replayed()? {
            Some(Reply::Commit(c)) => Ok(c),
            Some(_) => Err(Yield::Fault(PortFault::Diverged)),
            None => {
                let c = self.memory.cache_commit(self.process);
                self.replies.push(Reply::Commit(c));
                self.events.push(EventKind::CacheCommit {
                    process: self.process,
                    outcome: c,
                });
                Ok(c)
            }
        }
    }
}

impl Runtime {
    pub fn new(config: SimConfig) -> Result<Self, RuntimeError> {
        let layout = Layout::new(config.algorithm, config.n_tobjects);
        let memory = Memory::new(config.capacity, layout.catalog())?;
        let objects = memory
            .objects()
            .iter()
            .map(|o| ObjectInfo {
                id: o.id,
                name: o.name.clone(),
                kind: o.kind,
            })
            .collect();
        Ok(Runtime {
            config,
            layout,
            memory,
            txs: BTreeMap::new(),
            busy: BTreeMap::new(),
            history: History::new(objects),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn into_history(self) -> History {
        self.history
    }

    pub fn tx(&self, tx: TxId) -> Option<&TxCtx> {
        self.txs.get(&tx).map(|s| &s.ctx)
    }

    pub fn is_t_complete(&self, tx: TxId) -> bool {
        self.txs.get(&tx).is_some_and(|s| s.done)
    }

    /// Transactions that have begun and are not yet t-complete.
    pub fn live(&self) -> impl Iterator<Item = TxId> + '_ {
        self.txs.iter().filter(|(_, s)| !s.done).map(|(&t, _)| t)
    }

    fn record(&mut self, tx: TxId, kind: EventKind) -> Event {
        let e = Event {
            seq: self.history.events.len() as u64,
            tx,
            kind,
        };
        self.history.events.push(e.clone());
        e
    }

    /// Starts a transaction under the next unused id.
    pub fn begin_tx(&mut self, process: ProcessId, path: Path) -> Result<TxId, RuntimeError> {
        let tx = TxId(self.txs.keys().next_back().map_or(1, |t| t.0 + 1));
        self.begin_with(tx, process, path, Vec::new())?;
        Ok(tx)
    }

    /// Starts transaction `tx` with an optional program for [`Step::Turn`].
    pub fn begin_with(
        &mut self,
        tx: TxId,
        process: ProcessId,
        path: Path,
        program: Vec<TOp>,
    ) -> Result<Event, RuntimeError> {
        if tx == TxId::INIT {
            return Err(RuntimeError::ReservedTx);
        }
        if self.txs.contains_key(&tx) {
            return Err(RuntimeError::DuplicateTx(tx));
        }
        if let Some(&live) = self.busy.get(&process) {
            return Err(RuntimeError::ProcessBusy { process, tx: live });
        }
        if path == Path::Fast {
            self.memory.begin_hardware(process);
        }
        self.busy.insert(process, tx);
        self.txs.insert(
            tx,
            Slot {
                ctx: TxCtx::new(tx, process, path),
                done: false,
                program: program.into(),
                pending: None,
            },
        );
        Ok(self.record(tx, EventKind::Begin { process, path }))
    }

    fn slot(&self, tx: TxId) -> Result<&Slot, RuntimeError> {
        let slot = self.txs.get(&tx).ok_or(RuntimeError::UnknownTx(tx))?;
        if slot.done {
            return Err(RuntimeError::TxComplete(tx));
        }
        Ok(slot)
    }

    /// Records the invocation of `op`.
    pub fn issue(&mut self, tx: TxId, op: TOp) -> Result<Event, RuntimeError> {
        if self.slot(tx)?.pending.is_some() {
            return Err(RuntimeError::OpPending(tx));
        }
        if let TOp::Read { tobj } | TOp::Write { tobj, .. } = op {
            if !self.layout.contains(tobj) {
                return Err(RuntimeError::UnknownTObj {
                    tx,
                    tobj,
                    n: self.layout.n_tobjects,
                });
            }
        }
        self.txs.get_mut(&tx).unwrap().pending = Some(Pending {
            op,
            replies: Vec::new(),
        });
        Ok(self.record(tx, EventKind::Invoke { op }))
    }

    /// Executes one step of the pending t-operation of `tx`: at most one
    /// primitive or cache-commit, plus the response if the operation
    /// finishes.
    pub fn advance(&mut self, tx: TxId) -> Result<Vec<Event>, RuntimeError> {
        let slot = self.slot(tx)?;
        let mut pending = slot.pending.clone().ok_or(RuntimeError::NoPendingOp(tx))?;
        let mut scratch = slot.ctx.clone();
        let (process, path) = (scratch.process, scratch.path);
        let mut kinds = Vec::new();
        let outcome = {
            let mut port = ReplayPort {
                memory: &mut self.memory,
                process,
                path,
                replies: &mut pending.replies,
                cursor: 0,
                fresh: false,
                events: &mut kinds,
            };
            self.config
                .algorithm
                .execute(&self.layout, &mut scratch, pending.op, &mut port)
        };
        let mut out: Vec<Event> = kinds.into_iter().map(|k| self.record(tx, k)).collect();
        match outcome {
            Err(Yield::Suspend) => {
                let budget = self.config.algorithm.step_budget(scratch.data_set_len().max(1));
                if pending.replies.len() > budget {
                    return Err(RuntimeError::BudgetExceeded {
                        tx,
                        op: pending.op,
                        budget,
                    });
                }
                self.txs.get_mut(&tx).unwrap().pending = Some(pending);
            }
            Err(Yield::Fault(fault)) => return Err(RuntimeError::Fault { tx, fault }),
            Ok(result) => {
                let done = matches!(result, OpResult::Commit | OpResult::Abort { .. });
                if done {
                    if path == Path::Fast && result.is_abort() {
                        self.memory.discard(process);
                    }
                    self.busy.remove(&process);
                }
                let slot = self.txs.get_mut(&tx).unwrap();
                slot.ctx = scratch;
                slot.pending = None;
                slot.done = done;
                out.push(self.record(
                    tx,
                    EventKind::Respond {
                        op: pending.op,
                        result,
                    },
                ));
            }
        }
        Ok(out)
    }

    /// Advances `tx` until its pending t-operation responds.
    pub fn finish(&mut self, tx: TxId) -> Result<Vec<Event>, RuntimeError> {
        let mut out = self.advance(tx)?;
        while self.txs[&tx].pending.is_some() {
            out.extend(self.advance(tx)?);
        }
        Ok(out)
    }

    /// One step of the program of `tx`; see [`Step::Turn`].
    pub fn turn(&mut self, tx: TxId) -> Result<Vec<Event>, RuntimeError> {
        let slot = self.txs.get(&tx).ok_or(RuntimeError::UnknownTx(tx))?;
        if slot.done {
            return Ok(Vec::new());
        }
        if slot.pending.is_some() {
            return self.advance(tx);
        }
        let op = self
            .txs
            .get_mut(&tx)
            .unwrap()
            .program
            .pop_front()
            .ok_or(RuntimeError::ProgramExhausted(tx))?;
        Ok(alloc::vec![self.issue(tx, op)?])
    }

    pub fn step(&mut self, step: &Step) -> Result<Vec<Event>, RuntimeError> {
        match step {
            Step::Begin {
                tx,
                process,
                path,
                program,
            } => Ok(alloc::vec![self.begin_with(*tx, *process, *path, program.clone())?]),
            Step::Issue { tx, op } => Ok(alloc::vec![self.issue(*tx, *op)?]),
            Step::Advance { tx } => self.advance(*tx),
            Step::Finish { tx } => self.finish(*tx),
            Step::Turn { tx } => self.turn(*tx),
            Step::Mark { .. } => Ok(Vec::new()),
            Step::InjectAbort { process } => {
                self.memory.inject_abort(*process);
                Ok(Vec::new())
            }
        }
    }

    /// Runs every step of `schedule` in order.
    pub fn run(&mut self, schedule: &Schedule) -> Result<(), ScheduleError> {
        for (i, s) in schedule.steps.iter().enumerate() {
            self.step(s)
                .map_err(|source| ScheduleError { step: i, source })?;
        }
        Ok(())
    }
}

/// Executes `schedule` on a fresh runtime and returns the recorded history.
pub fn run_to_completion(config: SimConfig, schedule: &Schedule) -> Result<History, ScheduleError> {
    let mut rt = Runtime::new(config).map_err(|source| ScheduleError { step: 0, source })?;
    rt.run(schedule)?;
    Ok(rt.into_history())
}

/// Human-readable label used in reports: `T<n>` or a scenario-provided alias.
pub fn tx_label(labels: &BTreeMap<TxId, String>, tx: TxId) -> String {
    labels
        .get(&tx)
        .cloned()
        .unwrap_or_else(|| alloc::format!("{tx}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::AbortClass;
    use crate::schedule::{gen_random_schedule, FuzzParams};
    use crate::types::TObj;

    fn rt(alg: Algorithm, n: u32) -> Runtime {
        Runtime::new(SimConfig::new(alg, n)).unwrap()
    }

    #[test]
    fn begin_allocates_distinct_ids() {
        let mut r = rt(Algorithm::Progressive, 2);
        let a = r.begin_tx(ProcessId(1), Path::Slow).unwrap();
        let b = r.begin_tx(ProcessId(2), Path::Fast).unwrap();
        assert_ne!(a, b);
        assert_eq!(r.live().count(), 2);
    }

    #[test]
    fn one_live_transaction_per_process() {
        let mut r = rt(Algorithm::Progressive, 2);
        let a = r.begin_tx(ProcessId(1), Path::Slow).unwrap();
        assert_eq!(
            r.begin_tx(ProcessId(1), Path::Fast),
            Err(RuntimeError::ProcessBusy {
                process: ProcessId(1),
                tx: a
            })
        );
    }

    #[test]
    fn slow_read_advances_one_primitive_per_step() {
        let mut r = rt(Algorithm::Progressive, 2);
        let t = r.begin_tx(ProcessId(1), Path::Slow).unwrap();
        r.issue(t, TOp::Read { tobj: TObj(0) }).unwrap();
        // data read, lock read, then one validation re-read that also responds
        for expected in [1, 1, 2] {
            let evs = r.advance(t).unwrap();
            assert_eq!(evs.len(), expected);
            assert!(matches!(evs[0].kind, EventKind::Primitive { .. }));
        }
        assert!(matches!(
            r.history().events.last().unwrap().kind,
            EventKind::Respond {
                result: OpResult::Value { value: 0 },
                ..
            }
        ));
        assert_eq!(r.advance(t), Err(RuntimeError::NoPendingOp(t)));
    }

    #[test]
    fn invalidated_fast_transaction_aborts_on_next_step() {
        let mut r = rt(Algorithm::Progressive, 2);
        let fast = r.begin_tx(ProcessId(2), Path::Fast).unwrap();
        r.issue(fast, TOp::Read { tobj: TObj(0) }).unwrap();
        r.finish(fast).unwrap();
        let slow = r.begin_tx(ProcessId(1), Path::Slow).unwrap();
        r.issue(slow, TOp::Write { tobj: TObj(0), value: 3 }).unwrap();
        r.finish(slow).unwrap();
        r.issue(slow, TOp::TryCommit).unwrap();
        r.advance(slow).unwrap(); // cas on r0 invalidates the fast tracking set
        r.issue(fast, TOp::Read { tobj: TObj(1) }).unwrap();
        let evs = r.advance(fast).unwrap();
        assert_eq!(evs.len(), 2);
        assert!(matches!(
            evs[1].kind,
            EventKind::Respond {
                result: OpResult::Abort {
                    class: AbortClass::TrackingSet
                },
                ..
            }
        ));
        assert!(r.is_t_complete(fast));
        assert!(r.memory().tracking_set(ProcessId(2)).unwrap().is_empty());
        assert_eq!(r.advance(fast), Err(RuntimeError::TxComplete(fast)));
    }

    #[test]
    fn schedule_errors_carry_step_index() {
        let mut s = Schedule::new();
        s.begin(1, 1, Path::Slow).commit(1).advance(1, 1);
        let err = run_to_completion(SimConfig::new(Algorithm::Progressive, 1), &s).unwrap_err();
        assert_eq!(err.step, 3);
        assert_eq!(err.source, RuntimeError::TxComplete(TxId(1)));
    }

    #[test]
    fn empty_schedule_gives_empty_history() {
        let h = run_to_completion(SimConfig::new(Algorithm::Constant, 2), &Schedule::new()).unwrap();
        assert!(h.is_empty());
        assert_eq!(h.objects.len(), 5);
    }

    #[test]
    fn t_sequential_writer_then_reader() {
        for alg in Algorithm::ALL {
            for (wp, rp) in [(Path::Slow, Path::Slow), (Path::Fast, Path::Slow), (Path::Slow, Path::Fast), (Path::Fast, Path::Fast)] {
                let mut s = Schedule::new();
                s.begin(1, 1, wp).write(1, 0, 9).commit(1);
                s.begin(2, 2, rp).read(2, 0).commit(2);
                let h = run_to_completion(SimConfig::new(alg, 2), &s).unwrap();
                let txs = h.transactions().unwrap();
                assert_eq!(txs[1].ops[0].result, Some(OpResult::Value { value: 9 }), "{alg} {wp} {rp}");
                assert_eq!(txs[1].ops[1].result, Some(OpResult::Commit));
            }
        }
    }

    #[test]
    fn fast_path_never_issues_direct_primitives() {
        for seed in 0..50 {
            let s = gen_random_schedule(FuzzParams {
                seed,
                n_txns: 4,
                n_tobjects: 3,
                ops_per_txn: 3,
                fast_fraction: 0.5,
            })
            .unwrap();
            for alg in Algorithm::ALL {
                let h = run_to_completion(SimConfig::new(alg, 3), &s).unwrap();
                let txs = h.transactions().unwrap();
                for t in &txs {
                    assert!(t.is_t_complete(), "{alg} seed {seed}: {} not complete", t.id);
                    let commits = h
                        .project(t.id)
                        .filter(|e| matches!(e.kind, EventKind::CacheCommit { .. }))
                        .count();
                    for e in h.project(t.id) {
                        if let EventKind::Primitive { access, .. } = e.kind {
                            let want = if t.path == Some(Path::Fast) { Access::Cached } else { Access::Direct };
                            assert_eq!(access, want);
                        }
                    }
                    if t.path == Some(Path::Slow) {
                        assert_eq!(commits, 0);
                    } else {
                        assert!(commits <= 1);
                    }
                }
            }
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let s = gen_random_schedule(FuzzParams {
            seed: 99,
            n_txns: 5,
            n_tobjects: 2,
            ops_per_txn: 3,
            fast_fraction: 0.6,
        })
        .unwrap();
        for alg in Algorithm::ALL {
            let a = run_to_completion(SimConfig::new(alg, 2), &s).unwrap();
            let b = run_to_completion(SimConfig::new(alg, 2), &s).unwrap();
            assert_eq!(a, b);
        }
    }
}
