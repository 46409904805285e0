//! Test-only helpers: a brute-force opacity oracle written straight from the
//! definitions, a random t-level history generator and a history builder.

#![allow(dead_code)]

use hytm_core::history::{Event, EventKind, History, OpResult, TOp};
use hytm_core::{AbortClass, TObj, TxId};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
struct RawTx {
    ops: Vec<(TOp, Option<OpResult>)>,
    first: u64,
    last: u64,
}

impl RawTx {
    fn t_complete(&self) -> bool {
        matches!(
            self.ops.last(),
            Some((_, Some(OpResult::Abort { .. }))) | Some((TOp::TryCommit, Some(OpResult::Commit)))
        )
    }

    fn committed(&self) -> bool {
        matches!(self.ops.last(), Some((TOp::TryCommit, Some(OpResult::Commit))))
    }

    fn commit_pending(&self) -> bool {
        matches!(self.ops.last(), Some((TOp::TryCommit, None)))
    }
}

fn raw(h: &History) -> Vec<RawTx> {
    let mut by_tx: BTreeMap<TxId, RawTx> = BTreeMap::new();
    for e in &h.events {
        let t = by_tx.entry(e.tx).or_insert(RawTx {
            ops: vec![],
            first: u64::MAX,
            last: 0,
        });
        t.last = e.seq;
        match e.kind {
            EventKind::Invoke { op } => {
                t.first = t.first.min(e.seq);
                t.ops.push((op, None));
            }
            EventKind::Respond { result, .. } => t.ops.last_mut().unwrap().1 = Some(result),
            _ => {}
        }
    }
    by_tx.into_values().collect()
}

/// Legality of `order` (indices into `txs`), where `commit[i]` says whether
/// transaction `i` commits in the completion.
fn legal(txs: &[RawTx], commit: &[bool], order: &[usize]) -> bool {
    let mut committed: BTreeMap<TObj, i64> = BTreeMap::new();
    for &i in order {
        let mut mine: BTreeMap<TObj, i64> = BTreeMap::new();
        for &(op, res) in &txs[i].ops {
            match (op, res) {
                (TOp::Read { tobj }, Some(OpResult::Value { value })) => {
                    let expect = mine.get(&tobj).or(committed.get(&tobj)).copied().unwrap_or(0);
                    if expect != value {
                        return false;
                    }
                }
                (TOp::Write { tobj, value }, Some(OpResult::Ok)) => {
                    mine.insert(tobj, value);
                }
                _ => {}
            }
        }
        if commit[i] {
            committed.extend(mine);
        }
    }
    true
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (k, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Exhaustive check: every completion, every permutation.
pub fn oracle(h: &History, opacity: bool) -> bool {
    let txs = raw(h);
    let pending: Vec<usize> = (0..txs.len()).filter(|&i| txs[i].commit_pending()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let commit: Vec<bool> = (0..txs.len())
            .map(|i| match pending.iter().position(|&p| p == i) {
                Some(b) => mask & (1 << b) != 0,
                None => txs[i].committed(),
            })
            .collect();
        let included: Vec<usize> = (0..txs.len()).filter(|&i| opacity || commit[i]).collect();
        for order in permutations(&included) {
            let respects_rt = order.iter().enumerate().all(|(pos, &b)| {
                order[pos + 1..]
                    .iter()
                    .all(|&a| !(txs[a].t_complete() && txs[a].last < txs[b].first))
            });
            if respects_rt && legal(&txs, &commit, &order) {
                return true;
            }
        }
    }
    false
}

/// Builds t-level histories event by event.
#[derive(Default)]
pub struct Builder {
    events: Vec<Event>,
    pending: BTreeMap<u64, TOp>,
}

impl Builder {
    pub fn new() -> Self {
        Builder::default()
    }

    pub fn inv(mut self, tx: u64, op: TOp) -> Self {
        self.pending.insert(tx, op);
        let seq = self.events.len() as u64;
        self.events.push(Event {
            seq,
            tx: TxId(tx),
            kind: EventKind::Invoke { op },
        });
        self
    }

    pub fn res(mut self, tx: u64, result: OpResult) -> Self {
        let op = self.pending.remove(&tx).expect("pending op");
        let seq = self.events.len() as u64;
        self.events.push(Event {
            seq,
            tx: TxId(tx),
            kind: EventKind::Respond { op, result },
        });
        self
    }

    pub fn read(self, tx: u64, x: u32, v: i64) -> Self {
        self.inv(tx, TOp::Read { tobj: TObj(x) }).res(tx, OpResult::Value { value: v })
    }

    pub fn write(self, tx: u64, x: u32, v: i64) -> Self {
        self.inv(tx, TOp::Write { tobj: TObj(x), value: v }).res(tx, OpResult::Ok)
    }

    pub fn commit(self, tx: u64) -> Self {
        self.inv(tx, TOp::TryCommit).res(tx, OpResult::Commit)
    }

    pub fn abort(self, tx: u64) -> Self {
        self.inv(tx, TOp::TryCommit).res(
            tx,
            OpResult::Abort {
                class: AbortClass::Validation,
            },
        )
    }

    pub fn build(self) -> History {
        History {
            objects: vec![],
            events: self.events,
        }
    }
}

/// Random well-formed history over two t-objects with up to `max_txns`
/// transactions. Reads return plausible values often enough that both
/// verdicts occur.
pub fn random_history(seed: u64, max_txns: u32) -> History {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n = rng.random_range(1..=max_txns) as u64;
    let n_obj = 2u32;
    struct St {
        program: Vec<TOp>,
        next: usize,
        budget: usize,
        pending: Option<TOp>,
        done: bool,
    }
    let mut txs: BTreeMap<u64, St> = BTreeMap::new();
    for t in 1..=n {
        let len = rng.random_range(1..=3);
        let mut program: Vec<TOp> = (0..len)
            .map(|k| {
                let tobj = TObj(rng.random_range(0..n_obj));
                if rng.random_bool(0.5) {
                    TOp::Read { tobj }
                } else {
                    TOp::Write {
                        tobj,
                        value: (t * 10 + k) as i64,
                    }
                }
            })
            .collect();
        program.push(TOp::TryCommit);
        let full = 2 * program.len();
        let budget = if rng.random_bool(0.25) {
            rng.random_range(1..=full)
        } else {
            full
        };
        txs.insert(
            t,
            St {
                program,
                next: 0,
                budget,
                pending: None,
                done: false,
            },
        );
    }
    let written: Vec<(TObj, i64)> = txs
        .values()
        .flat_map(|s| s.program.iter())
        .filter_map(|op| match *op {
            TOp::Write { tobj, value } => Some((tobj, value)),
            _ => None,
        })
        .collect();
    let mut b = Builder::new();
    let mut own: BTreeMap<(u64, TObj), i64> = BTreeMap::new();
    loop {
        let live: Vec<u64> = txs.iter().filter(|(_, s)| !s.done && s.budget > 0).map(|(&t, _)| t).collect();
        if live.is_empty() {
            break;
        }
        let t = live[rng.random_range(0..live.len())];
        let st = txs.get_mut(&t).unwrap();
        st.budget -= 1;
        match st.pending.take() {
            None => {
                let op = st.program[st.next];
                st.next += 1;
                st.pending = Some(op);
                b = b.inv(t, op);
            }
            Some(op) => {
                let result = match op {
                    TOp::Read { tobj } => {
                        if rng.random_bool(0.1) {
                            OpResult::Abort {
                                class: AbortClass::Validation,
                            }
                        } else {
                            let value = match own.get(&(t, tobj)) {
                                Some(&v) if rng.random_bool(0.8) => v,
                                _ => {
                                    let cands: Vec<i64> = std::iter::once(0)
                                        .chain(written.iter().filter(|w| w.0 == tobj).map(|w| w.1))
                                        .collect();
                                    cands[rng.random_range(0..cands.len())]
                                }
                            };
                            OpResult::Value { value }
                        }
                    }
                    TOp::Write { tobj, value } => {
                        own.insert((t, tobj), value);
                        OpResult::Ok
                    }
                    TOp::TryCommit => {
                        if rng.random_bool(0.7) {
                            OpResult::Commit
                        } else {
                            OpResult::Abort {
                                class: AbortClass::Validation,
                            }
                        }
                    }
                };
                if result.is_abort() || result == OpResult::Commit {
                    st.done = true;
                }
                b = b.res(t, result);
            }
        }
    }
    b.build()
}
