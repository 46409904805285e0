//! Scripted executions with a built-in assertion.
//!
//! Pause points are `Mark` steps, so a scenario can be read alongside the
//! execution it scripts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::algorithms::Algorithm;
use crate::checker::{check_strict_serializability, CheckError, Verdict, DEFAULT_TX_LIMIT};
use crate::history::{AbortClass, History, HistoryError, TxStatus};
use crate::memory::MemoryError;
use crate::metrics::{audit_progress, Condition};
use crate::runtime::{tx_label, Runtime, ScheduleError, SimConfig};
use crate::schedule::Schedule;
use crate::types::{Path, TObj, TxId, Word};

pub const NAMES: [&str; 6] = [
    "theorem1",
    "tset-abort-shared",
    "tset-abort-exclusive",
    "capacity",
    "alg1-fastwrite-rollback",
    "alg2-nonconflicting-abort",
];

/// What a scenario asserts about its execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    /// Strict serializability fails with exactly these transactions named.
    NotStrictlySerializable { involved: Vec<TxId> },
    Aborts { tx: TxId, class: AbortClass },
    /// `slow` aborts on a failed data cas after `fast` overwrote one of its
    /// targets; `restored` holds the expected final data words.
    RollsBack {
        slow: TxId,
        fast: TxId,
        restored: Vec<(TObj, Word)>,
    },
    /// `tx` aborts in a way sequential progress allows and progressiveness
    /// does not.
    SequentialOnly { tx: TxId },
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: SimConfig,
    pub schedule: Schedule,
    pub labels: BTreeMap<TxId, String>,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Malformed(#[from] HistoryError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub history: History,
    /// Whether the scenario's assertion held.
    pub holds: bool,
    pub details: Vec<String>,
    pub verdict: Option<Verdict>,
}

fn labels(pairs: &[(u64, &str)]) -> BTreeMap<TxId, String> {
    pairs.iter().map(|&(t, l)| (TxId(t), String::from(l))).collect()
}

fn theorem1() -> Scenario {
    const X: u32 = 0;
    const Y: u32 = 1;
    const Z: u32 = 2;
    const NV: i64 = 1;
    let mut s = Schedule::new();
    s.begin(1, 1, Path::Slow)
        .read(1, Z)
        .write(1, X, NV)
        .write(1, Y, NV)
        .issue(1, crate::history::TOp::TryCommit)
        .mark("E'");
    s.begin(2, 2, Path::Fast).write(2, Z, NV).commit(2);
    s.begin(3, 3, Path::Fast).read(3, Y).commit(3);
    // T0's first data write; afterwards X holds nv and Y still v
    s.mark("e").advance(1, 1);
    s.begin(4, 4, Path::Fast).read(4, X).commit(4);
    Scenario {
        name: "theorem1",
        summary: "uninstrumented HyTM: slow writer paused between its data writes, three fast transactions",
        config: SimConfig::new(Algorithm::Naive, 3),
        schedule: s,
        labels: labels(&[(1, "T0"), (2, "T_z"), (3, "T_x"), (4, "T_y")]),
        expect: Expectation::NotStrictlySerializable {
            involved: alloc::vec![TxId(1), TxId(2), TxId(3), TxId(4)],
        },
    }
}

fn tset_abort_shared() -> Scenario {
    let mut s = Schedule::new();
    s.begin(2, 2, Path::Fast).read(2, 0).mark("E");
    s.begin(1, 1, Path::Slow).write(1, 0, 5).commit(1);
    s.commit(2);
    Scenario {
        name: "tset-abort-shared",
        summary: "fast reader holds b shared; a slow writer's nontrivial access invalidates it",
        config: SimConfig::new(Algorithm::Progressive, 1),
        schedule: s,
        labels: BTreeMap::new(),
        expect: Expectation::Aborts {
            tx: TxId(2),
            class: AbortClass::TrackingSet,
        },
    }
}

fn tset_abort_exclusive() -> Scenario {
    let mut s = Schedule::new();
    s.begin(2, 2, Path::Fast).write(2, 0, 5).mark("E");
    s.begin(1, 1, Path::Slow).read(1, 0).commit(1);
    s.commit(2);
    Scenario {
        name: "tset-abort-exclusive",
        summary: "fast writer holds b exclusive; a slow reader's access invalidates it",
        config: SimConfig::new(Algorithm::Progressive, 1),
        schedule: s,
        labels: BTreeMap::new(),
        expect: Expectation::Aborts {
            tx: TxId(2),
            class: AbortClass::TrackingSet,
        },
    }
}

fn capacity() -> Scenario {
    let mut s = Schedule::new();
    s.begin(1, 1, Path::Fast);
    for j in 0..5 {
        s.read(1, j);
    }
    Scenario {
        name: "capacity",
        summary: "fast transaction reads five objects with a tracking set of four",
        config: SimConfig::new(Algorithm::Naive, 5).with_capacity(4),
        schedule: s,
        labels: BTreeMap::new(),
        expect: Expectation::Aborts {
            tx: TxId(1),
            class: AbortClass::Capacity,
        },
    }
}

fn alg1_fastwrite_rollback() -> Scenario {
    let mut s = Schedule::new();
    s.begin(1, 1, Path::Slow)
        .write(1, 0, 1)
        .write(1, 1, 2)
        .issue(1, crate::history::TOp::TryCommit);
    // lock r0, lock r1, cas v0
    s.advance(1, 3).mark("after-first-data-cas");
    s.begin(2, 2, Path::Fast).write(2, 1, 7).commit(2);
    s.push(crate::schedule::Step::Finish { tx: TxId(1) });
    Scenario {
        name: "alg1-fastwrite-rollback",
        summary: "uninstrumented fast write lands between a slow commit's data cas steps",
        config: SimConfig::new(Algorithm::Progressive, 2),
        schedule: s,
        labels: BTreeMap::new(),
        expect: Expectation::RollsBack {
            slow: TxId(1),
            fast: TxId(2),
            restored: alloc::vec![(TObj(0), Word::ZERO), (TObj(1), Word::new(7, 2))],
        },
    }
}

fn alg2_nonconflicting_abort() -> Scenario {
    let mut s = Schedule::new();
    s.begin(2, 2, Path::Fast).read(2, 0);
    s.begin(1, 1, Path::Slow).write(1, 1, 5).commit(1);
    s.commit(2);
    Scenario {
        name: "alg2-nonconflicting-abort",
        summary: "slow writer on X1 bumps the counter and aborts a fast reader of X0",
        config: SimConfig::new(Algorithm::Constant, 2),
        schedule: s,
        labels: BTreeMap::new(),
        expect: Expectation::SequentialOnly { tx: TxId(2) },
    }
}

pub fn by_name(name: &str) -> Result<Scenario, ScenarioError> {
    Ok(match name {
        "theorem1" => theorem1(),
        "tset-abort-shared" => tset_abort_shared(),
        "tset-abort-exclusive" => tset_abort_exclusive(),
        "capacity" => capacity(),
        "alg1-fastwrite-rollback" => alg1_fastwrite_rollback(),
        "alg2-nonconflicting-abort" => alg2_nonconflicting_abort(),
        other => return Err(ScenarioError::Unknown(other.into())),
    })
}

fn status_of(h: &History, tx: TxId) -> Result<Option<TxStatus>, HistoryError> {
    Ok(h.transactions()?.iter().find(|r| r.id == tx).map(|r| r.status()))
}

impl Scenario {
    pub fn label(&self, tx: TxId) -> String {
        tx_label(&self.labels, tx)
    }

    /// Runs the script and evaluates its assertion.
    pub fn run(&self) -> Result<ScenarioReport, ScenarioError> {
        let mut rt = Runtime::new(self.config).map_err(|source| ScheduleError { step: 0, source })?;
        rt.run(&self.schedule)?;
        let mut details = Vec::new();
        let mut verdict = None;
        let h = rt.history();
        let holds = match &self.expect {
            Expectation::NotStrictlySerializable { involved } => {
                let v = check_strict_serializability(h, DEFAULT_TX_LIMIT)?;
                let named: Vec<TxId> = v.involved().into_iter().collect();
                let holds = !v.passed() && &named == involved;
                details.push(format!(
                    "verdict: {}; involved: {}",
                    if v.passed() { "strictly serializable" } else { "NOT strictly serializable" },
                    named.iter().map(|&t| self.label(t)).collect::<Vec<_>>().join(", ")
                ));
                verdict = Some(v);
                holds
            }
            Expectation::Aborts { tx, class } => {
                let got = status_of(h, *tx)?;
                details.push(format!("{}: {:?}", self.label(*tx), got));
                got == Some(TxStatus::Aborted(*class))
            }
            Expectation::RollsBack {
                slow,
                fast,
                restored,
            } => {
                let s = status_of(h, *slow)?;
                let f = status_of(h, *fast)?;
                details.push(format!("{}: {:?}, {}: {:?}", self.label(*slow), s, self.label(*fast), f));
                let mut ok = s == Some(TxStatus::Aborted(AbortClass::CasFailure))
                    && f == Some(TxStatus::Committed);
                let layout = *rt.layout();
                for &(x, want) in restored {
                    let got = rt.memory().value(layout.data(x))?;
                    details.push(format!("{}: {got}", rt.memory().object(layout.data(x))?.name));
                    ok &= got == want;
                }
                for j in 0..layout.n_tobjects {
                    ok &= rt.memory().value(layout.lock(TObj(j)))? == Word::ZERO;
                }
                ok
            }
            Expectation::SequentialOnly { tx } => {
                let aborted = matches!(status_of(h, *tx)?, Some(TxStatus::Aborted(_)));
                let prog = audit_progress(h, Condition::Progressive, None)?;
                let seq = audit_progress(h, Condition::Sequential, None)?;
                details.push(format!(
                    "{}: progressive violations {}, sequential violations {}",
                    self.label(*tx),
                    prog.len(),
                    seq.len()
                ));
                aborted && prog.iter().any(|v| v.tx == *tx) && seq.is_empty()
            }
        };
        Ok(ScenarioReport {
            history: rt.into_history(),
            holds,
            details,
            verdict,
        })
    }
}
