//! Deterministic interleaving scripts and the seeded schedule generator.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::history::TOp;
use crate::types::{Path, ProcessId, TObj, TxId};

/// Name of the generator behind [`gen_random_schedule`], recorded in run
/// configs so logs stay portable.
pub const GENERATOR: &str = "xoshiro256++/splitmix64-seed";

/// One scheduler instruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    /// Starts transaction `tx` on `process`. The optional program feeds
    /// [`Step::Turn`].
    Begin {
        tx: TxId,
        process: ProcessId,
        path: Path,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        program: Vec<TOp>,
    },
    /// Invokes a t-operation.
    Issue { tx: TxId, op: TOp },
    /// Executes the next primitive of the pending t-operation of `tx`.
    Advance { tx: TxId },
    /// Advances `tx` until its pending t-operation responds.
    Finish { tx: TxId },
    /// Gives `tx` one step of its program: issue the next operation if none is
    /// pending, otherwise advance. No-op once `tx` is t-complete.
    Turn { tx: TxId },
    /// Named pause point; no effect on the run.
    Mark { label: String },
    /// Invalidates the tracking set of `process`, modelling a spurious abort.
    InjectAbort { process: ProcessId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, step: Step) -> &mut Self {
        self.steps.push(step);
        self
    }

    pub fn begin(&mut self, tx: u64, process: u32, path: Path) -> &mut Self {
        self.push(Step::Begin {
            tx: TxId(tx),
            process: ProcessId(process),
            path,
            program: Vec::new(),
        })
    }

    pub fn issue(&mut self, tx: u64, op: TOp) -> &mut Self {
        self.push(Step::Issue { tx: TxId(tx), op })
    }

    pub fn advance(&mut self, tx: u64, times: usize) -> &mut Self {
        for _ in 0..times {
            self.push(Step::Advance { tx: TxId(tx) });
        }
        self
    }

    pub fn mark(&mut self, label: &str) -> &mut Self {
        self.push(Step::Mark {
            label: label.into(),
        })
    }

    /// Issues `op` and runs it to its response.
    pub fn op(&mut self, tx: u64, op: TOp) -> &mut Self {
        self.issue(tx, op);
        self.push(Step::Finish { tx: TxId(tx) })
    }

    pub fn read(&mut self, tx: u64, x: u32) -> &mut Self {
        self.op(tx, TOp::Read { tobj: TObj(x) })
    }

    pub fn write(&mut self, tx: u64, x: u32, value: i64) -> &mut Self {
        self.op(tx, TOp::Write { tobj: TObj(x), value })
    }

    pub fn commit(&mut self, tx: u64) -> &mut Self {
        self.op(tx, TOp::TryCommit)
    }

    /// Index of the first `Mark` step with `label`.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.steps
            .iter()
            .position(|s| matches!(s, Step::Mark { label: l } if l == label))
    }
}

/// Parameters of a generated schedule.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzParams {
    pub seed: u64,
    pub n_txns: u32,
    pub n_tobjects: u32,
    pub ops_per_txn: u32,
    pub fast_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("fast_fraction must lie in [0, 1], got {0}")]
    FastFraction(f64),
}

/// Turns granted to each transaction: enough for every operation of its
/// program to be issued and run to its response under the runtime's step
/// budget. Surplus turns are no-ops.
fn turns_per_txn(p: &FuzzParams) -> usize {
    let data_set = p.ops_per_txn.min(p.n_tobjects) as usize;
    let per_op = 1 + 6 * data_set + 4;
    (p.ops_per_txn as usize + 1) * per_op
}

/// Seeded random schedule over `n_txns` transactions, each on its own
/// process, each running `ops_per_txn` random reads/writes followed by
/// `tryC`. Written values are unique per (transaction, position) and nonzero.
pub fn gen_random_schedule(p: FuzzParams) -> Result<Schedule, GenError> {
    for (name, v) in [
        ("n_txns", p.n_txns),
        ("n_tobjects", p.n_tobjects),
        ("ops_per_txn", p.ops_per_txn),
    ] {
        if v == 0 {
            return Err(GenError::NotPositive(name));
        }
    }
    if !(0.0..=1.0).contains(&p.fast_fraction) {
        return Err(GenError::FastFraction(p.fast_fraction));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(p.seed);
    let mut schedule = Schedule {
        steps: Vec::new(),
        seed: Some(p.seed),
    };
    for t in 1..=p.n_txns {
        let path = if rng.random::<f64>() < p.fast_fraction {
            Path::Fast
        } else {
            Path::Slow
        };
        let mut program: Vec<TOp> = (0..p.ops_per_txn)
            .map(|i| {
                let tobj = TObj(rng.random_range(0..p.n_tobjects));
                if rng.random_bool(0.5) {
                    TOp::Read { tobj }
                } else {
                    TOp::Write {
                        tobj,
                        value: i64::from(t) * 1000 + i64::from(i) + 1,
                    }
                }
            })
            .collect();
        program.push(TOp::TryCommit);
        schedule.push(Step::Begin {
            tx: TxId(u64::from(t)),
            process: ProcessId(t),
            path,
            program,
        });
    }
    let mut remaining: Vec<(u64, usize)> = (1..=u64::from(p.n_txns))
        .map(|t| (t, turns_per_txn(&p)))
        .collect();
    while !remaining.is_empty() {
        let i = rng.random_range(0..remaining.len());
        schedule.push(Step::Turn {
            tx: TxId(remaining[i].0),
        });
        remaining[i].1 -= 1;
        if remaining[i].1 == 0 {
            remaining.remove(i);
        }
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> FuzzParams {
        FuzzParams {
            seed,
            n_txns: 4,
            n_tobjects: 3,
            ops_per_txn: 3,
            fast_fraction: 0.5,
        }
    }

    #[test]
    fn same_seed_same_schedule() {
        assert_eq!(gen_random_schedule(params(11)), gen_random_schedule(params(11)));
        assert_ne!(gen_random_schedule(params(11)), gen_random_schedule(params(12)));
    }

    #[test]
    fn fast_fraction_extremes() {
        for (frac, want) in [(0.0, Path::Slow), (1.0, Path::Fast)] {
            let s = gen_random_schedule(FuzzParams {
                fast_fraction: frac,
                ..params(3)
            })
            .unwrap();
            for step in &s.steps {
                if let Step::Begin { path, .. } = step {
                    assert_eq!(*path, want);
                }
            }
        }
    }

    #[test]
    fn programs_end_in_try_commit() {
        let s = gen_random_schedule(params(5)).unwrap();
        let begins: Vec<_> = s
            .steps
            .iter()
            .filter_map(|st| match st {
                Step::Begin { program, .. } => Some(program),
                _ => None,
            })
            .collect();
        assert_eq!(begins.len(), 4);
        for p in begins {
            assert_eq!(p.len(), 4);
            assert_eq!(p.last(), Some(&TOp::TryCommit));
        }
    }

    #[test]
    fn invalid_parameters() {
        assert_eq!(
            gen_random_schedule(FuzzParams { n_txns: 0, ..params(1) }),
            Err(GenError::NotPositive("n_txns"))
        );
        assert!(matches!(
            gen_random_schedule(FuzzParams { fast_fraction: 1.5, ..params(1) }),
            Err(GenError::FastFraction(_))
        ));
    }
}
