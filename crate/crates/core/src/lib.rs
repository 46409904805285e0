//! Deterministic simulator and verification laboratory for hybrid
//! transactional memory.
//!
//! * [`memory`]: base objects, rmw primitives and the tracking-set model of
//!   hardware transactions.
//! * [`algorithms`]: the progressive, constant-instrumentation and naive HyTMs.
//! * [`runtime`] and [`schedule`]: deterministic interleaving and history recording.
//! * [`checker`]: opacity and strict serializability of finite histories.
//! * [`metrics`]: instrumentation cost and progress/invisible-read audits.
//! * [`scenario`]: scripted executions such as the uninstrumented-HyTM
//!   counterexample.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algorithms;
pub mod checker;
pub mod history;
pub mod memory;
pub mod metrics;
pub mod runtime;
pub mod scenario;
pub mod schedule;
pub mod types;

pub use algorithms::{Algorithm, Layout, TxCtx};
pub use checker::{check, check_opacity, check_strict_serializability, CheckError, Outcome, Property, Verdict};
pub use history::{AbortClass, Event, EventKind, History, OpResult, TOp, TxRecord, TxStatus};
pub use memory::{Memory, Primitive};
pub use runtime::{run_to_completion, Runtime, RuntimeError, ScheduleError, SimConfig};
pub use schedule::{gen_random_schedule, FuzzParams, Schedule, Step};
pub use types::{ObjId, ObjectKind, Path, ProcessId, TObj, TxId, Word};
pub use metrics::{audit_footprint, audit_invisible_reads, audit_progress, metadata_footprint, tx_metrics, Condition, TxMetrics};
pub use scenario::Scenario;
