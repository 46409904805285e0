//! Fast path of the constant-instrumentation algorithm: the first read of a
//! transaction reads the global counter and aborts if any updating slow-path
//! commit is in flight. Later reads and all writes touch data objects only;
//! an increment of the counter invalidates the tracking set.

use super::{abort, cache_commit, cached_abort, fast_write, value, Layout, Port, TxCtx, Yield};
use crate::history::{AbortClass, OpResult, TOp};
use crate::memory::{CachedOutcome, Primitive};

pub(super) fn fast(
    layout: &Layout,
    tx: &mut TxCtx,
    op: TOp,
    port: &mut dyn Port,
) -> Result<OpResult, Yield> {
    match op {
        TOp::Read { tobj } => {
            if tx.rset.is_empty() {
                match port.cached(layout.counter(), Primitive::Read)? {
                    CachedOutcome::Value { value } if value.val != 0 => {
                        return abort(AbortClass::LockObserved)
                    }
                    CachedOutcome::Value { .. } => {}
                    other => return abort(cached_abort(other).unwrap()),
                }
            }
            match port.cached(layout.data(tobj), Primitive::Read)? {
                CachedOutcome::Value { value: seen } => {
                    tx.rset.entry(tobj).or_insert(seen);
                    value(seen.val)
                }
                other => abort(cached_abort(other).unwrap()),
            }
        }
        TOp::Write { tobj, value } => fast_write(layout, tx, tobj, value, port),
        TOp::TryCommit => cache_commit(port),
    }
}
