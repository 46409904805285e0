//! Fast path of the progressive algorithm: every read also reads the lock
//! bit of its t-object; writes touch data objects only.

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
            let seen = match port.cached(layout.data(tobj), Primitive::Read)? {
                CachedOutcome::Value { value } => value,
                other => return abort(cached_abort(other).unwrap()),
            };
            tx.rset.entry(tobj).or_insert(seen);
            match port.cached(layout.lock(tobj), Primitive::Read)? {
                CachedOutcome::Value { value } if value.val != 0 => abort(AbortClass::LockObserved),
                CachedOutcome::Value { .. } => value(seen.val),
                other => abort(cached_abort(other).unwrap()),
            }
        }
        TOp::Write { tobj, value } => fast_write(layout, tx, tobj, value, port),
        TOp::TryCommit => cache_commit(port),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{memory, Direct};
    use super::super::Algorithm;
    use super::*;
    use crate::memory::CommitOutcome;
    use crate::types::{Path, ProcessId, TObj, TxId, Word};
    use alloc::collections::BTreeSet;

    #[test]
    fn read_only_transaction_touches_one_lock_per_read() {
        let layout = Layout::new(Algorithm::Progressive, 8);
        for m in 1..=8u32 {
            let mut mem = memory(&layout, 64);
            mem.begin_hardware(ProcessId(2));
            let mut tx = TxCtx::new(TxId(1), ProcessId(2), Path::Fast);
            let mut port = Direct::new(&mut mem, ProcessId(2));
            for j in 0..m {
                let r = fast(&layout, &mut tx, TOp::Read { tobj: TObj(j) }, &mut port);
                assert_eq!(r, Ok(OpResult::Value { value: 0 }));
            }
            assert_eq!(fast(&layout, &mut tx, TOp::TryCommit, &mut port), Ok(OpResult::Commit));
            let locks: BTreeSet<_> = port
                .log
                .iter()
                .filter(|(o, _)| o.0 >= layout.n_tobjects)
                .map(|(o, _)| *o)
                .collect();
            assert_eq!(locks.len(), m as usize);
        }
    }

    #[test]
    fn writes_are_uninstrumented() {
        let layout = Layout::new(Algorithm::Progressive, 3);
        let mut mem = memory(&layout, 64);
        mem.begin_hardware(ProcessId(2));
        let mut tx = TxCtx::new(TxId(4), ProcessId(2), Path::Fast);
        let mut port = Direct::new(&mut mem, ProcessId(2));
        for j in 0..3 {
            let r = fast(&layout, &mut tx, TOp::Write { tobj: TObj(j), value: 10 + j as i64 }, &mut port);
            assert_eq!(r, Ok(OpResult::Ok));
        }
        assert!(port.log.iter().all(|(o, _)| o.0 < 3));
        assert_eq!(fast(&layout, &mut tx, TOp::TryCommit, &mut port), Ok(OpResult::Commit));
        assert_eq!(mem.value(layout.data(TObj(2))), Ok(Word::new(12, 4)));
    }

    #[test]
    fn locked_object_aborts_fast_read() {
        let layout = Layout::new(Algorithm::Progressive, 1);
        let mut mem = memory(&layout, 64);
        mem.apply_direct(ProcessId(1), layout.lock(TObj(0)), Primitive::Write { value: Word::plain(1) })
            .unwrap();
        mem.begin_hardware(ProcessId(2));
        let mut tx = TxCtx::new(TxId(2), ProcessId(2), Path::Fast);
        let mut port = Direct::new(&mut mem, ProcessId(2));
        assert_eq!(
            fast(&layout, &mut tx, TOp::Read { tobj: TObj(0) }, &mut port),
            Ok(OpResult::Abort { class: AbortClass::LockObserved })
        );
    }

    #[test]
    fn commit_after_invalidation_aborts() {
        let layout = Layout::new(Algorithm::Progressive, 1);
        let mut mem = memory(&layout, 64);
        mem.begin_hardware(ProcessId(2));
        let mut tx = TxCtx::new(TxId(2), ProcessId(2), Path::Fast);
        {
            let mut port = Direct::new(&mut mem, ProcessId(2));
            fast(&layout, &mut tx, TOp::Read { tobj: TObj(0) }, &mut port).unwrap();
        }
        mem.apply_direct(ProcessId(1), layout.lock(TObj(0)), Primitive::Cas {
            expected: Word::plain(0),
            new: Word::plain(1),
        })
        .unwrap();
        assert_eq!(mem.cache_commit(ProcessId(2)), CommitOutcome::TrackingSetAbort);
    }
}
