//! Strawman HyTM without any metadata: slow-path commits write their
//! buffered values directly, one per step, with neither locks nor
//! validation.

use super::{abort, cache_commit, cached_abort, fast_write, value, Layout, Port, TxCtx, WriteEntry, Yield};
use crate::history::{OpResult, TOp};
use crate::memory::{CachedOutcome, Primitive};
use crate::types::Word;

pub(super) fn slow(
    layout: &Layout,
    tx: &mut TxCtx,
    op: TOp,
    port: &mut dyn Port,
) -> Result<OpResult, Yield> {
    match op {
        TOp::Read { tobj } => {
            if let Some(w) = tx.wset.get(&tobj) {
                return value(w.new);
            }
            let seen = port.direct(layout.data(tobj), Primitive::Read)?;
            tx.rset.entry(tobj).or_insert(seen);
            value(seen.val)
        }
        TOp::Write { tobj, value } => {
            tx.buffer_write(tobj, WriteEntry { old: Word::ZERO, new: value });
            Ok(OpResult::Ok)
        }
        TOp::TryCommit => {
            for i in 0..tx.write_order.len() {
                let x = tx.write_order[i];
                let new = tx.tag(tx.wset[&x].new);
                port.direct(layout.data(x), Primitive::Write { value: new })?;
            }
            Ok(OpResult::Commit)
        }
    }
}

pub(super) fn fast(
    layout: &Layout,
    tx: &mut TxCtx,
    op: TOp,
    port: &mut dyn Port,
) -> Result<OpResult, Yield> {
    match op {
        TOp::Read { tobj } => match port.cached(layout.data(tobj), Primitive::Read)? {
            CachedOutcome::Value { value: seen } => {
                tx.rset.entry(tobj).or_insert(seen);
                value(seen.val)
            }
            other => abort(cached_abort(other).unwrap()),
        },
        TOp::Write { tobj, value } => fast_write(layout, tx, tobj, value, port),
        TOp::TryCommit => cache_commit(port),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{memory, Direct};
    use super::super::Algorithm;
    use super::*;
    use crate::types::{Path, ProcessId, TObj, TxId};

    #[test]
    fn slow_commit_writes_in_invocation_order() {
        let layout = Layout::new(Algorithm::Naive, 3);
        let mut mem = memory(&layout, 64);
        let mut tx = TxCtx::new(TxId(1), ProcessId(1), Path::Slow);
        let mut port = Direct::new(&mut mem, ProcessId(1));
        for (x, v) in [(2, 5), (0, 6), (2, 7)] {
            slow(&layout, &mut tx, TOp::Write { tobj: TObj(x), value: v }, &mut port).unwrap();
        }
        assert!(port.log.is_empty());
        assert_eq!(slow(&layout, &mut tx, TOp::TryCommit, &mut port), Ok(OpResult::Commit));
        let order: alloc::vec::Vec<u32> = port.log.iter().map(|(o, _)| o.0).collect();
        assert_eq!(order, [2, 0]);
        assert_eq!(mem.value(layout.data(TObj(2))), Ok(Word::new(7, 1)));
    }
}
