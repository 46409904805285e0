//! Slow path shared by the progressive and constant algorithms.
//!
//! The only difference between the two is the optional fetch-and-add
//! `counter`: it is incremented right after a successful acquire and
//! decremented whenever locks taken after that increment are released.

use alloc::vec::Vec;

use super::{abort, value, Layout, Port, TxCtx, WriteEntry, Yield};
use crate::history::{AbortClass, OpResult, TOp};
use crate::memory::Primitive;
use crate::types::{ObjId, TObj, Word};

pub(super) fn execute(
    layout: &Layout,
    counter: Option<ObjId>,
    tx: &mut TxCtx,
    op: TOp,
    port: &mut dyn Port,
) -> Result<OpResult, Yield> {
    match op {
        TOp::Read { tobj } => read(layout, tx, tobj, port),
        TOp::Write { tobj, value } => write(layout, tx, tobj, value, port),
        TOp::TryCommit => try_commit(layout, counter, tx, port),
    }
}

fn read(layout: &Layout, tx: &mut TxCtx, x: TObj, port: &mut dyn Port) -> Result<OpResult, Yield> {
    if let Some(w) = tx.wset.get(&x) {
        return value(w.new);
    }
    if let Some(seen) = tx.rset.get(&x) {
        return value(seen.val);
    }
    let seen = port.direct(layout.data(x), Primitive::Read)?;
    tx.rset.insert(x, seen);
    if port.direct(layout.lock(x), Primitive::Read)?.val != 0 {
        return abort(AbortClass::LockObserved);
    }
    if !validate(layout, tx, port)? {
        return abort(AbortClass::Validation);
    }
    value(seen.val)
}

fn write(
    layout: &Layout,
    tx: &mut TxCtx,
    x: TObj,
    v: i64,
    port: &mut dyn Port,
) -> Result<OpResult, Yield> {
    let old = port.direct(layout.data(x), Primitive::Read)?;
    tx.buffer_write(x, WriteEntry { old, new: v });
    Ok(OpResult::Ok)
}

/// Re-reads every data object in the read set, in ascending t-object order.
fn validate(layout: &Layout, tx: &TxCtx, port: &mut dyn Port) -> Result<bool, Yield> {
    for (&x, &seen) in &tx.rset {
        if port.direct(layout.data(x), Primitive::Read)? != seen {
            return Ok(false);
        }
    }
    Ok(true)
}

fn is_abortable(layout: &Layout, tx: &TxCtx, port: &mut dyn Port) -> Result<Option<AbortClass>, Yield> {
    for &x in tx.rset.keys().filter(|x| !tx.wset.contains_key(x)) {
        if port.direct(layout.lock(x), Primitive::Read)?.val != 0 {
            return Ok(Some(AbortClass::LockObserved));
        }
    }
    if !validate(layout, tx, port)? {
        return Ok(Some(AbortClass::Validation));
    }
    Ok(None)
}

const UNLOCKED: Word = Word::plain(0);
const LOCKED: Word = Word::plain(1);

fn release(
    layout: &Layout,
    counter: Option<ObjId>,
    tx: &mut TxCtx,
    port: &mut dyn Port,
) -> Result<(), Yield> {
    let held: Vec<TObj> = tx.lset.iter().copied().collect();
    for x in held {
        port.direct(layout.lock(x), Primitive::Write { value: UNLOCKED })?;
    }
    if let Some(fa) = counter {
        port.direct(fa, Primitive::FetchAdd { delta: -1 })?;
    }
    tx.lset.clear();
    Ok(())
}

/// Takes every write-set lock in ascending order. On failure the locks taken
/// so far are released and `false` is returned.
fn acquire(layout: &Layout, tx: &mut TxCtx, port: &mut dyn Port) -> Result<bool, Yield> {
    let wanted: Vec<TObj> = tx.wset.keys().copied().collect();
    for x in wanted {
        let cas = Primitive::Cas {
            expected: UNLOCKED,
            new: LOCKED,
        };
        let prior = port.direct(layout.lock(x), cas)?;
        if cas.succeeded(prior) {
            tx.lset.insert(x);
        } else {
            // the counter has not been incremented yet
            release(layout, None, tx, port)?;
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rolls back the data objects already overwritten. A rollback cas that fails
/// means a fast-path writer has since replaced the value; it is skipped.
fn undo(layout: &Layout, tx: &mut TxCtx, port: &mut dyn Port) -> Result<(), Yield> {
    let written: Vec<TObj> = tx.oset.iter().copied().collect();
    for x in written {
        let entry = tx.wset[&x];
        port.direct(
            layout.data(x),
            Primitive::Cas {
                expected: tx.tag(entry.new),
                new: entry.old,
            },
        )?;
    }
    Ok(())
}

fn try_commit(
    layout: &Layout,
    counter: Option<ObjId>,
    tx: &mut TxCtx,
    port: &mut dyn Port,
) -> Result<OpResult, Yield> {
    if tx.wset.is_empty() {
        return Ok(OpResult::Commit);
    }
    if !acquire(layout, tx, port)? {
        return abort(AbortClass::LockObserved);
    }
    if let Some(fa) = counter {
        port.direct(fa, Primitive::FetchAdd { delta: 1 })?;
    }
    if let Some(class) = is_abortable(layout, tx, port)? {
        release(layout, counter, tx, port)?;
        return abort(class);
    }
    let writes: Vec<(TObj, WriteEntry)> = tx.wset.iter().map(|(&x, &e)| (x, e)).collect();
    for (x, entry) in writes {
        let cas = Primitive::Cas {
            expected: entry.old,
            new: tx.tag(entry.new),
        };
        let prior = port.direct(layout.data(x), cas)?;
        if cas.succeeded(prior) {
            tx.oset.insert(x);
        } else {
            undo(layout, tx, port)?;
            release(layout, counter, tx, port)?;
            return abort(AbortClass::CasFailure);
        }
    }
    release(layout, counter, tx, port)?;
    Ok(OpResult::Commit)
}
