//! Hand-over-hand finds with root-serialized updates.
//!
//! An update locks the root exclusively at invocation and keeps it to the
//! end; its traversal takes no further locks. At its first write it locks
//! every element it is about to write, all at once or not at all. A find
//! share-locks the root at invocation and then each node before reading it,
//! dropping every lock but the one on its current position afterwards.

use crate::model::{ElemRef, ElementId, EventKind, OpId, Operation, Response};
use crate::seqspec::{Action, OpCursor, ROOT};

use super::{read_events, write_events, LockMode, Shared, StepOutcome};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HohState {
    /// Locks in acquisition order.
    held: Vec<ElementId>,
    write_locked: bool,
}

impl HohState {
    pub(super) fn step(
        &mut self,
        me: OpId,
        op: &Operation,
        cursor: &mut OpCursor,
        invoked: &mut bool,
        shared: &mut Shared,
        out: &mut Vec<EventKind>,
    ) -> StepOutcome {
        let locks = &mut shared.locks;
        let store = &mut shared.store;
        if !*invoked {
            let mode = if op.is_update() { LockMode::Exclusive } else { LockMode::Shared };
            if !locks.acquire(ROOT, me, mode) {
                return StepOutcome::Blocked(ROOT);
            }
            self.held.push(ROOT);
            *invoked = true;
            out.push(EventKind::OpInvoke(*op));
            return StepOutcome::Progressed;
        }
        match cursor.action() {
            Action::Read(id) => {
                if !op.is_update() && !locks.holds(id, me) {
                    if !locks.acquire(id, me, LockMode::Shared) {
                        return StepOutcome::Blocked(id);
                    }
                    self.held.push(id);
                }
                let node = store.nodes[&id].clone();
                read_events(out, store.elem(id), Some(node.clone()));
                cursor.on_read(id, node, &mut || store.alloc());
                if !op.is_update() {
                    let keep = cursor.position();
                    for h in &self.held {
                        if Some(*h) != keep {
                            locks.release(*h, me);
                        }
                    }
                    self.held.retain(|h| Some(*h) == keep);
                }
                StepOutcome::Progressed
            }
            Action::Write(id, node) => {
                if !self.write_locked {
                    let targets = cursor.write_targets();
                    if let Err(busy) = locks.try_acquire_all(&targets, me) {
                        return StepOutcome::Blocked(busy);
                    }
                    for t in targets {
                        if !self.held.contains(&t) {
                            self.held.push(t);
                        }
                    }
                    self.write_locked = true;
                }
                write_events(out, ElemRef::new(id, node.key), node.clone());
                store.install(&[(id, node)]);
                cursor.on_write();
                StepOutcome::Progressed
            }
            Action::Respond(r) => {
                for h in self.held.drain(..).rev() {
                    locks.release(h, me);
                }
                out.push(EventKind::OpResponse(Response::Bool(r)));
                StepOutcome::Finished(r)
            }
        }
    }
}
