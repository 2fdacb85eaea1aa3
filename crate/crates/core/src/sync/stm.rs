//! Optimistic execution with buffered writes.
//!
//! Every read records the version it saw. With per-read validation the
//! whole read set is revalidated after each read, so an operation only ever
//! observes a consistent committed snapshot. Commit happens at the response
//! step: updates revalidate and install their write set under one fresh
//! timestamp. A failed validation shows up as a read returning ⊥ followed by
//! an abort response.

use std::collections::BTreeMap;

use crate::model::{ElemRef, ElementId, EventKind, Node, Operation, Response};
use crate::seqspec::{Action, OpCursor};

use super::{read_events, write_events, StepOutcome, VersionStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Validation {
    PerRead,
    /// Only commits validate. Reads may observe states no serial execution
    /// produces.
    CommitOnly,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StmState {
    pub validation: Validation,
    reads: BTreeMap<ElementId, u64>,
    writes: Vec<(ElementId, Node)>,
}

impl StmState {
    pub fn new(validation: Validation) -> Self {
        StmState { validation, reads: BTreeMap::new(), writes: Vec::new() }
    }

    fn first_invalid(&self, store: &VersionStore) -> Option<ElementId> {
        self.reads.iter().find(|(e, v)| store.version(**e) != **v).map(|(e, _)| *e)
    }

    fn abort(out: &mut Vec<EventKind>, elem: ElemRef) -> StepOutcome {
        let why = format!("conflict on {}", elem.role);
        read_events(out, elem, None);
        out.push(EventKind::OpResponse(Response::Abort));
        StepOutcome::Aborted(why)
    }

    pub(super) fn step(
        &mut self,
        op: &Operation,
        cursor: &mut OpCursor,
        invoked: &mut bool,
        store: &mut VersionStore,
        out: &mut Vec<EventKind>,
    ) -> StepOutcome {
        if !*invoked {
            *invoked = true;
            out.push(EventKind::OpInvoke(*op));
            return StepOutcome::Progressed;
        }
        match cursor.action() {
            Action::Read(id) => {
                let own = self.writes.iter().rev().find(|w| w.0 == id).map(|w| w.1.clone());
                let node = match own {
                    Some(n) => n,
                    None => {
                        self.reads.entry(id).or_insert(store.version(id));
                        store.nodes[&id].clone()
                    }
                };
                if self.validation == Validation::PerRead && self.first_invalid(store).is_some() {
                    return Self::abort(out, store.elem(id));
                }
                read_events(out, store.elem(id), Some(node.clone()));
                cursor.on_read(id, node, &mut || store.alloc());
                StepOutcome::Progressed
            }
            Action::Write(id, node) => {
                write_events(out, ElemRef::new(id, node.key), node.clone());
                self.writes.push((id, node));
                cursor.on_write();
                StepOutcome::Progressed
            }
            Action::Respond(r) => {
                if op.is_update() || self.validation == Validation::CommitOnly {
                    if let Some(bad) = self.first_invalid(store) {
                        return Self::abort(out, store.elem(bad));
                    }
                }
                if !self.writes.is_empty() {
                    store.install(&self.writes);
                }
                out.push(EventKind::OpResponse(Response::Bool(r)));
                StepOutcome::Finished(r)
            }
        }
    }
}
