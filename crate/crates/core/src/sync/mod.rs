//! Synchronized executions of the sequential cursors.
//!
//! A [`StepMachine`] wraps one operation instance. Each call to
//! [`StepMachine::step`] performs exactly one schedule slot: the invocation,
//! one read, one write or the response. Lock and version bookkeeping happen
//! inside a step and occupy no slot.

pub mod hoh;
pub mod locks;
pub mod stm;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ElemRef, ElementId, EventKind, Key, Node, OpId, Operation, ProcId, Role, SlotKind};
use crate::seqspec::{Action, DagState, OpCursor, StructureDef};

pub use locks::{LockManager, LockMode};
pub use stm::Validation;

/// Shared memory: node contents plus a version per element, stamped from a
/// global commit counter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VersionStore {
    pub nodes: BTreeMap<ElementId, Node>,
    pub versions: BTreeMap<ElementId, u64>,
    pub clock: u64,
    pub next_id: u32,
    pub tail: Option<ElementId>,
}

impl VersionStore {
    pub fn from_state(g: &DagState) -> Self {
        VersionStore {
            nodes: g.nodes.clone(),
            versions: g.nodes.keys().map(|id| (*id, 0)).collect(),
            clock: 0,
            next_id: g.next_id,
            tail: g.tail,
        }
    }

    pub fn alloc(&mut self) -> ElementId {
        let id = ElementId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn version(&self, id: ElementId) -> u64 {
        self.versions.get(&id).copied().unwrap_or(0)
    }

    pub fn key_of(&self, id: ElementId) -> Key {
        self.nodes.get(&id).map_or(Key::PosInf, |n| n.key)
    }

    pub fn elem(&self, id: ElementId) -> ElemRef {
        ElemRef::new(id, self.key_of(id))
    }

    /// Installs writes under a fresh commit timestamp.
    pub fn install(&mut self, writes: &[(ElementId, Node)]) {
        self.clock += 1;
        for (id, n) in writes {
            self.nodes.insert(*id, n.clone());
            self.versions.insert(*id, self.clock);
        }
    }

    pub fn state(&self) -> DagState {
        DagState { nodes: self.nodes.clone(), root: crate::seqspec::ROOT, tail: self.tail, next_id: self.next_id }
    }
}

/// Everything the machines share.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shared {
    pub store: VersionStore,
    pub locks: LockManager,
}

impl Shared {
    pub fn new(g: &DagState) -> Self {
        Shared { store: VersionStore::from_state(g), locks: LockManager::new() }
    }
}

/// A synchronization technique.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Impl {
    /// Hand-over-hand finds, root-serialized updates.
    Hoh,
    /// Lazy-write optimistic store with version validation.
    Stm(Validation),
    /// No synchronization at all; reads and writes act on memory in place.
    Bare,
}

impl Impl {
    pub fn by_name(name: &str) -> Result<Impl> {
        match name {
            "hoh" => Ok(Impl::Hoh),
            "stm" => Ok(Impl::Stm(Validation::PerRead)),
            "stm-commit-only" => Ok(Impl::Stm(Validation::CommitOnly)),
            "bare" => Ok(Impl::Bare),
            other => Err(Error::Input(format!("unknown implementation `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Impl::Hoh => "hoh",
            Impl::Stm(Validation::PerRead) => "stm",
            Impl::Stm(Validation::CommitOnly) => "stm-commit-only",
            Impl::Bare => "bare",
        }
    }
}

impl fmt::Display for Impl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Progressed,
    Blocked(ElementId),
    Aborted(String),
    Finished(bool),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Sync {
    Hoh(hoh::HohState),
    Stm(stm::StmState),
    Bare,
}

/// One attempt of one operation instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepMachine {
    pub proc: ProcId,
    pub id: OpId,
    pub op: Operation,
    def: StructureDef,
    cursor: OpCursor,
    invoked: bool,
    done: bool,
    sync: Sync,
}

impl StepMachine {
    pub fn new(imp: Impl, def: StructureDef, proc: ProcId, id: OpId, op: Operation) -> Self {
        let sync = match imp {
            Impl::Hoh => Sync::Hoh(hoh::HohState::default()),
            Impl::Stm(v) => Sync::Stm(stm::StmState::new(v)),
            Impl::Bare => Sync::Bare,
        };
        StepMachine { proc, id, op, def, cursor: OpCursor::new(def, op), invoked: false, done: false, sync }
    }

    /// A fresh attempt of the same operation under a new identity.
    pub fn restart(&self, id: OpId) -> Self {
        let imp = match &self.sync {
            Sync::Hoh(_) => Impl::Hoh,
            Sync::Stm(s) => Impl::Stm(s.validation),
            Sync::Bare => Impl::Bare,
        };
        StepMachine::new(imp, self.def, self.proc, id, self.op)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_invoked(&self) -> bool {
        self.invoked
    }

    pub fn cursor(&self) -> &OpCursor {
        &self.cursor
    }

    /// Kind and element role of the next step.
    pub fn peek(&self, store: &VersionStore) -> (SlotKind, Option<Role>) {
        if !self.invoked {
            return (SlotKind::Invoke, None);
        }
        match self.cursor.action() {
            Action::Read(id) => (SlotKind::Read, Some(store.elem(id).role)),
            Action::Write(_, n) => (SlotKind::Write, Some(Role::of_key(n.key))),
            Action::Respond(_) => (SlotKind::Respond, None),
        }
    }

    /// Performs one step, appending the emitted events to `out`.
    pub fn step(&mut self, shared: &mut Shared, out: &mut Vec<EventKind>) -> StepOutcome {
        assert!(!self.done, "step of a finished operation");
        let outcome = match &mut self.sync {
            Sync::Hoh(h) => h.step(self.id, &self.op, &mut self.cursor, &mut self.invoked, shared, out),
            Sync::Stm(s) => s.step(&self.op, &mut self.cursor, &mut self.invoked, &mut shared.store, out),
            Sync::Bare => bare_step(&self.op, &mut self.cursor, &mut self.invoked, &mut shared.store, out),
        };
        if matches!(outcome, StepOutcome::Finished(_) | StepOutcome::Aborted(_)) {
            self.done = true;
        }
        outcome
    }

    /// Releases anything this machine holds or waits for.
    pub fn abandon(&self, shared: &mut Shared) {
        for e in shared.locks.held_by(self.id) {
            shared.locks.release(e, self.id);
        }
        shared.locks.forget(self.id);
    }
}

pub(crate) fn read_events(out: &mut Vec<EventKind>, elem: ElemRef, node: Option<Node>) {
    out.push(EventKind::ReadInvoke(elem.clone()));
    out.push(EventKind::ReadResponse(elem, node));
}

pub(crate) fn write_events(out: &mut Vec<EventKind>, elem: ElemRef, node: Node) {
    out.push(EventKind::WriteInvoke(elem.clone(), node));
    out.push(EventKind::WriteResponse(elem, true));
}

fn bare_step(
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
            let node = store.nodes[&id].clone();
            read_events(out, store.elem(id), Some(node.clone()));
            cursor.on_read(id, node, &mut || store.alloc());
            StepOutcome::Progressed
        }
        Action::Write(id, node) => {
            write_events(out, ElemRef::new(id, node.key), node.clone());
            store.install(&[(id, node)]);
            cursor.on_write();
            StepOutcome::Progressed
        }
        Action::Respond(r) => {
            out.push(EventKind::OpResponse(crate::model::Response::Bool(r)));
            StepOutcome::Finished(r)
        }
    }
}
