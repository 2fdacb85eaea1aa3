use std::collections::{BTreeMap, BTreeSet};

use crate::model::{ElementId, Key, Node, OpName, Operation};

use super::{StructureDef, ROOT};

/// The next thing a suspended operation wants to do.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Read(ElementId),
    Write(ElementId, Node),
    Respond(bool),
}

/// One sequential operation, resumable one element access at a time.
///
/// The cursor keeps the nodes it has read (its `G_op`) and recomputes the
/// traversal over them after every read, so it never needs the shared
/// state. Writes are planned from the same snapshot once the traversal
/// stops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpCursor {
    def: StructureDef,
    op: Operation,
    seen: BTreeMap<ElementId, Node>,
    phase: Phase,
    last_read: Option<ElementId>,
    hold: Option<ElementId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Phase {
    Reading(ElementId),
    Writing { writes: Vec<(ElementId, Node)>, next: usize, response: bool },
    Done(bool),
}

enum Probe {
    Need(ElementId),
    Stop(Outcome),
}

/// Where a traversal ended.
enum Outcome {
    List { pred: ElementId, succ: ElementId },
    Skip { preds: Vec<ElementId>, succs: Vec<ElementId> },
    Bst { parent: ElementId, dir: usize, node: Option<ElementId>, succ: Option<(ElementId, ElementId)> },
    /// The snapshot is not a valid structure (a node was met twice).
    Broken,
}

impl OpCursor {
    pub fn new(def: StructureDef, op: Operation) -> Self {
        OpCursor { def, op, seen: BTreeMap::new(), phase: Phase::Reading(ROOT), last_read: None, hold: None }
    }

    pub fn op(&self) -> &Operation {
        &self.op
    }

    pub fn action(&self) -> Action {
        match &self.phase {
            Phase::Reading(id) => Action::Read(*id),
            Phase::Writing { writes, next, .. } => {
                let (id, n) = &writes[*next];
                Action::Write(*id, n.clone())
            }
            Phase::Done(r) => Action::Respond(*r),
        }
    }

    pub fn is_traversing(&self) -> bool {
        matches!(self.phase, Phase::Reading(_))
    }

    /// Nodes read so far.
    pub fn visited(&self) -> &BTreeMap<ElementId, Node> {
        &self.seen
    }

    /// The node a hand-over-hand reader keeps locked after its last read.
    pub fn position(&self) -> Option<ElementId> {
        match self.def {
            StructureDef::Skiplist { .. } => self.hold,
            _ => self.last_read,
        }
    }

    /// Elements still to be written, in write order.
    pub fn write_targets(&self) -> Vec<ElementId> {
        match &self.phase {
            Phase::Writing { writes, next, .. } => writes[*next..].iter().map(|w| w.0).collect(),
            _ => Vec::new(),
        }
    }

    /// All writes of the update phase, or empty while still traversing.
    pub fn planned_writes(&self) -> Vec<(ElementId, Node)> {
        match &self.phase {
            Phase::Writing { writes, .. } => writes.clone(),
            _ => Vec::new(),
        }
    }

    /// Feeds the content of the element requested by [`Action::Read`].
    /// `alloc` hands out an identity when an insert needs a new node.
    pub fn on_read(&mut self, id: ElementId, node: Node, alloc: &mut dyn FnMut() -> ElementId) {
        assert_eq!(self.phase, Phase::Reading(id), "unexpected read of {id}");
        self.seen.insert(id, node);
        self.last_read = Some(id);
        let (probe, hold) = self.traverse();
        self.hold = Some(hold);
        match probe {
            Probe::Need(next) => self.phase = Phase::Reading(next),
            Probe::Stop(outcome) => {
                let (writes, response) = self.plan(outcome, alloc);
                self.phase = if writes.is_empty() {
                    Phase::Done(response)
                } else {
                    Phase::Writing { writes, next: 0, response }
                };
            }
        }
    }

    /// Acknowledges the write requested by [`Action::Write`].
    pub fn on_write(&mut self) {
        let Phase::Writing { writes, next, response } = &mut self.phase else {
            panic!("write acknowledged outside the update phase");
        };
        *next += 1;
        if *next == writes.len() {
            self.phase = Phase::Done(*response);
        }
    }

    fn key(&self) -> Key {
        Key::Fin(self.op.key)
    }

    fn is_tail(&self, id: ElementId) -> bool {
        self.def.tail() == Some(id)
    }

    fn traverse(&self) -> (Probe, ElementId) {
        match self.def {
            StructureDef::SortedList => (self.traverse_list(), ROOT),
            StructureDef::Skiplist { .. } => self.traverse_skip(),
            StructureDef::Bst => (self.traverse_bst(), ROOT),
        }
    }

    fn traverse_list(&self) -> Probe {
        let k = self.key();
        let mut cur = ROOT;
        let mut path = BTreeSet::from([ROOT]);
        loop {
            let Some(next) = self.seen[&cur].edges.first().copied().flatten() else {
                return Probe::Stop(Outcome::Broken);
            };
            if self.is_tail(next) {
                return Probe::Stop(Outcome::List { pred: cur, succ: next });
            }
            let Some(n) = self.seen.get(&next) else {
                return Probe::Need(next);
            };
            if !path.insert(next) {
                return Probe::Stop(Outcome::Broken);
            }
            if n.key >= k {
                return Probe::Stop(Outcome::List { pred: cur, succ: next });
            }
            cur = next;
        }
    }

    /// Returns the probe and the current predecessor `x`.
    fn traverse_skip(&self) -> (Probe, ElementId) {
        let k = self.key();
        let levels = self.def.levels();
        let mut x = ROOT;
        let mut preds = vec![ROOT; levels];
        let mut succs = vec![ROOT; levels];
        for level in (0..levels).rev() {
            let y = loop {
                let Some(y) = self.seen[&x].edges.get(level).copied().flatten() else {
                    return (Probe::Stop(Outcome::Broken), x);
                };
                if self.is_tail(y) {
                    break y;
                }
                let Some(n) = self.seen.get(&y) else {
                    return (Probe::Need(y), x);
                };
                if n.key <= self.seen[&x].key {
                    return (Probe::Stop(Outcome::Broken), x);
                }
                if n.key < k {
                    x = y;
                } else {
                    break y;
                }
            };
            preds[level] = x;
            succs[level] = y;
        }
        (Probe::Stop(Outcome::Skip { preds, succs }), x)
    }

    fn traverse_bst(&self) -> Probe {
        let k = self.key();
        let mut path = BTreeSet::from([ROOT]);
        let mut parent = ROOT;
        let mut dir = 1;
        let mut cur = self.seen[&ROOT].edges.get(1).copied().flatten();
        loop {
            let Some(c) = cur else {
                return Probe::Stop(Outcome::Bst { parent, dir, node: None, succ: None });
            };
            let Some(n) = self.seen.get(&c) else {
                return Probe::Need(c);
            };
            if !path.insert(c) {
                return Probe::Stop(Outcome::Broken);
            }
            if n.key == k {
                break;
            }
            parent = c;
            dir = usize::from(k > n.key);
            cur = n.edges[dir];
        }
        let d = cur.expect("found node");
        let dn = &self.seen[&d];
        let two_children = dn.edges.iter().all(Option::is_some);
        if self.op.name != OpName::Delete || !two_children {
            return Probe::Stop(Outcome::Bst { parent, dir, node: Some(d), succ: None });
        }
        // in-order successor: leftmost node of the right subtree
        let mut sp = d;
        let mut s = dn.edges[1].expect("right child");
        loop {
            let Some(sn) = self.seen.get(&s) else {
                return Probe::Need(s);
            };
            if !path.insert(s) {
                return Probe::Stop(Outcome::Broken);
            }
            match sn.edges[0] {
                Some(l) => {
                    sp = s;
                    s = l;
                }
                None => break,
            }
        }
        Probe::Stop(Outcome::Bst { parent, dir, node: Some(d), succ: Some((sp, s)) })
    }

    fn with_edges(&self, id: ElementId, f: impl FnOnce(&mut Vec<Option<ElementId>>)) -> (ElementId, Node) {
        let mut n = self.seen[&id].clone();
        f(&mut n.edges);
        (id, n)
    }

    fn plan(&self, outcome: Outcome, alloc: &mut dyn FnMut() -> ElementId) -> (Vec<(ElementId, Node)>, bool) {
        let k = self.key();
        let op = self.op;
        let found = match &outcome {
            Outcome::List { succ, .. } => !self.is_tail(*succ) && self.seen[succ].key == k,
            Outcome::Skip { succs, .. } => !self.is_tail(succs[0]) && self.seen[&succs[0]].key == k,
            Outcome::Bst { node, .. } => node.is_some(),
            Outcome::Broken => return (Vec::new(), false),
        };
        let mut writes = Vec::new();
        match (op.name, found) {
            (OpName::Find, _) => return (writes, found),
            (OpName::Insert, true) | (OpName::Delete, false) => return (writes, false),
            _ => {}
        }
        match outcome {
            Outcome::List { pred, succ } => {
                if op.name == OpName::Insert {
                    let x = alloc();
                    writes.push((x, Node::new(k, op.value, vec![Some(succ)])));
                    writes.push(self.with_edges(pred, |e| e[0] = Some(x)));
                } else {
                    let after = self.seen[&succ].edges[0];
                    writes.push(self.with_edges(pred, |e| e[0] = after));
                }
            }
            Outcome::Skip { preds, succs } => {
                let (levels, target): (Vec<usize>, Option<ElementId>) = if op.name == OpName::Insert {
                    let h = self.def.height(op.key);
                    let x = alloc();
                    writes.push((x, Node::new(k, op.value, succs[..h].iter().map(|s| Some(*s)).collect())));
                    ((0..h).collect(), Some(x))
                } else {
                    let d = succs[0];
                    ((0..succs.len()).filter(|l| succs[*l] == d).collect(), None)
                };
                // one write per distinct predecessor, lowest level first
                let mut order: Vec<ElementId> = Vec::new();
                for l in &levels {
                    if !order.contains(&preds[*l]) {
                        order.push(preds[*l]);
                    }
                }
                for p in order {
                    writes.push(self.with_edges(p, |e| {
                        for l in levels.iter().filter(|l| preds[**l] == p) {
                            e[*l] = match target {
                                Some(x) => Some(x),
                                None => self.seen[&succs[0]].edges[*l],
                            };
                        }
                    }));
                }
            }
            Outcome::Bst { parent, dir, node, succ } => match (op.name, node, succ) {
                (OpName::Insert, None, _) => {
                    let x = alloc();
                    writes.push((x, Node::new(k, op.value, vec![None, None])));
                    writes.push(self.with_edges(parent, |e| e[dir] = Some(x)));
                }
                (_, Some(d), None) => {
                    let dn = &self.seen[&d];
                    let child = dn.edges[0].or(dn.edges[1]);
                    writes.push(self.with_edges(parent, |e| e[dir] = child));
                }
                (_, Some(d), Some((sp, s))) => {
                    let dn = self.seen[&d].clone();
                    let s_right = self.seen[&s].edges[1];
                    // detach the successor before it takes d's children so
                    // that no intermediate state has a cycle
                    if sp != d {
                        writes.push(self.with_edges(sp, |e| e[0] = s_right));
                    }
                    let right = if sp == d { s_right } else { dn.edges[1] };
                    writes.push(self.with_edges(s, |e| *e = vec![dn.edges[0], right]));
                    writes.push(self.with_edges(parent, |e| e[dir] = Some(s)));
                }
                _ => unreachable!("update without a matching outcome"),
            },
            Outcome::Broken => unreachable!(),
        }
        (writes, true)
    }
}
