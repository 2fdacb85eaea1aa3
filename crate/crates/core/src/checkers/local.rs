use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::{ElementId, Event, EventKind, History, Node, OpId, OpName, OpStatus, Operation, Response, SETUP_PROC};
use crate::seqspec::{reachable_states, solo_run, Reachable, StructureDef};

use super::{check_linearizable, CheckResult, LocalWitness};

/// Limits of the sequential oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    /// Update operations the sequential executions may use.
    pub universe: Vec<Operation>,
    /// Longest sequential prefix considered.
    pub max_ops: usize,
    /// Most distinct states kept.
    pub cap: usize,
}

impl Bounds {
    pub const DEFAULT_CAP: usize = 200_000;

    /// Inserts (with every value seen) and deletes over the given keys.
    pub fn for_ops<'a>(ops: impl IntoIterator<Item = &'a Operation>) -> Bounds {
        let mut keys: BTreeSet<u64> = BTreeSet::new();
        let mut universe: BTreeSet<Operation> = BTreeSet::new();
        for op in ops {
            keys.insert(op.key);
            if op.name == OpName::Insert {
                universe.insert(Operation::insert_value(op.key, op.value));
            }
        }
        for &k in &keys {
            universe.insert(Operation::delete(k));
            if !universe.iter().any(|o| o.name == OpName::Insert && o.key == k) {
                universe.insert(Operation::insert(k));
            }
        }
        Bounds { universe: universe.into_iter().collect(), max_ops: keys.len() + 1, cap: Self::DEFAULT_CAP }
    }

    pub fn for_history(h: &History) -> Bounds {
        Bounds::for_ops(h.ops.values().map(|i| &i.op))
    }

    pub fn for_keys(keys: &[u64]) -> Bounds {
        let ops: Vec<Operation> = keys.iter().map(|&k| Operation::insert(k)).collect();
        Bounds::for_ops(&ops)
    }

    fn covers(&self, op: &Operation) -> bool {
        match op.name {
            OpName::Insert => self.universe.contains(&Operation::insert_value(op.key, op.value)),
            _ => self.universe.iter().any(|o| o.key == op.key),
        }
    }
}

/// The sequential oracle: every reachable state, and solo runs from them.
///
/// An operation of a concurrent history is locally serializable iff its
/// local history equals, up to renaming elements, a prefix of its solo run
/// from some reachable state; the state's path followed by the operation is
/// then a sequential history with the same local view.
pub struct LsOracle {
    def: StructureDef,
    bounds: Bounds,
    reach: Reachable,
    solo: HashMap<(usize, Operation), Vec<Event>>,
}

impl LsOracle {
    pub fn new(def: StructureDef, bounds: Bounds) -> LsOracle {
        let reach = reachable_states(&def, &bounds.universe, bounds.max_ops, bounds.cap);
        LsOracle { def, bounds, reach, solo: HashMap::new() }
    }

    pub fn states(&self) -> usize {
        self.reach.states.len()
    }

    pub fn is_closed(&self) -> bool {
        self.reach.closed
    }

    fn solo_events(&mut self, state: usize, op: Operation) -> &[Event] {
        let (def, reach) = (&self.def, &self.reach);
        self.solo.entry((state, op)).or_insert_with(|| {
            let mut g = reach.states[state].clone();
            let mut events = Vec::new();
            solo_run(def, &mut g, op, SETUP_PROC, OpId(0), &mut events);
            events
        })
    }

    /// A state explaining the local history of `op`, if any.
    pub fn explain(&mut self, h: &History, op: OpId) -> Option<usize> {
        let inst = h.ops.get(&op)?;
        let local: Vec<Event> = h
            .restrict_to_operation(op)
            .events
            .into_iter()
            .filter(|e| !matches!(e.kind, EventKind::OpResponse(Response::Abort)))
            .collect();
        let whole = matches!(inst.status, OpStatus::Complete(_));
        (0..self.reach.states.len()).find(|&s| {
            let solo = self.solo_events(s, inst.op);
            matches_renamed(&local, solo, whole)
        })
    }

    pub fn check(&mut self, h: &History) -> CheckResult {
        let mut witnesses = BTreeMap::new();
        for (id, inst) in &h.ops {
            match self.explain(h, *id) {
                Some(s) => {
                    witnesses.insert(*id, LocalWitness { state: s, prefix: self.reach.paths[s].clone() });
                }
                None => {
                    let decided = self.reach.closed && h.ops.values().all(|i| self.bounds.covers(&i.op));
                    let mut r = if decided {
                        CheckResult::fail(format!("local history of {} ({}) has no sequential witness", id, inst.op))
                    } else {
                        CheckResult::unknown(format!("no witness for {id} within the oracle bounds"))
                    };
                    r.culprit = Some(*id);
                    return r;
                }
            }
        }
        CheckResult { local: Some(witnesses), ..CheckResult::pass() }
    }
}

/// Element renaming that must stay a bijection.
#[derive(Default)]
struct Renaming {
    fwd: HashMap<ElementId, ElementId>,
    bwd: HashMap<ElementId, ElementId>,
}

impl Renaming {
    fn bind(&mut self, a: ElementId, b: ElementId) -> bool {
        match (self.fwd.get(&a), self.bwd.get(&b)) {
            (Some(x), _) => *x == b,
            (None, Some(_)) => false,
            (None, None) => {
                self.fwd.insert(a, b);
                self.bwd.insert(b, a);
                true
            }
        }
    }

    fn node(&mut self, a: &Node, b: &Node) -> bool {
        a.key == b.key
            && a.value == b.value
            && a.edges.len() == b.edges.len()
            && a.edges.iter().zip(&b.edges).all(|(x, y)| match (x, y) {
                (None, None) => true,
                (Some(x), Some(y)) => self.bind(*x, *y),
                _ => false,
            })
    }
}

/// `local` equals `solo` (or a prefix of it, unless `whole`) up to a
/// consistent bijective renaming of elements.
pub(crate) fn matches_renamed(local: &[Event], solo: &[Event], whole: bool) -> bool {
    if local.len() > solo.len() || (whole && local.len() != solo.len()) {
        return false;
    }
    let mut ren = Renaming::default();
    local.iter().zip(solo).all(|(a, b)| match (&a.kind, &b.kind) {
        (EventKind::OpInvoke(x), EventKind::OpInvoke(y)) => x == y,
        (EventKind::OpResponse(x), EventKind::OpResponse(y)) => x == y,
        (EventKind::ReadInvoke(x), EventKind::ReadInvoke(y)) => x.role == y.role && ren.bind(x.id, y.id),
        (EventKind::ReadResponse(x, Some(n)), EventKind::ReadResponse(y, Some(m)))
        | (EventKind::WriteInvoke(x, n), EventKind::WriteInvoke(y, m)) => {
            x.role == y.role && ren.bind(x.id, y.id) && ren.node(n, m)
        }
        (EventKind::WriteResponse(x, p), EventKind::WriteResponse(y, q)) => {
            p == q && x.role == y.role && ren.bind(x.id, y.id)
        }
        _ => false,
    })
}

pub fn check_locally_serializable(h: &History, def: &StructureDef, bounds: &Bounds) -> CheckResult {
    LsOracle::new(*def, bounds.clone()).check(h)
}

/// Local serializability and linearizability of the high-level history.
pub fn check_ls_linearizable(h: &History, def: &StructureDef, bounds: &Bounds) -> CheckResult {
    LsOracle::new(*def, bounds.clone()).check_lsl(h)
}

impl LsOracle {
    pub fn check_lsl(&mut self, h: &History) -> CheckResult {
        let lin = check_linearizable(&h.high_level());
        if lin.refuted() {
            return CheckResult { note: Some(format!("not linearizable: {}", lin.note.unwrap_or_default())), ..lin };
        }
        let local = self.check(h);
        if !local.holds() {
            return local;
        }
        if lin.inconclusive {
            return lin;
        }
        CheckResult { order: lin.order, local: local.local, ..CheckResult::pass() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ElemRef, Key};
    use crate::seqspec::sequential_run;

    #[test]
    fn sequential_histories_are_locally_serializable() {
        for def in StructureDef::all() {
            let ops = [Operation::insert(2), Operation::insert(1), Operation::find(2), Operation::delete(2)];
            let (_, _, h) = sequential_run(&def, &ops);
            let r = check_locally_serializable(&h, &def, &Bounds::for_history(&h));
            assert!(r.holds(), "{def}: {r:?}");
            assert!(check_ls_linearizable(&h, &def, &Bounds::for_history(&h)).holds());
        }
    }

    #[test]
    fn impossible_read_is_refuted() {
        let def = StructureDef::SortedList;
        let (_, _, mut h) = sequential_run(&def, &[Operation::insert(1), Operation::find(1)]);
        // make find(1) read a root whose next edge points back to the root
        for e in &mut h.events {
            if e.op == OpId(1) {
                if let EventKind::ReadResponse(x, Some(n)) = &mut e.kind {
                    if x.role.as_str() == "r" {
                        n.edges = vec![Some(x.id)];
                    }
                }
            }
        }
        let h = History::from_events(h.events);
        let r = check_locally_serializable(&h, &def, &Bounds::for_history(&h));
        assert!(r.refuted(), "{r:?}");
        assert_eq!(r.culprit, Some(OpId(1)));
    }

    #[test]
    fn renaming_must_be_bijective() {
        let ev = |id: u32, target: u32| Event {
            seq: 0,
            proc: SETUP_PROC,
            op: OpId(0),
            kind: EventKind::ReadResponse(
                ElemRef::new(ElementId(id), Key::NegInf),
                Some(Node::new(Key::NegInf, 0, vec![Some(ElementId(target))])),
            ),
        };
        assert!(matches_renamed(&[ev(5, 6)], &[ev(0, 1)], true));
        // 5 is bound to 0, so its edge target 5 must map to 0, not 1
        assert!(!matches_renamed(&[ev(5, 5)], &[ev(0, 1)], true));
    }
}
