use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::{ElemRef, ElementId, Event, EventKind, History, OpId, Operation, ProcId, Response, Role, SETUP_PROC};

use super::{Action, CanonicalState, DagState, OpCursor, StructureDef};

/// One abstract element access, named by role.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    Read(Role),
    Write(Role),
}

/// An operation of a structure, not yet bound to a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepProgram {
    pub def: StructureDef,
    pub op: Operation,
}

pub fn compile(def: &StructureDef, op: &Operation) -> StepProgram {
    StepProgram { def: *def, op: *op }
}

impl StepProgram {
    pub fn cursor(&self) -> OpCursor {
        OpCursor::new(self.def, self.op)
    }

    /// The steps and response of a solo execution from `g`.
    pub fn steps(&self, g: &DagState) -> (Vec<Step>, bool) {
        let mut g = g.clone();
        let mut events = Vec::new();
        let r = solo_run(&self.def, &mut g, self.op, SETUP_PROC, OpId(0), &mut events);
        let steps = events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::ReadInvoke(x) => Some(Step::Read(x.role.clone())),
                EventKind::WriteInvoke(x, _) => Some(Step::Write(x.role.clone())),
                _ => None,
            })
            .collect();
        (steps, r)
    }
}

fn push(events: &mut Vec<Event>, proc: ProcId, op: OpId, kind: EventKind) {
    events.push(Event { seq: events.len(), proc, op, kind });
}

/// Runs `op` to completion against `g`, appending its events.
pub fn solo_run(
    def: &StructureDef,
    g: &mut DagState,
    op: Operation,
    proc: ProcId,
    op_id: OpId,
    events: &mut Vec<Event>,
) -> bool {
    push(events, proc, op_id, EventKind::OpInvoke(op));
    let mut cursor = OpCursor::new(*def, op);
    let mut wrote = false;
    loop {
        match cursor.action() {
            Action::Read(id) => {
                assert!(!wrote, "read after write in {op}");
                let node = g.node(id).clone();
                let elem = ElemRef::new(id, node.key);
                push(events, proc, op_id, EventKind::ReadInvoke(elem.clone()));
                push(events, proc, op_id, EventKind::ReadResponse(elem, Some(node.clone())));
                cursor.on_read(id, node, &mut || g.alloc());
            }
            Action::Write(id, node) => {
                wrote = true;
                let elem = ElemRef::new(id, node.key);
                g.write(id, node.clone());
                push(events, proc, op_id, EventKind::WriteInvoke(elem.clone(), node));
                push(events, proc, op_id, EventKind::WriteResponse(elem, true));
                cursor.on_write();
            }
            Action::Respond(r) => {
                push(events, proc, op_id, EventKind::OpResponse(Response::Bool(r)));
                return r;
            }
        }
    }
}

/// Executes `ops` one after another from the empty structure.
pub fn sequential_run(def: &StructureDef, ops: &[Operation]) -> (DagState, Vec<bool>, History) {
    let mut g = def.initial_state();
    let mut events = Vec::new();
    let responses = ops
        .iter()
        .enumerate()
        .map(|(i, op)| solo_run(def, &mut g, *op, SETUP_PROC, OpId(i as u32), &mut events))
        .collect();
    (g, responses, History::from_events(events))
}

/// True iff `h` is sequential and replaying it from the empty structure
/// gives every read the latest value written to its element.
pub fn is_legal_sequential(def: &StructureDef, h: &History) -> bool {
    let mut mem = def.initial_state().nodes;
    let mut open: Option<OpId> = None;
    let mut finished = BTreeSet::new();
    for e in &h.events {
        match &e.kind {
            EventKind::OpInvoke(_) => {
                if open.is_some() || finished.contains(&e.op) {
                    return false;
                }
                open = Some(e.op);
            }
            _ if open != Some(e.op) => return false,
            EventKind::OpResponse(_) => {
                finished.insert(e.op);
                open = None;
            }
            EventKind::ReadResponse(x, Some(n)) => {
                if mem.get(&x.id) != Some(n) {
                    return false;
                }
            }
            EventKind::WriteInvoke(x, n) => {
                mem.insert(x.id, n.clone());
            }
            _ => {}
        }
    }
    true
}

/// All insert, delete and find operations over `keys`.
pub fn dictionary_ops(keys: &[u64]) -> Vec<Operation> {
    keys.iter()
        .flat_map(|&k| [Operation::insert(k), Operation::delete(k), Operation::find(k)])
        .collect()
}

/// Histories of every sequence of exactly `len` operations drawn from
/// `universe`, starting from the empty structure.
pub fn enumerate_sequential_histories(
    def: &StructureDef,
    universe: &[Operation],
    len: usize,
    cap: usize,
) -> Result<Vec<History>> {
    let total = universe.len().checked_pow(len as u32).unwrap_or(usize::MAX);
    if total > cap {
        return Err(Error::Budget(cap));
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; len];
    loop {
        let ops: Vec<Operation> = idx.iter().map(|i| universe[*i]).collect();
        out.push(sequential_run(def, &ops).2);
        // odometer
        let mut pos = len;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < universe.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// States reachable from the empty structure by at most `depth` operations
/// of `universe`, canonicalized and deduplicated, in breadth-first order.
/// The search stops early, unclosed, once `cap` states are known.
#[derive(Clone, Debug)]
pub struct Reachable {
    pub states: Vec<DagState>,
    /// A shortest operation sequence reaching each state.
    pub paths: Vec<Vec<Operation>>,
    /// Whether the search reached a fixpoint, i.e. no longer sequence adds
    /// a new state.
    pub closed: bool,
}

pub fn reachable_states(def: &StructureDef, universe: &[Operation], depth: usize, cap: usize) -> Reachable {
    let updates: Vec<Operation> = universe.iter().filter(|o| o.is_update()).copied().collect();
    let start = def.initial_state().canonicalized();
    let mut seen: BTreeMap<CanonicalState, usize> = BTreeMap::from([(start.canonical(), 0)]);
    let mut states = vec![start];
    let mut paths = vec![Vec::new()];
    let mut frontier = VecDeque::from([0usize]);
    for _ in 0..depth {
        let mut next = VecDeque::new();
        for i in frontier {
            for op in &updates {
                let mut g = states[i].clone();
                solo_run(def, &mut g, *op, SETUP_PROC, OpId(0), &mut Vec::new());
                let c = g.canonical();
                if !seen.contains_key(&c) {
                    if states.len() >= cap {
                        return Reachable { states, paths, closed: false };
                    }
                    seen.insert(c, states.len());
                    next.push_back(states.len());
                    states.push(g.canonicalized());
                    let mut path = paths[i].clone();
                    path.push(*op);
                    paths.push(path);
                }
            }
        }
        if next.is_empty() {
            return Reachable { states, paths, closed: true };
        }
        frontier = next;
    }
    // closed if one more level adds nothing
    let closed = frontier.iter().all(|&i| {
        updates.iter().all(|op| {
            let mut g = states[i].clone();
            solo_run(def, &mut g, *op, SETUP_PROC, OpId(0), &mut Vec::new());
            seen.contains_key(&g.canonical())
        })
    });
    Reachable { states, paths, closed }
}

/// A key whose presence is decided only at the end of a long path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub key: u64,
    /// Inserts leading to `G`, which lacks `key`.
    pub to_g: Vec<Operation>,
    /// `to_g` followed by `insert(key)`, leading to `G'`.
    pub to_g_prime: Vec<Operation>,
    /// The unique predecessor of the key's node in `G'`.
    pub source: ElementId,
    /// Length of a shortest root path to `source`.
    pub depth: usize,
}

/// Smallest witness over keys `1..=5`: fewest inserts first, then
/// lexicographic order, then the smallest key.
pub fn non_triviality_witness(def: &StructureDef) -> Witness {
    const KEYS: u64 = 5;
    for len in 0..=KEYS as usize {
        let mut seqs: Vec<Vec<u64>> = vec![vec![]];
        for _ in 0..len {
            let mut longer = Vec::new();
            for s in &seqs {
                for k in (1..=KEYS).filter(|k| !s.contains(k)) {
                    let mut t = s.clone();
                    t.push(k);
                    longer.push(t);
                }
            }
            seqs = longer;
        }
        for seq in seqs {
            let to_g: Vec<Operation> = seq.iter().map(|&k| Operation::insert(k)).collect();
            if let Some(w) = check_witness(def, &to_g) {
                return w;
            }
        }
    }
    unreachable!("{def} has no non-triviality witness over keys 1..=5")
}

fn check_witness(def: &StructureDef, to_g: &[Operation]) -> Option<Witness> {
    let (g, _, _) = sequential_run(def, to_g);
    for key in 1..=6 {
        if g.node_with_key(key).is_some() {
            continue;
        }
        let mut to_g_prime = to_g.to_vec();
        to_g_prime.push(Operation::insert(key));
        let (gp, _, _) = sequential_run(def, &to_g_prime);
        let node = gp.node_with_key(key)?;
        let into: Vec<ElementId> =
            gp.edges().into_iter().filter(|e| e.2 == node).map(|e| e.0).collect();
        if into.len() != 1 {
            continue;
        }
        let depth = gp.depths()[&into[0]];
        if depth >= 2 {
            return Some(Witness { key, to_g: to_g.to_vec(), to_g_prime, source: into[0], depth });
        }
    }
    None
}
