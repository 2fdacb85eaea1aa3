use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::Serialize;

use crate::model::{ElementId, EventKind, History, Node, OpId, OpStatus, Response};
use crate::seqspec::StructureDef;

use super::CheckResult;

const MAX_OPS: usize = 64;
/// Largest candidate set searched for one prefix condition.
const MAX_PREFIX_OPS: usize = 20;

type Memory = BTreeMap<ElementId, Node>;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Access {
    Read(ElementId, Node),
    Write(ElementId, Node),
}

#[derive(Clone, Debug)]
struct OpTrace {
    id: OpId,
    invoked: usize,
    returned: Option<usize>,
    last: usize,
    accesses: Vec<Access>,
}

fn traces(h: &History) -> Vec<OpTrace> {
    let mut out: BTreeMap<OpId, OpTrace> = BTreeMap::new();
    for (pos, e) in h.events.iter().enumerate() {
        let t = out
            .entry(e.op)
            .or_insert(OpTrace { id: e.op, invoked: pos, returned: None, last: pos, accesses: Vec::new() });
        t.last = pos;
        match &e.kind {
            EventKind::OpResponse(Response::Bool(_)) => t.returned = Some(pos),
            EventKind::ReadResponse(x, Some(n)) => t.accesses.push(Access::Read(x.id, n.clone())),
            EventKind::WriteInvoke(x, n) => t.accesses.push(Access::Write(x.id, n.clone())),
            _ => {}
        }
    }
    out.into_values().collect()
}

/// Replays the accesses, returning the new memory if every read sees the
/// current value.
fn replay(mem: &Memory, accesses: &[Access]) -> Option<Memory> {
    let mut mem = mem.clone();
    for a in accesses {
        match a {
            Access::Read(id, n) => {
                if mem.get(id) != Some(n) {
                    return None;
                }
            }
            Access::Write(id, n) => {
                mem.insert(*id, n.clone());
            }
        }
    }
    Some(mem)
}

fn precedes(a: &OpTrace, b: &OpTrace) -> bool {
    a.returned.is_some_and(|r| r < b.invoked)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeReason {
    RealTime,
    ReadsFrom,
    WriteOrder,
    AntiDependency,
}

/// `from` must be serialized before `to`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: OpId,
    pub to: OpId,
    pub reasons: Vec<EdgeReason>,
}

/// Strict serializability of the complete operations of `h`, replaying from
/// the empty structure. A negative verdict carries the shortest cycle of the
/// dependency graph when there is one.
pub fn check_strictly_serializable(h: &History, def: &StructureDef) -> CheckResult {
    let ops: Vec<OpTrace> = traces(h).into_iter().filter(|t| is_complete(h, t.id)).collect();
    if ops.len() > MAX_OPS {
        return CheckResult::unknown(format!("{} operations exceed the limit of {MAX_OPS}", ops.len()));
    }
    let n = ops.len();
    let preds: Vec<u64> =
        (0..n).map(|i| (0..n).filter(|&j| precedes(&ops[j], &ops[i])).fold(0, |m, j| m | 1 << j)).collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut failed = HashSet::new();
    let mut order = Vec::new();
    if serial_dfs(&ops, &preds, all, 0, def.initial_state().nodes, &mut failed, &mut order) {
        return CheckResult { order: Some(order.iter().map(|&i| ops[i].id).collect()), ..CheckResult::pass() };
    }
    let edges = dependency_edges(h);
    let mut r = CheckResult::fail("no legal serialization respects real-time order");
    r.cycle = shortest_cycle(&edges);
    r
}

fn is_complete(h: &History, op: OpId) -> bool {
    h.ops.get(&op).is_some_and(|i| matches!(i.status, OpStatus::Complete(_)))
}

fn serial_dfs(
    ops: &[OpTrace],
    preds: &[u64],
    all: u64,
    done: u64,
    mem: Memory,
    failed: &mut HashSet<(u64, Memory)>,
    order: &mut Vec<usize>,
) -> bool {
    if done == all {
        return true;
    }
    if failed.contains(&(done, mem.clone())) {
        return false;
    }
    for i in 0..ops.len() {
        if done & (1 << i) != 0 || preds[i] & !done != 0 {
            continue;
        }
        if let Some(next) = replay(&mem, &ops[i].accesses) {
            order.push(i);
            if serial_dfs(ops, preds, all, done | 1 << i, next, failed, order) {
                return true;
            }
            order.pop();
        }
    }
    failed.insert((done, mem));
    false
}

/// Dependency graph over the complete operations: real-time order, reads
/// from the latest earlier write of the same value, per-element write order,
/// and anti-dependencies from a reader to later writers of what it read.
pub fn dependency_edges(h: &History) -> Vec<Edge> {
    let complete = |op: OpId| is_complete(h, op);
    let mut edges: BTreeMap<(OpId, OpId), Vec<EdgeReason>> = BTreeMap::new();
    let mut add = |a: OpId, b: OpId, r: EdgeReason| {
        if a != b {
            let e = edges.entry((a, b)).or_default();
            if !e.contains(&r) {
                e.push(r);
            }
        }
    };
    let ops: Vec<OpTrace> = traces(h).into_iter().filter(|t| complete(t.id)).collect();
    for a in &ops {
        for b in &ops {
            if precedes(a, b) {
                add(a.id, b.id, EdgeReason::RealTime);
            }
        }
    }
    // writes per element in history order
    let mut writes: BTreeMap<ElementId, Vec<(usize, OpId, &Node)>> = BTreeMap::new();
    for (pos, e) in h.events.iter().enumerate() {
        if let EventKind::WriteInvoke(x, n) = &e.kind {
            if complete(e.op) {
                writes.entry(x.id).or_default().push((pos, e.op, n));
            }
        }
    }
    for ws in writes.values() {
        for pair in ws.windows(2) {
            add(pair[0].1, pair[1].1, EdgeReason::WriteOrder);
        }
    }
    for (pos, e) in h.events.iter().enumerate() {
        let EventKind::ReadResponse(x, Some(n)) = &e.kind else { continue };
        if !complete(e.op) {
            continue;
        }
        let ws = writes.get(&x.id).map(Vec::as_slice).unwrap_or(&[]);
        let source = ws.iter().rposition(|(wpos, wop, wn)| *wpos < pos && *wop != e.op && *wn == n);
        if let Some(s) = source {
            add(ws[s].1, e.op, EdgeReason::ReadsFrom);
        }
        let later = source.map_or(0, |s| s + 1);
        for (_, wop, _) in &ws[later..] {
            add(e.op, *wop, EdgeReason::AntiDependency);
        }
    }
    edges.into_iter().map(|((from, to), reasons)| Edge { from, to, reasons }).collect()
}

fn shortest_cycle(edges: &[Edge]) -> Option<Vec<Edge>> {
    let mut succ: BTreeMap<OpId, Vec<&Edge>> = BTreeMap::new();
    for e in edges {
        succ.entry(e.from).or_default().push(e);
    }
    let mut best: Option<Vec<Edge>> = None;
    for &start in succ.keys() {
        // BFS from start back to start
        let mut parent: BTreeMap<OpId, &Edge> = BTreeMap::new();
        let mut queue = VecDeque::from([start]);
        let mut closing: Option<&Edge> = None;
        'bfs: while let Some(u) = queue.pop_front() {
            for e in succ.get(&u).into_iter().flatten() {
                if e.to == start {
                    closing = Some(e);
                    break 'bfs;
                }
                if e.to != start && !parent.contains_key(&e.to) {
                    parent.insert(e.to, e);
                    queue.push_back(e.to);
                }
            }
        }
        let Some(last) = closing else { continue };
        let mut path = vec![last.clone()];
        let mut at = last.from;
        while at != start {
            let e = parent[&at];
            path.push(e.clone());
            at = e.from;
        }
        path.reverse();
        if best.as_ref().is_none_or(|b| path.len() < b.len()) {
            best = Some(path);
        }
    }
    best
}

/// Strict serializability plus, for every operation including aborted and
/// pending ones, a legal serial execution of operations complete before its
/// last event followed by its own steps.
pub fn check_safe_strict(exec: &History, def: &StructureDef) -> CheckResult {
    let strict = check_strictly_serializable(exec, def);
    if !strict.holds() {
        let note = format!("condition (1) fails: {}", strict.note.clone().unwrap_or_default());
        return CheckResult { note: Some(note), ..strict };
    }
    let all = traces(exec);
    let init = def.initial_state().nodes;
    for k in &all {
        let local: Vec<Access> = traces(&exec.restrict_to_operation(k.id)).into_iter().flat_map(|t| t.accesses).collect();
        let cands: Vec<&OpTrace> = all
            .iter()
            .filter(|t| t.id != k.id && is_complete(exec, t.id) && t.returned.is_some_and(|r| r < k.last))
            .collect();
        if cands.len() > MAX_PREFIX_OPS {
            return CheckResult::unknown(format!("{} candidate operations before {} exceed the limit", cands.len(), k.id));
        }
        let mut failed = HashSet::new();
        if !prefix_dfs(&cands, &local, 0, init.clone(), &mut failed) {
            let mut r = CheckResult::fail(format!("condition (2) fails for {}", k.id));
            r.culprit = Some(k.id);
            return r;
        }
    }
    strict
}

fn prefix_dfs(
    cands: &[&OpTrace],
    local: &[Access],
    done: u64,
    mem: Memory,
    failed: &mut HashSet<(u64, Memory)>,
) -> bool {
    if replay(&mem, local).is_some() {
        return true;
    }
    if failed.contains(&(done, mem.clone())) {
        return false;
    }
    for j in 0..cands.len() {
        if done & (1 << j) != 0 {
            continue;
        }
        // j may not follow an operation it precedes in real time
        if (0..cands.len()).any(|i| done & (1 << i) != 0 && precedes(cands[j], cands[i])) {
            continue;
        }
        if let Some(next) = replay(&mem, &cands[j].accesses) {
            if prefix_dfs(cands, local, done | 1 << j, next, failed) {
                return true;
            }
        }
    }
    failed.insert((done, mem));
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Operation;
    use crate::seqspec::sequential_run;

    #[test]
    fn sequential_histories_are_strictly_serializable() {
        for def in StructureDef::all() {
            let ops = [Operation::insert(3), Operation::insert(1), Operation::delete(3), Operation::find(1)];
            let (_, _, h) = sequential_run(&def, &ops);
            let r = check_strictly_serializable(&h, &def);
            assert!(r.holds(), "{def}");
            assert_eq!(r.order.unwrap().len(), 4);
            assert!(check_safe_strict(&h, &def).holds());
        }
    }

    #[test]
    fn sequential_dependencies_are_acyclic() {
        let def = StructureDef::SortedList;
        let (_, _, h) = sequential_run(&def, &[Operation::insert(1), Operation::insert(2), Operation::find(2)]);
        let edges = dependency_edges(&h);
        assert!(shortest_cycle(&edges).is_none());
        assert!(edges.iter().all(|e| e.from < e.to));
    }
}
