use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::{ElementId, Key, Node};

use super::{StructureDef, ROOT, TAIL};

/// Rooted DAG of key-value nodes with labeled edges.
///
/// `nodes` may hold unlinked nodes; the graph `G` itself is the part
/// reachable from `root`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagState {
    pub nodes: BTreeMap<ElementId, Node>,
    pub root: ElementId,
    pub tail: Option<ElementId>,
    pub next_id: u32,
}

/// Shape of the reachable part with element identities erased.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalState(pub Vec<(Key, u64, Vec<Option<u32>>)>);

impl DagState {
    pub fn from_nodes(nodes: BTreeMap<ElementId, Node>, tail: Option<ElementId>) -> Self {
        let next_id = nodes.keys().next_back().map_or(0, |id| id.0 + 1);
        DagState { nodes, root: ROOT, tail, next_id }
    }

    pub fn alloc(&mut self) -> ElementId {
        let id = ElementId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn get(&self, id: ElementId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn node(&self, id: ElementId) -> &Node {
        &self.nodes[&id]
    }

    pub fn write(&mut self, id: ElementId, node: Node) {
        self.next_id = self.next_id.max(id.0 + 1);
        self.nodes.insert(id, node);
    }

    /// Reachable nodes in depth-first preorder, following edge labels in order.
    pub fn reachable_order(&self) -> Vec<ElementId> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            order.push(id);
            if let Some(n) = self.nodes.get(&id) {
                for t in n.edges.iter().rev().flatten() {
                    if !seen.contains(t) {
                        stack.push(*t);
                    }
                }
            }
        }
        order
    }

    pub fn reachable(&self) -> BTreeSet<ElementId> {
        self.reachable_order().into_iter().collect()
    }

    /// Labeled edges `(from, label, to)` of the reachable graph.
    pub fn edges(&self) -> Vec<(ElementId, usize, ElementId)> {
        let mut out = Vec::new();
        for id in self.reachable_order() {
            for (label, t) in self.nodes[&id].edges.iter().enumerate() {
                if let Some(t) = t {
                    out.push((id, label, *t));
                }
            }
        }
        out
    }

    pub fn keys(&self) -> BTreeSet<u64> {
        self.reachable()
            .into_iter()
            .filter_map(|id| match self.nodes[&id].key {
                Key::Fin(k) => Some(k),
                _ => None,
            })
            .collect()
    }

    pub fn node_with_key(&self, key: u64) -> Option<ElementId> {
        self.reachable().into_iter().find(|id| self.nodes[id].key == Key::Fin(key))
    }

    fn in_neighbors(&self, target: ElementId) -> BTreeSet<ElementId> {
        self.edges().into_iter().filter(|e| e.2 == target).map(|e| e.0).collect()
    }

    /// `V_k(G)`: the node holding `key` with all its neighbors, or, when the key
    /// is absent, the insertion frontier with its in-neighbors.
    ///
    /// The frontier of a sorted structure is the node with the smallest key
    /// above `key` (one per level for a skiplist). For a BST it is the node at
    /// which the search for `key` falls off the tree.
    pub fn relevant_set(&self, def: &StructureDef, key: u64) -> BTreeSet<ElementId> {
        let k = Key::Fin(key);
        let mut out = BTreeSet::new();
        if let Some(a) = self.node_with_key(key) {
            out.insert(a);
            out.extend(self.nodes[&a].targets());
            out.extend(self.in_neighbors(a));
            return out;
        }
        let frontier: Vec<ElementId> = match def {
            StructureDef::Bst => {
                let mut cur = self.root;
                loop {
                    let n = &self.nodes[&cur];
                    let dir = usize::from(k > n.key);
                    match n.edges[dir] {
                        Some(c) => cur = c,
                        None => break vec![cur],
                    }
                }
            }
            _ => {
                let mut f = Vec::new();
                for level in 0..def.levels() {
                    let mut cur = self.root;
                    loop {
                        let Some(next) = self.nodes[&cur].edges.get(level).copied().flatten() else {
                            break;
                        };
                        if self.nodes[&next].key > k {
                            f.push(next);
                            break;
                        }
                        cur = next;
                    }
                }
                f
            }
        };
        for a in frontier {
            out.insert(a);
            out.extend(self.in_neighbors(a));
        }
        out
    }

    /// `R_k(G)`: the union of all root paths to `V_k(G)`, with edges leaving
    /// the subgraph cut.
    pub fn relevant_graph(&self, def: &StructureDef, key: u64) -> DagState {
        let targets = self.relevant_set(def, key);
        let reach = self.reachable();
        // nodes that can reach a target
        let mut reaches: BTreeSet<ElementId> = targets.clone();
        loop {
            let before = reaches.len();
            for (from, _, to) in self.edges() {
                if reaches.contains(&to) {
                    reaches.insert(from);
                }
            }
            if reaches.len() == before {
                break;
            }
        }
        let keep: BTreeSet<ElementId> = reach.intersection(&reaches).copied().collect();
        let nodes = keep
            .iter()
            .map(|id| {
                let mut n = self.nodes[id].clone();
                for e in &mut n.edges {
                    if e.is_some_and(|t| !keep.contains(&t)) {
                        *e = None;
                    }
                }
                (*id, n)
            })
            .collect();
        DagState { nodes, root: self.root, tail: self.tail.filter(|t| keep.contains(t)), next_id: self.next_id }
    }

    /// Number of edges on a shortest path from the root, per reachable node.
    pub fn depths(&self) -> BTreeMap<ElementId, usize> {
        let mut depth = BTreeMap::from([(self.root, 0)]);
        let mut queue = VecDeque::from([self.root]);
        while let Some(id) = queue.pop_front() {
            let d = depth[&id];
            for t in self.nodes[&id].targets() {
                if let std::collections::btree_map::Entry::Vacant(v) = depth.entry(t) {
                    v.insert(d + 1);
                    queue.push_back(t);
                }
            }
        }
        depth
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm over the reachable graph
        let reach = self.reachable();
        let mut indeg: BTreeMap<ElementId, usize> = reach.iter().map(|id| (*id, 0)).collect();
        for (_, _, t) in self.edges() {
            *indeg.get_mut(&t).expect("edge target reachable") += 1;
        }
        let mut queue: VecDeque<ElementId> =
            indeg.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
        let mut seen = 0;
        while let Some(id) = queue.pop_front() {
            seen += 1;
            for t in self.nodes[&id].targets() {
                let d = indeg.get_mut(&t).expect("reachable");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(t);
                }
            }
        }
        seen == reach.len()
    }

    /// Structure-specific edge property: strictly increasing keys along every
    /// list level, search-tree ordering for the BST.
    pub fn respects_order(&self, def: &StructureDef) -> bool {
        match def {
            StructureDef::Bst => {
                let mut stack = vec![(self.root, Key::NegInf, Key::PosInf)];
                let mut seen = BTreeSet::new();
                while let Some((id, lo, hi)) = stack.pop() {
                    if !seen.insert(id) {
                        return false;
                    }
                    let n = &self.nodes[&id];
                    if id != self.root && !(lo < n.key && n.key < hi) {
                        return false;
                    }
                    if n.edges.len() != 2 || (id == self.root && n.edges[0].is_some()) {
                        return false;
                    }
                    if let Some(l) = n.edges[0] {
                        stack.push((l, lo, n.key));
                    }
                    if let Some(r) = n.edges[1] {
                        stack.push((r, n.key, hi));
                    }
                }
                true
            }
            _ => self.edges().iter().all(|(from, _, to)| self.nodes[from].key < self.nodes[to].key)
                && self.reachable().iter().all(|id| {
                    let n = &self.nodes[id];
                    Some(*id) == self.tail || n.edges.iter().all(Option::is_some)
                }),
        }
    }

    pub fn canonical(&self) -> CanonicalState {
        let order = self.canonical_order();
        let index: BTreeMap<ElementId, u32> =
            order.iter().enumerate().map(|(i, id)| (*id, i as u32)).collect();
        CanonicalState(
            order
                .iter()
                .map(|id| {
                    let n = &self.nodes[id];
                    (n.key, n.value, n.edges.iter().map(|e| e.map(|t| index[&t])).collect())
                })
                .collect(),
        )
    }

    fn canonical_order(&self) -> Vec<ElementId> {
        let mut order = self.reachable_order();
        if let Some(t) = self.tail {
            if let Some(pos) = order.iter().position(|id| *id == t) {
                order.remove(pos);
                order.insert(1, t);
            }
        }
        order
    }

    /// Rebuilds the reachable part with fresh identities: root `0`, tail `1`,
    /// the rest in preorder.
    pub fn canonicalized(&self) -> DagState {
        let order = self.canonical_order();
        let index: BTreeMap<ElementId, ElementId> =
            order.iter().enumerate().map(|(i, id)| (*id, ElementId(i as u32))).collect();
        let nodes = order
            .iter()
            .map(|id| {
                let mut n = self.nodes[id].clone();
                for e in &mut n.edges {
                    *e = e.map(|t| index[&t]);
                }
                (index[id], n)
            })
            .collect();
        let tail = self.tail.map(|_| TAIL);
        DagState { nodes, root: ROOT, tail, next_id: order.len() as u32 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Operation;
    use crate::seqspec::sequential_run;

    fn build(def: StructureDef, keys: &[u64]) -> DagState {
        let ops: Vec<Operation> = keys.iter().map(|&k| Operation::insert(k)).collect();
        sequential_run(&def, &ops).0
    }

    fn keys_of(g: &DagState, set: &BTreeSet<ElementId>) -> Vec<Key> {
        let mut ks: Vec<Key> = set.iter().map(|id| g.node(*id).key).collect();
        ks.sort();
        ks
    }

    #[test]
    fn list_relevant_set_of_present_key() {
        let g = build(StructureDef::SortedList, &[1, 3]);
        let v = g.relevant_set(&StructureDef::SortedList, 3);
        // node 3, its predecessor 1 and its successor (the tail)
        assert_eq!(keys_of(&g, &v), vec![Key::Fin(1), Key::Fin(3), Key::PosInf]);
    }

    #[test]
    fn relevant_set_of_root_child() {
        let g = build(StructureDef::SortedList, &[4]);
        let v = g.relevant_set(&StructureDef::SortedList, 4);
        assert_eq!(keys_of(&g, &v), vec![Key::NegInf, Key::Fin(4), Key::PosInf]);
        let g = build(StructureDef::Bst, &[4]);
        let v = g.relevant_set(&StructureDef::Bst, 4);
        assert_eq!(keys_of(&g, &v), vec![Key::NegInf, Key::Fin(4)]);
    }

    #[test]
    fn bst_relevant_set() {
        let g = build(StructureDef::Bst, &[2, 1, 3]);
        let v = g.relevant_set(&StructureDef::Bst, 3);
        assert_eq!(keys_of(&g, &v), vec![Key::Fin(2), Key::Fin(3)]);
        // absent key 4 attaches below 3
        let v = g.relevant_set(&StructureDef::Bst, 4);
        assert_eq!(keys_of(&g, &v), vec![Key::Fin(2), Key::Fin(3)]);
    }

    #[test]
    fn list_relevant_graph_of_largest_key_is_whole_list() {
        let g = build(StructureDef::SortedList, &[1, 2, 3]);
        let r = g.relevant_graph(&StructureDef::SortedList, 3);
        assert_eq!(r.reachable(), g.reachable());
        let g1 = build(StructureDef::SortedList, &[5]);
        let r1 = g1.relevant_graph(&StructureDef::SortedList, 5);
        assert_eq!(r1.reachable().len(), 3);
        let b = build(StructureDef::Bst, &[5]);
        assert_eq!(b.relevant_graph(&StructureDef::Bst, 5).reachable().len(), 2);
    }

    /// Brute-force path enumeration: every node on some root path to a
    /// relevant node.
    fn path_nodes(g: &DagState, targets: &BTreeSet<ElementId>) -> BTreeSet<ElementId> {
        fn walk(g: &DagState, at: ElementId, path: &mut Vec<ElementId>, t: &BTreeSet<ElementId>, out: &mut BTreeSet<ElementId>) {
            path.push(at);
            if t.contains(&at) {
                out.extend(path.iter().copied());
            }
            for n in g.node(at).targets() {
                walk(g, n, path, t, out);
            }
            path.pop();
        }
        let mut out = BTreeSet::new();
        walk(g, g.root, &mut Vec::new(), targets, &mut out);
        out
    }

    #[test]
    fn skiplist_relevant_graph_matches_path_enumeration() {
        let def = StructureDef::skiplist(2, 3);
        let g = build(def, &[1, 2, 3, 4]);
        assert!(g.respects_order(&def) && g.is_acyclic());
        for k in 1..=5 {
            let v = g.relevant_set(&def, k);
            let r = g.relevant_graph(&def, k);
            assert_eq!(r.reachable(), path_nodes(&g, &v), "key {k}");
        }
    }

    #[test]
    fn canonical_form_ignores_identities() {
        let def = StructureDef::SortedList;
        let a = build(def, &[1, 2]);
        let ops = [Operation::insert(2), Operation::insert(9), Operation::insert(1), Operation::delete(9)];
        let b = sequential_run(&def, &ops).0;
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(b.canonicalized().canonical(), b.canonical());
        assert_ne!(a.canonical(), build(def, &[1]).canonical());
    }
}
