//! The sequential side: the dictionary type, DAG states and the three
//! search structures compiled into resumable cursors.

mod cursor;
mod dag;
mod program;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::{ElementId, Key, Node, ObjectId, OpName, Operation};

pub use cursor::{Action, OpCursor};
pub use dag::{CanonicalState, DagState};
pub use program::{
    compile, dictionary_ops, enumerate_sequential_histories, is_legal_sequential,
    non_triviality_witness, reachable_states, sequential_run, solo_run, Reachable, Step,
    StepProgram, Witness,
};

pub const ROOT: ElementId = ElementId(0);
pub const TAIL: ElementId = ElementId(1);

/// A sequential specification usable by the linearizability checker.
pub trait SequentialSpec {
    type State: Clone + Eq + Hash + Ord + fmt::Debug;

    fn init(&self) -> Self::State;

    /// Applies `op`, returning the successor state and the response.
    fn apply(&self, state: &Self::State, op: &Operation) -> (Self::State, bool);
}

pub type AbstractState = BTreeMap<u64, u64>;

/// The dictionary type: `insert` fails iff the key is present, `delete`
/// succeeds iff it is present, `find` reports presence.
#[derive(Clone, Copy, Debug, Default)]
pub struct DictionaryType;

impl DictionaryType {
    pub fn apply(state: &AbstractState, op: &Operation) -> (AbstractState, bool) {
        let present = state.contains_key(&op.key);
        match op.name {
            OpName::Insert if !present => {
                let mut next = state.clone();
                next.insert(op.key, op.value);
                (next, true)
            }
            OpName::Insert => (state.clone(), false),
            OpName::Delete if present => {
                let mut next = state.clone();
                next.remove(&op.key);
                (next, true)
            }
            OpName::Delete => (state.clone(), false),
            OpName::Find => (state.clone(), present),
        }
    }

    pub fn fold<'a>(ops: impl IntoIterator<Item = &'a Operation>) -> (AbstractState, Vec<bool>) {
        let mut state = AbstractState::new();
        let mut out = Vec::new();
        for op in ops {
            let (next, r) = Self::apply(&state, op);
            state = next;
            out.push(r);
        }
        (state, out)
    }
}

impl SequentialSpec for DictionaryType {
    type State = AbstractState;

    fn init(&self) -> AbstractState {
        AbstractState::new()
    }

    fn apply(&self, state: &AbstractState, op: &Operation) -> (AbstractState, bool) {
        DictionaryType::apply(state, op)
    }
}

/// Product of two dictionaries; operations are routed by their object tag.
#[derive(Clone, Copy, Debug)]
pub struct ComposedDictionary {
    pub left: ObjectId,
    pub right: ObjectId,
}

impl SequentialSpec for ComposedDictionary {
    type State = (AbstractState, AbstractState);

    fn init(&self) -> Self::State {
        (AbstractState::new(), AbstractState::new())
    }

    fn apply(&self, state: &Self::State, op: &Operation) -> (Self::State, bool) {
        if op.obj == self.left {
            let (q, r) = DictionaryType::apply(&state.0, op);
            ((q, state.1.clone()), r)
        } else {
            assert_eq!(op.obj, self.right, "operation {op} belongs to neither component");
            let (q, r) = DictionaryType::apply(&state.1, op);
            ((state.0.clone(), q), r)
        }
    }
}

/// One of the three search structures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StructureDef {
    SortedList,
    Bst,
    /// Node heights come from a generator seeded by `(seed, key)`, so two
    /// identical inserts toss identical coins.
    Skiplist { max_level: usize, seed: u64 },
}

impl StructureDef {
    pub fn skiplist(max_level: usize, seed: u64) -> Self {
        StructureDef::Skiplist { max_level: max_level.max(1), seed }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StructureDef::SortedList => "sorted-list",
            StructureDef::Bst => "bst",
            StructureDef::Skiplist { .. } => "skiplist",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "sorted-list" => Some(StructureDef::SortedList),
            "bst" => Some(StructureDef::Bst),
            "skiplist" => Some(StructureDef::skiplist(3, 0)),
            _ => None,
        }
    }

    /// The three structures with the default skiplist parameters.
    pub fn all() -> [StructureDef; 3] {
        [StructureDef::SortedList, StructureDef::Bst, StructureDef::skiplist(3, 7)]
    }

    pub fn tail(&self) -> Option<ElementId> {
        match self {
            StructureDef::Bst => None,
            _ => Some(TAIL),
        }
    }

    pub fn levels(&self) -> usize {
        match self {
            StructureDef::Skiplist { max_level, .. } => *max_level,
            _ => 1,
        }
    }

    /// Height of the skiplist tower for `key`; 1 for the other structures.
    pub fn height(&self, key: u64) -> usize {
        match *self {
            StructureDef::Skiplist { max_level, seed } => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut h = 1;
                while h < max_level && rng.gen_bool(0.5) {
                    h += 1;
                }
                h
            }
            _ => 1,
        }
    }

    /// The empty structure: root (and tail) sentinels only.
    pub fn initial_state(&self) -> DagState {
        let mut nodes = BTreeMap::new();
        match self {
            StructureDef::Bst => {
                nodes.insert(ROOT, Node::new(Key::NegInf, 0, vec![None, None]));
            }
            _ => {
                nodes.insert(ROOT, Node::new(Key::NegInf, 0, vec![Some(TAIL); self.levels()]));
                nodes.insert(TAIL, Node::new(Key::PosInf, 0, vec![]));
            }
        }
        DagState::from_nodes(nodes, self.tail())
    }
}

impl fmt::Display for StructureDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureDef::Skiplist { max_level, seed } => {
                write!(f, "skiplist(max_level={max_level}, seed={seed})")
            }
            other => f.write_str(other.name()),
        }
    }
}

impl Serialize for StructureDef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StructureDef::Skiplist { max_level, seed } => {
                json!({"name": "skiplist", "max_level": max_level, "seed": seed}).serialize(s)
            }
            other => s.serialize_str(other.name()),
        }
    }
}

impl<'de> Deserialize<'de> for StructureDef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let (name, obj) = match &v {
            Value::String(s) => (s.as_str(), None),
            Value::Object(m) => (
                m.get("name").and_then(Value::as_str).ok_or_else(|| de::Error::custom("structure lacks name"))?,
                Some(m),
            ),
            _ => return Err(de::Error::custom("structure must be a name or an object")),
        };
        let def = StructureDef::by_name(name)
            .ok_or_else(|| de::Error::custom(format!("unknown structure `{name}`")))?;
        Ok(match (def, obj) {
            (StructureDef::Skiplist { max_level, seed }, Some(m)) => StructureDef::skiplist(
                m.get("max_level").and_then(Value::as_u64).map_or(max_level, |v| v as usize),
                m.get("seed").and_then(Value::as_u64).unwrap_or(seed),
            ),
            (def, _) => def,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(keys: &[u64]) -> AbstractState {
        keys.iter().map(|&k| (k, k)).collect()
    }

    #[test]
    fn dictionary_transitions() {
        let (q, r) = DictionaryType::apply(&state(&[1, 2, 3]), &Operation::insert(1));
        assert_eq!((q, r), (state(&[1, 2, 3]), false));
        let (q, r) = DictionaryType::apply(&state(&[]), &Operation::find(7));
        assert_eq!((q, r), (state(&[]), false));
        let (q, r) = DictionaryType::apply(&state(&[1, 3, 4]), &Operation::insert(5));
        assert_eq!((q, r), (state(&[1, 3, 4, 5]), true));
        let (q, r) = DictionaryType::apply(&state(&[1, 3]), &Operation::delete(3));
        assert_eq!((q, r), (state(&[1]), true));
        assert!(!DictionaryType::apply(&state(&[1]), &Operation::delete(2)).1);
    }

    #[test]
    fn structure_json_forms() {
        let s: StructureDef = serde_json::from_str(r#""bst""#).unwrap();
        assert_eq!(s, StructureDef::Bst);
        let s: StructureDef =
            serde_json::from_str(r#"{"name":"skiplist","max_level":2,"seed":9}"#).unwrap();
        assert_eq!(s, StructureDef::skiplist(2, 9));
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"max_level":2,"name":"skiplist","seed":9}"#);
        assert!(serde_json::from_str::<StructureDef>(r#""heap""#).is_err());
    }

    #[test]
    fn skiplist_heights_are_deterministic_and_capped() {
        let s = StructureDef::skiplist(3, 42);
        for k in 0..50 {
            let h = s.height(k);
            assert!((1..=3).contains(&h));
            assert_eq!(h, s.height(k));
        }
        assert!((0..50).all(|k| StructureDef::skiplist(1, 5).height(k) == 1));
    }
}
