//! Decision procedures over histories.

mod compose;
mod linearizability;
mod local;
mod serializability;

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::model::{OpId, Operation};

pub use compose::{check_compositionality, CompositionReport};
pub use linearizability::{check_linearizable, check_linearizable_with};
pub use local::{check_locally_serializable, check_ls_linearizable, Bounds, LsOracle};
pub use serializability::{
    check_safe_strict, check_strictly_serializable, dependency_edges, Edge, EdgeReason,
};

/// Why an operation's local history is explained: the sequential
/// operations leading to the state it ran from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalWitness {
    pub state: usize,
    pub prefix: Vec<Operation>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckResult {
    pub verdict: bool,
    /// Bounds were hit before a decision; `verdict` is then false but means
    /// "unknown".
    pub inconclusive: bool,
    /// Linearization or serialization order.
    pub order: Option<Vec<OpId>>,
    pub local: Option<BTreeMap<OpId, LocalWitness>>,
    /// Dependency cycle proving a serializability violation.
    pub cycle: Option<Vec<Edge>>,
    /// Operation without a witness, for negative verdicts.
    pub culprit: Option<OpId>,
    pub note: Option<String>,
}

#[derive(Serialize)]
struct CheckJson<'a> {
    verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violation: Option<Value>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    inconclusive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

impl CheckResult {
    pub fn pass() -> Self {
        CheckResult { verdict: true, ..Default::default() }
    }

    pub fn fail(note: impl Into<String>) -> Self {
        CheckResult { verdict: false, note: Some(note.into()), ..Default::default() }
    }

    pub fn unknown(note: impl Into<String>) -> Self {
        CheckResult { verdict: false, inconclusive: true, note: Some(note.into()), ..Default::default() }
    }

    /// Definitely true.
    pub fn holds(&self) -> bool {
        self.verdict && !self.inconclusive
    }

    /// Definitely false.
    pub fn refuted(&self) -> bool {
        !self.verdict && !self.inconclusive
    }

    pub fn to_json(&self) -> Value {
        let mut witness = serde_json::Map::new();
        if let Some(order) = &self.order {
            witness.insert("order".into(), serde_json::to_value(order).expect("order"));
        }
        if let Some(local) = &self.local {
            let m: serde_json::Map<String, Value> = local
                .iter()
                .map(|(op, w)| (op.0.to_string(), serde_json::to_value(w).expect("local witness")))
                .collect();
            witness.insert("local".into(), Value::Object(m));
        }
        let violation = self.cycle.as_ref().map(|c| serde_json::json!({ "cycle": c }));
        let violation = match (violation, self.culprit) {
            (None, Some(op)) => Some(serde_json::json!({ "op": op })),
            (v, _) => v,
        };
        serde_json::to_value(CheckJson {
            verdict: self.verdict,
            witness: (!witness.is_empty()).then_some(Value::Object(witness)),
            violation,
            inconclusive: self.inconclusive,
            note: self.note.as_deref(),
        })
        .expect("check json")
    }
}
