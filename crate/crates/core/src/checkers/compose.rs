use crate::model::{History, ObjectId};
use crate::seqspec::{ComposedDictionary, StructureDef};

use super::{check_linearizable_with, Bounds, CheckResult, LsOracle};

/// LS-linearizability of a two-object history and of each projection.
#[derive(Clone, Debug)]
pub struct CompositionReport {
    pub left: CheckResult,
    pub right: CheckResult,
    pub whole: CheckResult,
}

impl CompositionReport {
    /// False only for a counterexample: both components decided LSL while
    /// the composition is decided not to be.
    pub fn implication_holds(&self) -> bool {
        !(self.left.holds() && self.right.holds() && self.whole.refuted())
    }
}

/// Checks `h|left`, `h|right` and `h` itself. Every operation of the
/// composition is matched against the sequential executions of its own
/// component, and the high-level history against the product dictionary.
pub fn check_compositionality(
    h: &History,
    left: (StructureDef, ObjectId),
    right: (StructureDef, ObjectId),
) -> CompositionReport {
    let hl = h.restrict_to_object(left.1);
    let hr = h.restrict_to_object(right.1);
    let mut ol = LsOracle::new(left.0, Bounds::for_history(&hl));
    let mut or = LsOracle::new(right.0, Bounds::for_history(&hr));
    let left_r = ol.check_lsl(&hl);
    let right_r = or.check_lsl(&hr);

    let spec = ComposedDictionary { left: left.1, right: right.1 };
    let lin = check_linearizable_with(&h.high_level(), &spec);
    let whole = if !lin.holds() {
        lin
    } else {
        let mut result = lin;
        for (id, inst) in &h.ops {
            let oracle = if inst.op.obj == left.1 { &mut ol } else { &mut or };
            if oracle.explain(h, *id).is_none() {
                let mut r = if oracle.is_closed() {
                    CheckResult::fail(format!("no sequential witness for {id}"))
                } else {
                    CheckResult::unknown(format!("no witness for {id} within bounds"))
                };
                r.culprit = Some(*id);
                result = r;
                break;
            }
        }
        result
    };
    CompositionReport { left: left_r, right: right_r, whole }
}
