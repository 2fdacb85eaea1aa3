use std::collections::HashSet;

use crate::model::{HighLevelHistory, OpId};
use crate::seqspec::{DictionaryType, SequentialSpec};

use super::CheckResult;

const MAX_OPS: usize = 64;

/// Linearizability against the dictionary type.
pub fn check_linearizable(hh: &HighLevelHistory) -> CheckResult {
    check_linearizable_with(hh, &DictionaryType)
}

/// Depth-first search over linearization prefixes, memoizing failed
/// (linearized set, abstract state) pairs. Pending operations may be
/// linearized with any response or left out.
pub fn check_linearizable_with<S: SequentialSpec>(hh: &HighLevelHistory, spec: &S) -> CheckResult {
    let n = hh.ops.len();
    if n > MAX_OPS {
        return CheckResult::unknown(format!("{n} operations exceed the limit of {MAX_OPS}"));
    }
    // preds[i]: complete operations that precede i in real time
    let preds: Vec<u64> = (0..n)
        .map(|i| (0..n).filter(|&j| hh.precedes(j, i)).fold(0u64, |m, j| m | (1 << j)))
        .collect();
    let complete: u64 = (0..n).filter(|&i| hh.ops[i].response.is_some()).fold(0, |m, i| m | (1 << i));
    let mut search = Search { hh, spec, preds, complete, failed: HashSet::new(), order: Vec::new() };
    if search.dfs(0, spec.init()) {
        let order: Vec<OpId> = search.order.iter().map(|&i| hh.ops[i].id).collect();
        CheckResult { order: Some(order), ..CheckResult::pass() }
    } else {
        CheckResult::fail("no legal linearization")
    }
}

struct Search<'a, S: SequentialSpec> {
    hh: &'a HighLevelHistory,
    spec: &'a S,
    preds: Vec<u64>,
    complete: u64,
    failed: HashSet<(u64, S::State)>,
    order: Vec<usize>,
}

impl<S: SequentialSpec> Search<'_, S> {
    fn dfs(&mut self, done: u64, state: S::State) -> bool {
        if done & self.complete == self.complete {
            return true;
        }
        if self.failed.contains(&(done, state.clone())) {
            return false;
        }
        for i in 0..self.hh.ops.len() {
            let bit = 1u64 << i;
            if done & bit != 0 || self.preds[i] & !done != 0 {
                continue;
            }
            let hop = &self.hh.ops[i];
            let (next, r) = self.spec.apply(&state, &hop.op);
            if hop.response.is_some_and(|want| want != r) {
                continue;
            }
            self.order.push(i);
            if self.dfs(done | bit, next) {
                return true;
            }
            self.order.pop();
        }
        self.failed.insert((done, state));
        false
    }
}
