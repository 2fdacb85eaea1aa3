//! Schedule sets and the concurrency comparison between implementations.
//!
//! An implementation's concurrency on a workload is the set of schedules it
//! accepts. Sets are compared by inclusion; the LS-linearizable set is the
//! ceiling any correct implementation of the sequential code can reach.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use serde_json::{json, Value};

use crate::checkers::{check_linearizable, Bounds};
use crate::error::{Error, Result};
use crate::model::{HighLevelHistory, History, OpId, Operation, Role, Schedule, SlotKind, SETUP_PROC};
use crate::scheduler::{drive, enumerate, Workload};
use crate::seqspec::{reachable_states, sequential_run, solo_run, Reachable};
use crate::sync::{Impl, Validation};

/// A set of schedules of one workload, keyed by schedule hash.
#[derive(Clone, Debug)]
pub struct ScheduleSet {
    pub workload: Workload,
    pub fingerprint: String,
    pub schedules: BTreeMap<String, Schedule>,
    /// The enumeration stopped at its budget.
    pub partial: bool,
    /// Members the oracle could not decide within its bounds (LSL sets only).
    pub undecided: usize,
}

impl ScheduleSet {
    fn empty(w: &Workload) -> ScheduleSet {
        ScheduleSet {
            workload: w.clone(),
            fingerprint: w.fingerprint(),
            schedules: BTreeMap::new(),
            partial: false,
            undecided: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.schedules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedules.is_empty()
    }

    pub fn contains(&self, s: &Schedule) -> bool {
        self.schedules.contains_key(&s.hash())
    }

    pub fn is_subset(&self, other: &ScheduleSet) -> bool {
        self.schedules.keys().all(|h| other.schedules.contains_key(h))
    }

    /// Members of `self` missing from `other`.
    pub fn difference<'a>(&'a self, other: &'a ScheduleSet) -> impl Iterator<Item = &'a Schedule> + 'a {
        self.schedules.iter().filter(|(h, _)| !other.schedules.contains_key(*h)).map(|(_, s)| s)
    }
}

pub fn accepted_set(imp: Impl, w: &Workload, budget: usize) -> Result<ScheduleSet> {
    let report = enumerate(imp, w, budget, &mut |_| {})?;
    let mut set = ScheduleSet::empty(w);
    set.schedules = report.accepted;
    set.partial = !report.complete;
    Ok(set)
}

/// Every complete schedule exhibited by some implementation. The
/// unsynchronized one contributes all in-place interleavings; the optimistic
/// ones add schedules whose reads see buffered-write snapshots.
pub fn universe(w: &Workload, budget: usize) -> Result<ScheduleSet> {
    let mut set = ScheduleSet::empty(w);
    for imp in [Impl::Bare, Impl::Hoh, Impl::Stm(Validation::PerRead), Impl::Stm(Validation::CommitOnly)] {
        let a = accepted_set(imp, w, budget)?;
        set.partial |= a.partial;
        set.schedules.extend(a.schedules);
    }
    Ok(set)
}

type RoleSeq = Vec<(SlotKind, Option<Role>)>;

/// Decides membership of schedules in the LS-linearizable set of a workload.
///
/// Read values are unconstrained in an LSL history, so each operation may
/// pick its own local history: any solo run from a reachable state whose
/// access roles equal the operation's slots. What remains is to choose one
/// response per operation so that the high-level history linearizes.
pub struct LslOracle {
    workload: Workload,
    reach: Reachable,
    setup: Vec<(Operation, bool)>,
    solo: HashMap<(usize, Operation), (RoleSeq, bool)>,
    candidates: HashMap<(Operation, RoleSeq), BTreeSet<bool>>,
}

impl LslOracle {
    pub fn new(w: &Workload, bounds: &Bounds) -> LslOracle {
        let reach = reachable_states(&w.structure, &bounds.universe, bounds.max_ops, bounds.cap);
        let (_, responses, _) = sequential_run(&w.structure, &w.setup);
        LslOracle {
            workload: w.clone(),
            reach,
            setup: w.setup.iter().copied().zip(responses).collect(),
            solo: HashMap::new(),
            candidates: HashMap::new(),
        }
    }

    /// Bounds covering every key the workload mentions.
    pub fn default_bounds(w: &Workload) -> Bounds {
        Bounds::for_ops(w.setup.iter().chain(w.concurrent.iter().map(|c| &c.1)))
    }

    pub fn is_closed(&self) -> bool {
        self.reach.closed
    }

    fn solo(&mut self, state: usize, op: Operation) -> &(RoleSeq, bool) {
        let (def, reach) = (&self.workload.structure, &self.reach);
        self.solo.entry((state, op)).or_insert_with(|| {
            let mut g = reach.states[state].clone();
            let mut events = Vec::new();
            let resp = solo_run(def, &mut g, op, SETUP_PROC, OpId(0), &mut events);
            let roles = History::from_events(events).schedule().slots.into_iter().map(|s| (s.kind, s.elem)).collect();
            (roles, resp)
        })
    }

    fn candidates(&mut self, op: Operation, roles: RoleSeq) -> BTreeSet<bool> {
        if let Some(c) = self.candidates.get(&(op, roles.clone())) {
            return c.clone();
        }
        let mut out = BTreeSet::new();
        for s in 0..self.reach.states.len() {
            let (r, resp) = self.solo(s, op);
            if *r == roles {
                out.insert(*resp);
            }
        }
        self.candidates.insert((op, roles), out.clone());
        out
    }

    /// `Some(verdict)`, or `None` when an operation has no local witness and
    /// the state search was cut short.
    pub fn contains(&mut self, sigma: &Schedule) -> Option<bool> {
        // split the slots per operation; a process runs its operations in order
        let mut queue: BTreeMap<_, Vec<Operation>> = BTreeMap::new();
        for (p, op) in &self.workload.concurrent {
            queue.entry(*p).or_default().push(*op);
        }
        let mut ops: Vec<(Operation, RoleSeq)> = Vec::new();
        let mut current: BTreeMap<_, usize> = BTreeMap::new();
        let mut markers: Vec<(usize, bool)> = Vec::new();
        let s = self.setup.len();
        for i in 0..s {
            markers.push((i, false));
            markers.push((i, true));
        }
        for slot in &sigma.slots {
            if slot.kind == SlotKind::Invoke {
                let q = queue.get_mut(&slot.proc)?;
                if q.is_empty() {
                    return Some(false);
                }
                let op = q.remove(0);
                current.insert(slot.proc, ops.len());
                markers.push((s + ops.len(), false));
                ops.push((op, Vec::new()));
            }
            let &idx = current.get(&slot.proc)?;
            ops[idx].1.push((slot.kind, slot.elem.clone()));
            if slot.kind == SlotKind::Respond {
                markers.push((s + idx, true));
            }
        }
        let mut cands: Vec<Vec<bool>> = Vec::new();
        for (op, roles) in &ops {
            let c = self.candidates(*op, roles.clone());
            if c.is_empty() {
                return if self.reach.closed { Some(false) } else { None };
            }
            cands.push(c.into_iter().collect());
        }
        // try every combination of candidate responses
        let mut choice = vec![0usize; cands.len()];
        loop {
            let mut hl: Vec<(Operation, Option<bool>)> = self.setup.iter().map(|(o, r)| (*o, Some(*r))).collect();
            hl.extend(ops.iter().zip(&choice).enumerate().map(|(i, ((op, _), &c))| (*op, Some(cands[i][c]))));
            if check_linearizable(&HighLevelHistory::from_markers(&markers, &hl)).holds() {
                return Some(true);
            }
            let mut i = 0;
            loop {
                if i == choice.len() {
                    return Some(false);
                }
                choice[i] += 1;
                if choice[i] < cands[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }
}

/// The LS-linearizable members of `universe`.
pub fn lsl_set(universe: &ScheduleSet, bounds: &Bounds) -> ScheduleSet {
    let mut oracle = LslOracle::new(&universe.workload, bounds);
    let mut set = ScheduleSet::empty(&universe.workload);
    set.partial = universe.partial;
    for (h, s) in &universe.schedules {
        match oracle.contains(s) {
            Some(true) => {
                set.schedules.insert(h.clone(), s.clone());
            }
            Some(false) => {}
            None => set.undecided += 1,
        }
    }
    set
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Equal,
    LeftStrictlyMore,
    RightStrictlyMore,
    Incomparable,
}

impl Relation {
    fn from_diffs(left_only: bool, right_only: bool) -> Relation {
        match (left_only, right_only) {
            (false, false) => Relation::Equal,
            (true, false) => Relation::LeftStrictlyMore,
            (false, true) => Relation::RightStrictlyMore,
            (true, true) => Relation::Incomparable,
        }
    }
}

/// A schedule one side accepts and the other does not.
#[derive(Clone, Debug)]
pub struct SeparatingSchedule {
    pub workload: Workload,
    pub schedule: Schedule,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub relation: Relation,
    pub left_only: Option<SeparatingSchedule>,
    pub right_only: Option<SeparatingSchedule>,
    /// Some input set was truncated, so the relation is a lower bound.
    pub partial: bool,
}

pub fn compare(left: &ScheduleSet, right: &ScheduleSet) -> Result<Comparison> {
    if left.fingerprint != right.fingerprint {
        return Err(Error::FingerprintMismatch);
    }
    let pick = |a: &ScheduleSet, b: &ScheduleSet| {
        a.difference(b).next().map(|s| SeparatingSchedule { workload: a.workload.clone(), schedule: s.clone() })
    };
    let left_only = pick(left, right);
    let right_only = pick(right, left);
    Ok(Comparison {
        relation: Relation::from_diffs(left_only.is_some(), right_only.is_some()),
        left_only,
        right_only,
        partial: left.partial || right.partial,
    })
}

impl Comparison {
    /// Comparison over the union of two workload families.
    pub fn combine(self, other: Comparison) -> Comparison {
        let left_only = self.left_only.or(other.left_only);
        let right_only = self.right_only.or(other.right_only);
        Comparison {
            relation: Relation::from_diffs(left_only.is_some(), right_only.is_some()),
            left_only,
            right_only,
            partial: self.partial || other.partial,
        }
    }

    /// Re-drives both witnesses: each must be accepted by its own side and
    /// rejected by the other.
    pub fn revalidate(&self, left: Impl, right: Impl) -> Result<bool> {
        let check = |w: &Option<SeparatingSchedule>, yes: Impl, no: Impl| -> Result<bool> {
            match w {
                None => Ok(true),
                Some(s) => Ok(drive(yes, &s.workload, &s.schedule)?.is_accepted()
                    && !drive(no, &s.workload, &s.schedule)?.is_accepted()),
            }
        };
        Ok(check(&self.left_only, left, right)? && check(&self.right_only, right, left)?)
    }

    pub fn to_json(&self) -> Value {
        let wit = |w: &Option<SeparatingSchedule>| {
            w.as_ref().map(|s| json!({"workload": s.workload.to_json_value(), "schedule": s.schedule.notation()}))
        };
        json!({
            "relation": self.relation,
            "left_only": wit(&self.left_only),
            "right_only": wit(&self.right_only),
            "partial": self.partial,
        })
    }
}

/// How much of the LS-linearizable set an implementation accepts.
#[derive(Clone, Debug, Serialize)]
pub struct Gap {
    pub lsl: usize,
    pub accepted_lsl: usize,
    pub ratio: f64,
    /// LSL schedules the implementation rejects, as notation.
    pub missing: Vec<String>,
}

pub fn optimality_gap(accepted: &ScheduleSet, lsl: &ScheduleSet, max_witnesses: usize) -> Gap {
    let hit = lsl.schedules.keys().filter(|h| accepted.schedules.contains_key(*h)).count();
    Gap {
        lsl: lsl.len(),
        accepted_lsl: hit,
        ratio: if lsl.is_empty() { 1.0 } else { hit as f64 / lsl.len() as f64 },
        missing: lsl.difference(accepted).take(max_witnesses).map(Schedule::notation).collect(),
    }
}

/// Summary of one implementation on one workload.
#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub workload: Value,
    #[serde(rename = "impl")]
    pub imp: String,
    pub total: usize,
    pub accepted: usize,
    pub lsl: usize,
    pub ratio: f64,
    pub partial: bool,
    pub undecided: usize,
    pub witnesses: Vec<String>,
}

pub fn report(imp: Impl, w: &Workload, budget: usize, bounds: &Bounds) -> Result<MetricReport> {
    let all = universe(w, budget)?;
    let lsl = lsl_set(&all, bounds);
    let acc = accepted_set(imp, w, budget)?;
    let gap = optimality_gap(&acc, &lsl, 5);
    Ok(MetricReport {
        workload: w.to_json_value(),
        imp: imp.name().to_string(),
        total: all.len(),
        accepted: acc.len(),
        lsl: lsl.len(),
        ratio: gap.ratio,
        partial: all.partial || acc.partial,
        undecided: lsl.undecided,
        witnesses: gap.missing,
    })
}
