//! Deterministic drivers for step machines.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Event, History, OpId, Operation, ProcId, Schedule, Slot, SlotKind, SETUP_PROC};
use crate::seqspec::{sequential_run, DagState, StructureDef};
use crate::sync::{Impl, Shared, StepMachine, StepOutcome};

/// Setup operations run sequentially by [`SETUP_PROC`]; the concurrent
/// operations are the ones schedules talk about. A process may own several
/// concurrent operations, which it runs in list order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workload {
    pub structure: StructureDef,
    pub setup: Vec<Operation>,
    pub concurrent: Vec<(ProcId, Operation)>,
}

impl Workload {
    pub fn new(structure: StructureDef, setup: Vec<Operation>, concurrent: Vec<(ProcId, Operation)>) -> Self {
        Workload { structure, setup, concurrent }
    }

    /// `insert(k)` for each key.
    pub fn inserts(keys: &[u64]) -> Vec<Operation> {
        keys.iter().map(|&k| Operation::insert(k)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.concurrent.iter().any(|(p, _)| *p == SETUP_PROC) {
            return Err(Error::Input(format!("process {SETUP_PROC} is reserved for setup")));
        }
        Ok(())
    }

    pub fn procs(&self) -> Vec<ProcId> {
        let set: BTreeSet<ProcId> = self.concurrent.iter().map(|c| c.0).collect();
        set.into_iter().collect()
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "structure": self.structure,
            "setup": self.setup,
            "concurrent": self.concurrent.iter().map(|(p, op)| json!({"proc": p, "op": op})).collect::<Vec<_>>(),
        })
    }

    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json_value().to_string().as_bytes());
        hex::encode(&digest[..8])
    }

    /// The state reached by the setup.
    pub fn initial_state(&self) -> DagState {
        sequential_run(&self.structure, &self.setup).0
    }
}

#[derive(Clone, Debug)]
struct ProcRun {
    proc: ProcId,
    ops: Vec<(OpId, Operation)>,
    next: usize,
    machine: Option<StepMachine>,
}

/// Complete execution state; clone it to branch.
#[derive(Clone, Debug)]
pub struct World {
    pub imp: Impl,
    pub def: StructureDef,
    pub shared: Shared,
    procs: Vec<ProcRun>,
    events: Vec<Event>,
    next_op: u32,
    pub restarts: usize,
}

impl World {
    pub fn new(imp: Impl, w: &Workload) -> Result<World> {
        w.validate()?;
        let (g, _, h) = sequential_run(&w.structure, &w.setup);
        let mut next_op = w.setup.len() as u32;
        let mut procs: Vec<ProcRun> = Vec::new();
        for (p, op) in &w.concurrent {
            let id = OpId(next_op);
            next_op += 1;
            match procs.iter_mut().find(|r| r.proc == *p) {
                Some(r) => r.ops.push((id, *op)),
                None => procs.push(ProcRun { proc: *p, ops: vec![(id, *op)], next: 0, machine: None }),
            }
        }
        procs.sort_by_key(|r| r.proc);
        Ok(World { imp, def: w.structure, shared: Shared::new(&g), procs, events: h.events, next_op, restarts: 0 })
    }

    pub fn procs(&self) -> Vec<ProcId> {
        self.procs.iter().map(|r| r.proc).collect()
    }

    fn run_of(&mut self, p: ProcId) -> Result<&mut ProcRun> {
        self.procs
            .iter_mut()
            .find(|r| r.proc == p)
            .ok_or_else(|| Error::Input(format!("process {p} has no operations")))
    }

    pub fn has_work(&self, p: ProcId) -> bool {
        self.procs.iter().any(|r| r.proc == p && (r.machine.is_some() || r.next < r.ops.len()))
    }

    /// Processes with work left, in process order.
    pub fn active(&self) -> Vec<ProcId> {
        self.procs.iter().filter(|r| r.machine.is_some() || r.next < r.ops.len()).map(|r| r.proc).collect()
    }

    pub fn is_finished(&self) -> bool {
        self.active().is_empty()
    }

    fn ensure_machine(&mut self, p: ProcId) -> Result<()> {
        let (imp, def) = (self.imp, self.def);
        let run = self.run_of(p)?;
        if run.machine.is_none() {
            let Some((id, op)) = run.ops.get(run.next).copied() else {
                return Err(Error::Input(format!("process {p} has already finished")));
            };
            run.machine = Some(StepMachine::new(imp, def, p, id, op));
        }
        Ok(())
    }

    /// The slot the next step of `p` would occupy.
    pub fn peek(&mut self, p: ProcId) -> Result<Slot> {
        self.ensure_machine(p)?;
        let run = self.procs.iter().find(|r| r.proc == p).expect("known process");
        let m = run.machine.as_ref().expect("machine");
        let (kind, elem) = m.peek(&self.shared.store);
        let op = (kind == SlotKind::Invoke).then_some(m.op);
        Ok(Slot { proc: p, op_id: Some(m.id), kind, elem, op })
    }

    /// One step of `p`. Aborted machines stay in place until
    /// [`World::restart`].
    pub fn step(&mut self, p: ProcId) -> Result<StepOutcome> {
        self.ensure_machine(p)?;
        let idx = self.procs.iter().position(|r| r.proc == p).expect("known process");
        let run = &mut self.procs[idx];
        let m = run.machine.as_mut().expect("machine");
        if m.is_done() {
            return Err(Error::Input(format!("process {p} is aborted and must restart")));
        }
        let id = m.id;
        let mut kinds = Vec::new();
        let outcome = m.step(&mut self.shared, &mut kinds);
        for kind in kinds {
            self.events.push(Event { seq: self.events.len(), proc: p, op: id, kind });
        }
        if let StepOutcome::Finished(_) = outcome {
            run.machine = None;
            run.next += 1;
        }
        Ok(outcome)
    }

    /// Replaces the aborted machine of `p` by a fresh attempt.
    pub fn restart(&mut self, p: ProcId) -> Result<()> {
        let id = OpId(self.next_op);
        self.next_op += 1;
        self.restarts += 1;
        let idx = self.procs.iter().position(|r| r.proc == p).expect("known process");
        let old = self.procs[idx].machine.take().ok_or_else(|| Error::Input(format!("process {p} has no attempt")))?;
        old.abandon(&mut self.shared);
        self.procs[idx].machine = Some(old.restart(id));
        Ok(())
    }

    /// The execution so far, including setup and abort-marked steps.
    pub fn execution(&self) -> History {
        History::from_events(self.events.clone())
    }

    /// Runs `(process, steps)` pairs; `usize::MAX` steps means until the
    /// process has no work left.
    pub fn run_script(&mut self, script: &[(ProcId, usize)]) -> Result<()> {
        for &(p, n) in script {
            let mut k = 0;
            while k < n && self.has_work(p) {
                match self.step(p)? {
                    StepOutcome::Progressed | StepOutcome::Finished(_) => {}
                    other => return Err(Error::Input(format!("script step of {p} did not progress: {other:?}"))),
                }
                k += 1;
            }
        }
        Ok(())
    }
}

/// Schedule of the concurrent part of an execution.
pub fn concurrent_schedule(h: &History) -> Schedule {
    h.complete().schedule().without_process(SETUP_PROC)
}

/// Runs a choice script on the unsynchronized implementation and returns the
/// schedule it exhibits.
pub fn script_schedule(w: &Workload, script: &[(ProcId, usize)]) -> Result<Schedule> {
    let mut world = World::new(Impl::Bare, w)?;
    world.run_script(script)?;
    if !world.is_finished() {
        return Err(Error::Input("script leaves operations unfinished".into()));
    }
    Ok(concurrent_schedule(&world.execution()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    Blocked,
    Aborted,
    OrderMismatch,
}

impl RejectReason {
    pub fn name(&self) -> &'static str {
        match self {
            RejectReason::Blocked => "blocked",
            RejectReason::Aborted => "aborted",
            RejectReason::OrderMismatch => "order-mismatch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DriveResult {
    Accepted(History),
    Rejected { reason: RejectReason, slot: usize, history: History },
}

impl DriveResult {
    pub fn is_accepted(&self) -> bool {
        matches!(self, DriveResult::Accepted(_))
    }

    pub fn history(&self) -> &History {
        match self {
            DriveResult::Accepted(h) => h,
            DriveResult::Rejected { history, .. } => history,
        }
    }

    /// Responses of the complete concurrent operations, in invocation order.
    pub fn responses(&self) -> Vec<(Operation, bool)> {
        self.history()
            .high_level()
            .ops
            .iter()
            .filter(|o| o.proc != SETUP_PROC)
            .filter_map(|o| o.response.map(|r| (o.op, r)))
            .collect()
    }
}

/// Tries to realize `sigma` step by step.
pub fn drive(imp: Impl, w: &Workload, sigma: &Schedule) -> Result<DriveResult> {
    let mut world = World::new(imp, w)?;
    let procs = world.procs();
    for (i, slot) in sigma.slots.iter().enumerate() {
        if !procs.contains(&slot.proc) {
            return Err(Error::Input(format!("slot {i} names process {} outside the workload", slot.proc)));
        }
        if !world.has_work(slot.proc) {
            return Err(Error::Input(format!("slot {i} is for process {} which has finished", slot.proc)));
        }
        let reject = |reason, world: &World| DriveResult::Rejected { reason, slot: i, history: world.execution() };
        let next = world.peek(slot.proc)?;
        if next.kind != slot.kind || next.elem != slot.elem {
            return Ok(reject(RejectReason::OrderMismatch, &world));
        }
        match world.step(slot.proc)? {
            StepOutcome::Blocked(_) => return Ok(reject(RejectReason::Blocked, &world)),
            StepOutcome::Aborted(_) => return Ok(reject(RejectReason::Aborted, &world)),
            _ => {}
        }
    }
    if !world.is_finished() {
        return Ok(DriveResult::Rejected {
            reason: RejectReason::OrderMismatch,
            slot: sigma.len(),
            history: world.execution(),
        });
    }
    let h = world.execution();
    assert!(concurrent_schedule(&h).same_order(sigma), "accepted history must exhibit the schedule");
    Ok(DriveResult::Accepted(h))
}

/// One leaf of the interleaving tree.
#[derive(Clone, Debug)]
pub struct Leaf<'a> {
    pub schedule: Schedule,
    pub outcome: LeafOutcome,
    world: &'a World,
}

#[derive(Clone, Debug)]
pub enum LeafOutcome {
    Accepted,
    /// The last slot of the schedule could not be performed.
    Rejected(RejectReason),
}

impl Leaf<'_> {
    pub fn is_accepted(&self) -> bool {
        matches!(self.outcome, LeafOutcome::Accepted)
    }

    /// The execution up to this leaf, with abort marks.
    pub fn execution(&self) -> History {
        self.world.execution()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExplorationReport {
    pub total: usize,
    /// Hashes of accepted schedules with a representative each.
    pub accepted: BTreeMap<String, Schedule>,
    /// Every leaf hash with its verdict.
    pub verdicts: BTreeMap<String, bool>,
    /// False when the budget cut the exploration short.
    pub complete: bool,
}

/// Depth-first exploration of every interleaving. Branches stop at the first
/// blocked or aborted step. At most `budget` leaves are visited.
pub fn enumerate(
    imp: Impl,
    w: &Workload,
    budget: usize,
    visit: &mut dyn FnMut(&Leaf),
) -> Result<ExplorationReport> {
    let world = World::new(imp, w)?;
    let mut report = ExplorationReport { complete: true, ..Default::default() };
    let mut prefix = Vec::new();
    explore(world, &mut prefix, budget, &mut report, visit)?;
    Ok(report)
}

fn explore(
    world: World,
    prefix: &mut Vec<Slot>,
    budget: usize,
    report: &mut ExplorationReport,
    visit: &mut dyn FnMut(&Leaf),
) -> Result<()> {
    let active = world.active();
    for p in &active {
        if report.total >= budget {
            report.complete = false;
            return Ok(());
        }
        let mut next = world.clone();
        let slot = next.peek(*p)?;
        prefix.push(slot);
        let outcome = next.step(*p)?;
        let leaf = match outcome {
            StepOutcome::Blocked(_) => Some(LeafOutcome::Rejected(RejectReason::Blocked)),
            StepOutcome::Aborted(_) => Some(LeafOutcome::Rejected(RejectReason::Aborted)),
            _ if next.is_finished() => Some(LeafOutcome::Accepted),
            _ => None,
        };
        match leaf {
            Some(outcome) => {
                let leaf = Leaf { schedule: Schedule::new(prefix.clone()), outcome, world: &next };
                let hash = leaf.schedule.hash();
                report.total += 1;
                report.verdicts.insert(hash.clone(), leaf.is_accepted());
                if leaf.is_accepted() {
                    report.accepted.insert(hash, leaf.schedule.clone());
                }
                visit(&leaf);
            }
            None => explore(next, prefix, budget, report, visit)?,
        }
        prefix.pop();
    }
    Ok(())
}

/// Result of a randomized run.
#[derive(Clone, Debug)]
pub struct FreeRun {
    /// The exported history: abort-marked steps removed.
    pub history: History,
    /// The execution with abort marks.
    pub execution: History,
    pub restarts: usize,
}

/// Random interleaving. Blocked processes are retried, aborted operations
/// restart under a new identity.
pub fn free_run(imp: Impl, w: &Workload, seed: u64, max_restarts: usize) -> Result<FreeRun> {
    let mut world = World::new(imp, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocked: BTreeSet<ProcId> = BTreeSet::new();
    loop {
        let active = world.active();
        if active.is_empty() {
            break;
        }
        let ready: Vec<ProcId> = active.iter().copied().filter(|p| !blocked.contains(p)).collect();
        if ready.is_empty() {
            return Err(Error::Deadlock);
        }
        let p = ready[rng.gen_range(0..ready.len())];
        match world.step(p)? {
            StepOutcome::Blocked(_) => {
                blocked.insert(p);
            }
            StepOutcome::Aborted(_) => {
                if world.restarts >= max_restarts {
                    return Err(Error::RestartBudget(max_restarts));
                }
                world.restart(p)?;
                blocked.clear();
            }
            _ => blocked.clear(),
        }
    }
    let execution = world.execution();
    Ok(FreeRun { history: execution.exported(), execution, restarts: world.restarts })
}

/// Gives every process turns in round-robin order until all finish,
/// retrying blocked ones. Fails with [`Error::Deadlock`] if a full round
/// makes no progress.
pub fn round_robin(world: &mut World, max_restarts: usize) -> Result<()> {
    loop {
        let active = world.active();
        if active.is_empty() {
            return Ok(());
        }
        let mut progressed = false;
        for p in active {
            match world.step(p)? {
                StepOutcome::Blocked(_) => {}
                StepOutcome::Aborted(_) => {
                    if world.restarts >= max_restarts {
                        return Err(Error::RestartBudget(max_restarts));
                    }
                    world.restart(p)?;
                    progressed = true;
                }
                _ => progressed = true,
            }
        }
        if !progressed {
            return Err(Error::Deadlock);
        }
    }
}
