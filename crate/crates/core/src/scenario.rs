//! Scenario files and the reports produced from them.
//!
//! ```json
//! {"structure": "sorted-list", "setup": [{"op": "insert", "key": 3}],
//!  "concurrent": [{"proc": 1, "op": "insert", "args": [1]}],
//!  "schedule": [{"proc": 1, "kind": "oi"}, ...] | "enumerate",
//!  "impl": "hoh", "seed": 7, "budget": 10000}
//! ```
//!
//! Without a schedule the scenario is a seeded free run.

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::checkers::{check_linearizable, check_safe_strict, check_strictly_serializable, CheckResult, LsOracle};
use crate::error::{Error, Result};
use crate::fixtures::{self, Fixture};
use crate::metric::{accepted_set, compare, lsl_set, optimality_gap, universe, LslOracle};
use crate::model::{History, OpName, Operation, ProcId, Schedule, SETUP_PROC};
use crate::scheduler::{drive, free_run, DriveResult, Workload};
use crate::seqspec::StructureDef;
use crate::sync::{Impl, Validation};

pub const DEFAULT_BUDGET: usize = 100_000;
pub const DEFAULT_MAX_RESTARTS: usize = 1_000;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcurrentOp {
    pub proc: u32,
    pub op: OpName,
    pub args: Vec<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Mode(String),
    Slots(Value),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    /// Which element name holds which key, for readers of the file.
    #[serde(default)]
    pub layout: Option<String>,
    pub structure: StructureDef,
    #[serde(default)]
    pub setup: Vec<Operation>,
    pub concurrent: Vec<ConcurrentOp>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(rename = "impl")]
    pub imp: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub report: Option<ReportFormat>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// What a scenario asks for once validated.
#[derive(Clone, Debug)]
pub enum Mode {
    Drive(Schedule),
    Enumerate,
    FreeRun,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        s.workload()?;
        s.implementation()?;
        s.mode()?;
        Ok(s)
    }

    pub fn workload(&self) -> Result<Workload> {
        let mut concurrent = Vec::new();
        for c in &self.concurrent {
            let op = match (c.op, c.args.as_slice()) {
                (OpName::Insert, [k]) => Operation::insert(*k),
                (OpName::Insert, [k, v]) => Operation::insert_value(*k, *v),
                (OpName::Delete, [k]) => Operation::delete(*k),
                (OpName::Find, [k]) => Operation::find(*k),
                (op, args) => return Err(Error::Input(format!("bad arguments {args:?} for {op:?}"))),
            };
            concurrent.push((ProcId(c.proc), op));
        }
        let w = Workload::new(self.structure, self.setup.clone(), concurrent);
        w.validate()?;
        if w.concurrent.is_empty() {
            return Err(Error::Input("no concurrent operations".into()));
        }
        Ok(w)
    }

    pub fn implementation(&self) -> Result<Impl> {
        Impl::by_name(&self.imp)
    }

    pub fn mode(&self) -> Result<Mode> {
        match &self.schedule {
            None => Ok(Mode::FreeRun),
            Some(ScheduleSpec::Mode(m)) if m == "enumerate" => Ok(Mode::Enumerate),
            Some(ScheduleSpec::Mode(m)) => Err(Error::Input(format!("unknown schedule mode `{m}`"))),
            Some(ScheduleSpec::Slots(v)) => Ok(Mode::Drive(Schedule::from_json_value(v)?)),
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "scenario".into())
    }
}

/// Settings the command line may override.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Accepted schedule, finished free run or complete exploration.
    Done,
    Rejected,
    /// Exploration stopped at the budget.
    Partial,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub status: Status,
    pub json: Value,
    pub text: Vec<String>,
}

impl Report {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => serde_json::to_string_pretty(&self.json).expect("report json") + "\n",
            ReportFormat::Text => self.text.iter().map(|l| format!("{l}\n")).collect(),
        }
    }
}

fn yes_no(r: &CheckResult) -> &'static str {
    if r.holds() {
        "YES"
    } else if r.refuted() {
        "NO"
    } else {
        "UNKNOWN"
    }
}

fn concurrent_responses(h: &History) -> Vec<Value> {
    h.high_level()
        .ops
        .iter()
        .filter(|o| o.proc != SETUP_PROC)
        .map(|o| json!({"proc": o.proc, "op": o.op.to_string(), "response": o.response}))
        .collect()
}

/// Linearizability, LSL and strict serializability of an exported history,
/// plus safe-strict serializability of the execution.
fn history_checks(def: StructureDef, exec: &History) -> (Value, Vec<String>) {
    let h = exec.exported();
    let lin = check_linearizable(&h.high_level());
    let lsl = LsOracle::new(def, crate::checkers::Bounds::for_history(&h)).check_lsl(&h);
    let strict = check_strictly_serializable(&h, &def);
    let safe = check_safe_strict(exec, &def);
    let mut text = vec![format!(
        "linearizable: {}; LSL: {}; strict-serializable: {}; safe-strict: {}",
        yes_no(&lin),
        yes_no(&lsl),
        yes_no(&strict),
        yes_no(&safe)
    )];
    if let Some(cycle) = &strict.cycle {
        text.push(format!("cycle: {}", cycle_text(cycle)));
    }
    let json = json!({
        "linearizable": lin.to_json(),
        "lsl": lsl.to_json(),
        "strict": strict.to_json(),
        "safe_strict": safe.to_json(),
    });
    (json, text)
}

fn cycle_text(cycle: &[crate::checkers::Edge]) -> String {
    cycle
        .iter()
        .map(|e| {
            let why: Vec<String> = e.reasons.iter().map(|r| format!("{r:?}")).collect();
            format!("{} -[{}]-> {}", e.from, why.join(","), e.to)
        })
        .collect::<Vec<_>>()
        .join("  ")
}

pub fn run(s: &Scenario, o: Overrides) -> Result<Report> {
    let w = s.workload()?;
    let imp = s.implementation()?;
    let budget = o.budget.or(s.budget).unwrap_or(DEFAULT_BUDGET);
    let mut report = match s.mode()? {
        Mode::Drive(sigma) => run_drive(imp, &w, &sigma)?,
        Mode::Enumerate => run_explore(imp, &w, budget)?,
        Mode::FreeRun => run_free(imp, &w, o.seed.or(s.seed).unwrap_or(0))?,
    };
    report.text.insert(0, format!("scenario {} ({} on {})", s.label(), imp, w.structure.name()));
    if let Value::Object(m) = &mut report.json {
        m.insert("scenario".into(), json!(s.label()));
        m.insert("impl".into(), json!(imp.name()));
        m.insert("workload".into(), w.to_json_value());
    }
    Ok(report)
}

/// Forces exhaustive exploration regardless of the schedule field.
pub fn explore(s: &Scenario, o: Overrides) -> Result<Report> {
    let mut s = s.clone();
    s.schedule = Some(ScheduleSpec::Mode("enumerate".into()));
    run(&s, o)
}

fn run_drive(imp: Impl, w: &Workload, sigma: &Schedule) -> Result<Report> {
    let r = drive(imp, w, sigma)?;
    let (checks, check_text) = history_checks(w.structure, r.history());
    let mut text = vec![format!("schedule: {}", sigma.notation())];
    let (status, json) = match &r {
        DriveResult::Accepted(h) => {
            let resp: Vec<String> = r.responses().iter().map(|(op, b)| format!("{op}={b}")).collect();
            text.push(format!("{imp}: ACCEPTED ({})", resp.join(", ")));
            (
                Status::Done,
                json!({"mode": "drive", "verdict": "accepted", "responses": concurrent_responses(h), "checks": checks}),
            )
        }
        DriveResult::Rejected { reason, slot, history } => {
            let at = sigma.slots.get(*slot).map_or("end of schedule".to_string(), |s| s.notation());
            text.push(format!("{imp}: REJECTED ({} at slot {slot}, {at})", reason.name()));
            (
                Status::Rejected,
                json!({
                    "mode": "drive",
                    "verdict": "rejected",
                    "reason": reason.name(),
                    "slot": slot,
                    "responses": concurrent_responses(history),
                    "checks": checks,
                }),
            )
        }
    };
    text.extend(check_text);
    let mut json = json;
    json["schedule"] = json!(sigma.notation());
    Ok(Report { status, json, text })
}

fn run_free(imp: Impl, w: &Workload, seed: u64) -> Result<Report> {
    let run = free_run(imp, w, seed, DEFAULT_MAX_RESTARTS)?;
    let (checks, check_text) = history_checks(w.structure, &run.execution);
    let resp: Vec<String> = run
        .history
        .high_level()
        .ops
        .iter()
        .filter(|o| o.proc != SETUP_PROC && o.response.is_some())
        .map(|o| format!("{}={}", o.op, o.response.unwrap_or_default()))
        .collect();
    let mut text = vec![format!("{imp}: COMPLETED seed {seed}, {} restarts ({})", run.restarts, resp.join(", "))];
    text.extend(check_text);
    let json = json!({
        "mode": "free-run",
        "seed": seed,
        "restarts": run.restarts,
        "responses": concurrent_responses(&run.history),
        "schedule": crate::scheduler::concurrent_schedule(&run.history).notation(),
        "checks": checks,
    });
    Ok(Report { status: Status::Done, json, text })
}

const ALL_IMPLS: [Impl; 3] = [Impl::Hoh, Impl::Stm(Validation::PerRead), Impl::Stm(Validation::CommitOnly)];

fn run_explore(imp: Impl, w: &Workload, budget: usize) -> Result<Report> {
    let all = universe(w, budget)?;
    let lsl = lsl_set(&all, &LslOracle::default_bounds(w));
    let mine = accepted_set(imp, w, budget)?;
    let gap = optimality_gap(&mine, &lsl, 5);
    let partial = all.partial || mine.partial;
    let mut text = vec![format!(
        "{imp}: accepted {} of {} schedules; LSL {}; ratio {:.4}{}",
        mine.len(),
        all.len(),
        lsl.len(),
        gap.ratio,
        if partial { " (partial: budget reached)" } else { "" }
    )];
    for m in &gap.missing {
        text.push(format!("  rejected LSL schedule: {m}"));
    }
    let mut comparisons = serde_json::Map::new();
    for other in ALL_IMPLS.into_iter().filter(|o| *o != imp) {
        let theirs = accepted_set(other, w, budget)?;
        let c = compare(&mine, &theirs)?;
        let rel = serde_json::to_value(c.relation).expect("relation");
        text.push(format!("vs {other}: {}", rel.as_str().unwrap_or_default()));
        if let Some(s) = &c.left_only {
            text.push(format!("  only {imp}: {}", s.schedule.notation()));
        }
        if let Some(s) = &c.right_only {
            text.push(format!("  only {other}: {}", s.schedule.notation()));
        }
        comparisons.insert(other.name().into(), c.to_json());
    }
    let json = json!({
        "mode": "explore",
        "total": all.len(),
        "accepted": mine.len(),
        "lsl": lsl.len(),
        "undecided": lsl.undecided,
        "ratio": gap.ratio,
        "partial": partial,
        "witnesses": gap.missing,
        "comparisons": comparisons,
    });
    Ok(Report { status: if partial { Status::Partial } else { Status::Done }, json, text })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Thm2,
    Thm3,
}

impl Figure {
    pub fn by_name(name: &str) -> Result<Figure> {
        match name {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "thm2" => Ok(Figure::Thm2),
            "thm3" => Ok(Figure::Thm3),
            other => Err(Error::Input(format!("unknown figure `{other}`"))),
        }
    }
}

/// Outcome of re-running a canned construction; `holds` is false when any
/// expected verdict differs.
#[derive(Clone, Debug)]
pub struct Reproduction {
    pub holds: bool,
    pub json: Value,
    pub text: Vec<String>,
}

struct Claims {
    holds: bool,
    text: Vec<String>,
    items: Vec<Value>,
}

impl Claims {
    fn claim(&mut self, what: String, ok: bool) {
        self.holds &= ok;
        self.text.push(format!("{what}{}", if ok { "" } else { "  [MISMATCH]" }));
        self.items.push(json!({"claim": what, "holds": ok}));
    }
}

fn verdict(r: &DriveResult) -> &'static str {
    if r.is_accepted() {
        "ACCEPTED"
    } else {
        "REJECTED"
    }
}

fn stm() -> Impl {
    Impl::Stm(Validation::PerRead)
}

pub fn reproduce(fig: Figure) -> Result<Reproduction> {
    let mut c = Claims { holds: true, text: Vec::new(), items: Vec::new() };
    match fig {
        Figure::Fig2 => {
            let a = fixtures::fig2a();
            let h = drive(Impl::Hoh, &a.workload, &a.schedule)?;
            let s = drive(stm(), &a.workload, &a.schedule)?;
            let both_false = s.responses().iter().all(|(_, b)| !b) && s.responses().len() == 2;
            c.text.push(format!("σ = {}", a.schedule.notation()));
            c.claim(
                format!("hoh: {} σ; stm: {} σ, all responses false: {}", verdict(&h), verdict(&s), both_false),
                !h.is_accepted() && s.is_accepted() && both_false,
            );
            let b = fixtures::fig2b();
            let s2 = drive(stm(), &b.workload, &b.schedule)?;
            let aborted = matches!(s2, DriveResult::Rejected { reason: crate::scheduler::RejectReason::Aborted, .. });
            let mut oracle = LslOracle::new(&b.workload, &LslOracle::default_bounds(&b.workload));
            let lsl = oracle.contains(&b.schedule);
            c.text.push(format!("σ′ = {}", b.schedule.notation()));
            c.claim(
                format!("stm: {} σ′ (aborted: {aborted}); σ′ LSL: {}", verdict(&s2), lsl_word(lsl)),
                aborted && lsl == Some(false),
            );
        }
        Figure::Fig3 => {
            let f = fixtures::fig3();
            c.text.push(format!("σ₀ = {}", f.schedule.notation()));
            fig3_claims(&mut c, &f, "");
        }
        Figure::Thm2 => {
            for def in StructureDef::all() {
                let (present, absent) = fixtures::thm2(def);
                let h = drive(Impl::Hoh, &present.workload, &present.schedule)?;
                let s = drive(stm(), &present.workload, &present.schedule)?;
                let s2 = drive(stm(), &absent.workload, &absent.schedule)?;
                c.claim(
                    format!("{}: hoh: {} σ; stm: {} σ, {} σ′", def.name(), verdict(&h), verdict(&s), verdict(&s2)),
                    !h.is_accepted() && s.is_accepted() && !s2.is_accepted(),
                );
            }
        }
        Figure::Thm3 => {
            for def in StructureDef::all() {
                let f = fixtures::thm3(def)?;
                c.text.push(format!("{}: σ = {}", def.name(), f.schedule.notation()));
                fig3_claims(&mut c, &f, def.name());
            }
        }
    }
    let json = json!({"figure": format!("{fig:?}").to_lowercase(), "holds": c.holds, "claims": c.items});
    Ok(Reproduction { holds: c.holds, json, text: c.text })
}

fn lsl_word(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "YES",
        Some(false) => "NO",
        None => "UNKNOWN",
    }
}

/// HOH accepts, the history is LSL but not strictly serializable, and the
/// optimistic implementation rejects.
fn fig3_claims(c: &mut Claims, f: &Fixture, tag: &str) {
    let prefix = if tag.is_empty() { String::new() } else { format!("{tag}: ") };
    let r = match drive(Impl::Hoh, &f.workload, &f.schedule) {
        Ok(r) => r,
        Err(e) => {
            c.claim(format!("{prefix}hoh: error {e}"), false);
            return;
        }
    };
    let h = r.history().exported();
    let strict = check_strictly_serializable(&h, &f.workload.structure);
    let lsl = LsOracle::new(f.workload.structure, crate::checkers::Bounds::for_history(&h)).check_lsl(&h);
    let resp: Vec<String> = r.responses().iter().map(|(op, b)| format!("{op}={b}")).collect();
    c.claim(
        format!(
            "{prefix}hoh: {} σ₀ ({}); strict-serializable: {}; LSL: {}",
            verdict(&r),
            resp.join(", "),
            yes_no(&strict),
            yes_no(&lsl)
        ),
        r.is_accepted() && strict.refuted() && lsl.holds(),
    );
    if let Some(cycle) = &strict.cycle {
        c.claim(format!("{prefix}cycle of {} edges: {}", cycle.len(), cycle_text(cycle)), cycle.len() == 3);
    }
    if let Ok(s) = drive(stm(), &f.workload, &f.schedule) {
        c.claim(format!("{prefix}stm: {} σ₀", verdict(&s)), !s.is_accepted());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"structure": "sorted-list", "concurrent": [{"proc": 1, "op": "find", "args": [1]}], "impl": "hoh"}"#;

    #[test]
    fn parses_minimal_free_run() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert!(matches!(s.mode().unwrap(), Mode::FreeRun));
        let r = run(&s, Overrides::default()).unwrap();
        assert_eq!(r.status, Status::Done);
        assert_eq!(r.json["mode"], "free-run");
    }

    #[test]
    fn rejects_unknown_fields_and_bad_args() {
        assert!(Scenario::parse(&MINIMAL.replace("\"impl\"", "\"implementation\"")).is_err());
        assert!(Scenario::parse(&MINIMAL.replace("[1]", "[1, 2, 3]")).is_err());
        assert!(Scenario::parse(&MINIMAL.replace("hoh", "locks")).is_err());
        assert!(Scenario::parse(&MINIMAL.replace("\"proc\": 1", "\"proc\": 0")).is_err());
    }

    #[test]
    fn single_op_exploration_is_optimal() {
        let s = Scenario::parse(&MINIMAL.replace("\"impl\"", "\"schedule\": \"enumerate\", \"impl\"")).unwrap();
        let r = run(&s, Overrides::default()).unwrap();
        assert_eq!(r.json["ratio"], 1.0);
        assert_eq!(r.json["total"], 1);
    }
}
