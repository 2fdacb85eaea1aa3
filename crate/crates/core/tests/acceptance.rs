//! Acceptance criteria 1 to 9. Each test prints one PASS/FAIL line; run with
//! `cargo test -p lsl-workbench --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lsl_workbench::checkers::{
    check_compositionality, check_linearizable, check_safe_strict, check_strictly_serializable, Bounds, LsOracle,
};
use lsl_workbench::fixtures;
use lsl_workbench::metric::{accepted_set, compare, Comparison, LslOracle, Relation};
use lsl_workbench::model::{
    ElementId, Event, EventKind, HighLevelHistory, History, OpId, Operation, ProcId, SETUP_PROC,
};
use lsl_workbench::scenario::{self, Figure, Overrides, ReportFormat, Scenario};
use lsl_workbench::scheduler::{drive, enumerate, free_run, DriveResult, RejectReason, Workload};
use lsl_workbench::seqspec::{DictionaryType, StructureDef};
use lsl_workbench::sync::{Impl, Validation};

const STM: Impl = Impl::Stm(Validation::PerRead);

fn report(n: u32, what: &str, ok: bool, detail: String) {
    println!("criterion {n} [{what}]: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn responses(r: &DriveResult) -> Vec<bool> {
    r.responses().into_iter().map(|(_, b)| b).collect()
}

#[test]
fn criterion_1_identical_inserts_separate_locking_from_optimism() {
    let mut fails = Vec::new();
    let a = fixtures::fig2a();
    let hoh = drive(Impl::Hoh, &a.workload, &a.schedule).unwrap();
    let stm = drive(STM, &a.workload, &a.schedule).unwrap();
    if hoh.is_accepted() {
        fails.push("hoh accepted the failing-insert schedule".to_string());
    }
    if !stm.is_accepted() || responses(&stm) != [false, false] {
        fails.push(format!("stm on the failing-insert schedule: {:?}", responses(&stm)));
    }
    let b = fixtures::fig2b();
    match drive(STM, &b.workload, &b.schedule).unwrap() {
        DriveResult::Rejected { reason: RejectReason::Aborted, .. } => {}
        other => fails.push(format!("stm on the lost-update schedule: accepted={}", other.is_accepted())),
    }
    let mut lsl = LslOracle::new(&b.workload, &LslOracle::default_bounds(&b.workload));
    if lsl.contains(&b.schedule) != Some(false) {
        fails.push("lost-update schedule judged LS-linearizable".into());
    }
    for def in StructureDef::all() {
        let (present, absent) = fixtures::thm2(def);
        let h = drive(Impl::Hoh, &present.workload, &present.schedule).unwrap();
        let s = drive(STM, &present.workload, &present.schedule).unwrap();
        let s2 = drive(STM, &absent.workload, &absent.schedule).unwrap();
        let aborted = matches!(s2, DriveResult::Rejected { reason: RejectReason::Aborted, .. });
        if h.is_accepted() || !s.is_accepted() || responses(&s) != [false, false] || !aborted {
            fails.push(format!("{}: construction verdicts differ", def.name()));
        }
    }
    report(1, "identical inserts", fails.is_empty(), format!("{} mismatches {:?}", fails.len(), fails));
    assert!(fails.is_empty(), "{fails:?}");
}

#[test]
fn criterion_2_lock_coupled_find_is_not_serializable() {
    let mut fails = Vec::new();
    let f = fixtures::fig3();
    let r = drive(Impl::Hoh, &f.workload, &f.schedule).unwrap();
    if !r.is_accepted() || responses(&r) != [true, true, true] {
        fails.push(format!("hoh on the find/insert/insert schedule: {:?}", responses(&r)));
    }
    let h = r.history().exported();
    let strict = check_strictly_serializable(&h, &f.workload.structure);
    let cycle_len = strict.cycle.as_ref().map_or(0, Vec::len);
    if !strict.refuted() || cycle_len != 3 {
        fails.push(format!("strict serializability: {:?}, cycle of {cycle_len}", strict.verdict));
    }
    let lsl = LsOracle::new(f.workload.structure, Bounds::for_history(&h)).check_lsl(&h);
    if !lsl.holds() {
        fails.push(format!("LSL: {:?}", lsl.note));
    }
    for def in StructureDef::all() {
        let f = fixtures::thm3(def).unwrap();
        let r = drive(Impl::Hoh, &f.workload, &f.schedule).unwrap();
        let strict = check_strictly_serializable(&r.history().exported(), &def);
        if !r.is_accepted() || !strict.refuted() {
            fails.push(format!("{}: find/delete/delete accepted={} strict={:?}", def.name(), r.is_accepted(), strict.verdict));
        }
    }
    report(2, "lock-coupled find", fails.is_empty(), format!("3-edge cycle found: {}; {fails:?}", cycle_len == 3));
    assert!(fails.is_empty(), "{fails:?}");
}

fn family_comparison(ws: &[Workload]) -> Comparison {
    ws.iter()
        .map(|w| {
            let s = accepted_set(STM, w, 1_000_000).unwrap();
            let h = accepted_set(Impl::Hoh, w, 1_000_000).unwrap();
            assert!(!s.partial && !h.partial);
            compare(&s, &h).unwrap()
        })
        .reduce(Comparison::combine)
        .unwrap()
}

#[test]
fn criterion_3_locking_and_optimism_are_incomparable() {
    let mut w1 = vec![fixtures::fig2a().workload];
    w1.extend(StructureDef::all().into_iter().map(|d| fixtures::thm2(d).0.workload));
    let w2: Vec<Workload> = StructureDef::all().into_iter().map(|d| fixtures::thm3(d).unwrap().workload).collect();
    let c1 = family_comparison(&w1);
    let c2 = family_comparison(&w2);
    // on W2 only the hoh-only direction is claimed
    let hoh_only_on_w2 = c2.right_only.is_some();
    let overall = c1.clone().combine(c2.clone());
    let revalid = c1.revalidate(STM, Impl::Hoh).unwrap()
        && c2.revalidate(STM, Impl::Hoh).unwrap()
        && overall.revalidate(STM, Impl::Hoh).unwrap();
    let ok = c1.relation == Relation::LeftStrictlyMore
        && hoh_only_on_w2
        && overall.relation == Relation::Incomparable
        && revalid;
    report(
        3,
        "incomparability",
        ok,
        format!("W1 {:?}, W2 {:?}, overall {:?}, witnesses re-drive: {revalid}", c1.relation, c2.relation, overall.relation),
    );
    assert!(ok);
}

fn key_ops() -> Vec<Operation> {
    (1..=4).flat_map(|k| [Operation::insert(k), Operation::delete(k), Operation::find(k)]).collect()
}

const SWEEP_SETUPS: [&[u64]; 4] = [&[], &[1, 3], &[2, 4], &[1, 2, 3, 4]];
const PAIR_BUDGET: usize = 100_000;
const TRIPLE_BUDGET: usize = 2_000;
const TRIPLES_PER_SETUP: usize = 30;

/// Every ordered pair of operations, and a seeded sample of triples with a
/// capped number of leaves, over each setup.
fn sweep_workloads() -> Vec<(Workload, usize)> {
    let ops = key_ops();
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for setup in SWEEP_SETUPS {
        for a in &ops {
            for b in &ops {
                let conc = vec![(ProcId(1), *a), (ProcId(2), *b)];
                out.push((Workload::new(StructureDef::SortedList, Workload::inserts(setup), conc), PAIR_BUDGET));
            }
        }
        for _ in 0..TRIPLES_PER_SETUP {
            let conc = (1..=3).map(|p| (ProcId(p), *ops.choose(&mut rng).unwrap())).collect();
            out.push((Workload::new(StructureDef::SortedList, Workload::inserts(setup), conc), TRIPLE_BUDGET));
        }
    }
    out
}

#[test]
fn criterion_4_accepted_schedules_are_ls_linearizable() {
    let (mut checked, mut violations, mut hoh_aborts, mut capped) = (0usize, 0usize, 0usize, 0usize);
    for (w, budget) in sweep_workloads() {
        let mut oracle = LslOracle::new(&w, &LslOracle::default_bounds(&w));
        for imp in [Impl::Hoh, STM] {
            let mut accepted = Vec::new();
            let r = enumerate(imp, &w, budget, &mut |leaf| {
                if leaf.is_accepted() {
                    accepted.push(leaf.schedule.clone());
                }
                if imp == Impl::Hoh && matches!(leaf.outcome, lsl_workbench::scheduler::LeafOutcome::Rejected(RejectReason::Aborted)) {
                    hoh_aborts += 1;
                }
            })
            .unwrap();
            capped += usize::from(!r.complete);
            for s in &accepted {
                checked += 1;
                if oracle.contains(s) != Some(true) {
                    violations += 1;
                }
            }
        }
    }
    let ok = violations == 0 && hoh_aborts == 0;
    report(
        4,
        "soundness sweep",
        ok,
        format!("{checked} accepted schedules checked, {violations} violations, {capped} capped enumerations, {hoh_aborts} hoh aborts"),
    );
    assert!(ok);
}

fn random_workload(def: StructureDef, rng: &mut ChaCha8Rng, keys: u64, obj: u8) -> Workload {
    let mut setup: Vec<u64> = (1..=keys).filter(|_| rng.gen_bool(0.5)).collect();
    setup.shuffle(rng);
    let procs = rng.gen_range(2..=4);
    let mut conc = Vec::new();
    for p in 1..=procs {
        for _ in 0..rng.gen_range(1..=2) {
            let k = rng.gen_range(1..=keys);
            let op = match rng.gen_range(0..3) {
                0 => Operation::insert(k),
                1 => Operation::delete(k),
                _ => Operation::find(k),
            };
            conc.push((ProcId(p), op.on(obj)));
        }
    }
    let setup = setup.into_iter().map(|k| Operation::insert(k).on(obj)).collect();
    Workload::new(def, setup, conc)
}

const FREE_RUNS: u64 = 1000;
const KEYS: u64 = 5;

#[test]
fn criterion_5_lock_coupling_free_runs_are_ls_linearizable() {
    let mut fails = 0;
    let mut aborts = 0;
    let mut undecided = 0;
    let universe: Vec<u64> = (1..=KEYS).collect();
    for def in StructureDef::all() {
        let mut oracle = LsOracle::new(def, Bounds::for_keys(&universe));
        assert!(oracle.is_closed(), "{def}");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..FREE_RUNS {
            let w = random_workload(def, &mut rng, KEYS, 0);
            let run = free_run(Impl::Hoh, &w, seed, 0).unwrap();
            aborts += run.restarts;
            let r = oracle.check_lsl(&run.history);
            if r.refuted() {
                fails += 1;
            } else if !r.holds() {
                undecided += 1;
            }
        }
    }
    let ok = fails == 0 && aborts == 0 && undecided == 0;
    report(
        5,
        "lock-coupling correctness",
        ok,
        format!("{} runs, {fails} not LSL, {undecided} undecided, {aborts} aborts", 3 * FREE_RUNS),
    );
    assert!(ok);
}

#[test]
fn criterion_6_optimistic_executions_are_safe_strict() {
    let (mut execs, mut unsafe_execs, mut counter, mut undecided) = (0usize, 0usize, 0usize, 0usize);
    for (w, budget) in sweep_workloads() {
        let mut lsl = LsOracle::new(w.structure, LslOracle::default_bounds(&w));
        let mut leaves = Vec::new();
        enumerate(STM, &w, budget, &mut |leaf| leaves.push(leaf.execution())).unwrap();
        for ex in &leaves {
            execs += 1;
            let s = check_safe_strict(ex, &w.structure);
            if !s.holds() {
                unsafe_execs += 1;
                continue;
            }
            let r = lsl.check_lsl(&ex.exported());
            if r.refuted() {
                counter += 1;
            } else if !r.holds() {
                undecided += 1;
            }
        }
    }
    // commit-time-only validation lets a doomed find observe an inconsistent snapshot
    let d = fixtures::doomed_read();
    let co = drive(Impl::Stm(Validation::CommitOnly), &d.workload, &d.schedule).unwrap();
    let co_check = check_safe_strict(co.history(), &d.workload.structure);
    let cond2 = co_check.refuted() && co_check.culprit.is_some() && co_check.note.as_deref().is_some_and(|n| n.contains("(2)"));
    let pr = drive(STM, &d.workload, &d.schedule).unwrap();
    let per_read_safe = check_safe_strict(pr.history(), &d.workload.structure).holds();
    let ok = unsafe_execs == 0 && counter == 0 && undecided == 0 && cond2 && per_read_safe;
    report(
        6,
        "optimistic safety",
        ok,
        format!(
            "{execs} executions, {unsafe_execs} not safe-strict, {counter} safe-strict but not LSL, {undecided} undecided; commit-only fails condition (2): {cond2}"
        ),
    );
    assert!(ok);
}

/// Shifts operation, element and process identities so two histories can
/// share one timeline.
fn relabel(h: &History, op_shift: u32, elem_shift: u32, proc_shift: u32) -> Vec<Event> {
    let shift_ref = |r: &lsl_workbench::model::ElemRef| {
        let mut r = r.clone();
        r.id = ElementId(r.id.0 + elem_shift);
        r
    };
    let shift_node = |n: &lsl_workbench::model::Node| {
        let mut n = n.clone();
        for e in n.edges.iter_mut().flatten() {
            *e = ElementId(e.0 + elem_shift);
        }
        n
    };
    h.events
        .iter()
        .map(|e| {
            let kind = match &e.kind {
                EventKind::ReadInvoke(r) => EventKind::ReadInvoke(shift_ref(r)),
                EventKind::ReadResponse(r, n) => EventKind::ReadResponse(shift_ref(r), n.as_ref().map(shift_node)),
                EventKind::WriteInvoke(r, n) => EventKind::WriteInvoke(shift_ref(r), shift_node(n)),
                EventKind::WriteResponse(r, ok) => EventKind::WriteResponse(shift_ref(r), *ok),
                k => k.clone(),
            };
            let proc = if e.proc == SETUP_PROC { SETUP_PROC } else { ProcId(e.proc.0 + proc_shift) };
            Event { seq: 0, proc, op: OpId(e.op.0 + op_shift), kind }
        })
        .collect()
}

fn compose(a: &History, b: &History, rng: &mut ChaCha8Rng) -> History {
    let a = relabel(a, 0, 0, 0);
    let b = relabel(b, 1_000, 100_000, 100);
    let (sa, ca): (Vec<Event>, Vec<Event>) = a.into_iter().partition(|e| e.proc == SETUP_PROC);
    let (sb, cb): (Vec<Event>, Vec<Event>) = b.into_iter().partition(|e| e.proc == SETUP_PROC);
    let mut events: Vec<Event> = sa.into_iter().chain(sb).collect();
    let (mut i, mut j) = (0, 0);
    while i < ca.len() || j < cb.len() {
        let take_a = j == cb.len() || (i < ca.len() && rng.gen_bool(0.5));
        if take_a {
            events.push(ca[i].clone());
            i += 1;
        } else {
            events.push(cb[j].clone());
            j += 1;
        }
    }
    for (n, e) in events.iter_mut().enumerate() {
        e.seq = n;
    }
    History::from_events(events)
}

const COMPOSED: u64 = 500;

#[test]
fn criterion_7_ls_linearizability_composes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut broken, mut whole_ok, mut undecided) = (0, 0, 0);
    let defs = StructureDef::all();
    for seed in 0..COMPOSED {
        let (da, db) = (defs[seed as usize % 3], defs[(seed as usize / 3) % 3]);
        let wa = random_workload(da, &mut rng, 3, 0);
        let wb = random_workload(db, &mut rng, 3, 1);
        let ha = free_run(Impl::Hoh, &wa, seed, 0).unwrap().history;
        let hb = free_run(Impl::Hoh, &wb, seed + COMPOSED, 0).unwrap().history;
        let h = compose(&ha, &hb, &mut rng);
        assert!(h.is_well_formed());
        let r = check_compositionality(&h, (da, 0), (db, 1));
        if !r.implication_holds() {
            broken += 1;
        }
        if r.whole.holds() {
            whole_ok += 1;
        } else if !r.whole.refuted() {
            undecided += 1;
        }
    }
    let ok = broken == 0 && undecided == 0;
    report(
        7,
        "compositionality",
        ok,
        format!("{COMPOSED} composed histories, {broken} implication failures, {whole_ok} LSL compositions, {undecided} undecided"),
    );
    assert!(ok);
}

/// Linearizable iff some real-time-respecting permutation of the complete
/// operations plus a subset of the pending ones replays legally.
fn naive_linearizable(hh: &HighLevelHistory) -> bool {
    let n = hh.ops.len();
    let pending: Vec<usize> = (0..n).filter(|&i| hh.ops[i].response.is_none()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let mut chosen: Vec<usize> = (0..n).filter(|&i| hh.ops[i].response.is_some()).collect();
        chosen.extend(pending.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &i)| i));
        if permutations(&chosen).iter().any(|perm| legal(hh, perm)) {
            return true;
        }
    }
    false
}

fn legal(hh: &HighLevelHistory, perm: &[usize]) -> bool {
    for (x, &a) in perm.iter().enumerate() {
        if perm[x + 1..].iter().any(|&b| hh.precedes(b, a)) {
            return false;
        }
    }
    let ops: Vec<Operation> = perm.iter().map(|&i| hh.ops[i].op).collect();
    let (_, out) = DictionaryType::fold(&ops);
    perm.iter().zip(out).all(|(&i, r)| hh.ops[i].response.is_none_or(|want| want == r))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// One marker sequence per distinct real-time order over `n` operations,
/// where `complete[i]` says whether operation `i` responds.
fn interval_orders(complete: &[bool]) -> Vec<Vec<(usize, bool)>> {
    fn rec(complete: &[bool], state: &mut Vec<u8>, seq: &mut Vec<(usize, bool)>, out: &mut Vec<Vec<(usize, bool)>>) {
        let mut any = false;
        for i in 0..complete.len() {
            let next = match state[i] {
                0 => Some(false),
                1 if complete[i] => Some(true),
                _ => None,
            };
            if let Some(is_resp) = next {
                any = true;
                state[i] += 1;
                seq.push((i, is_resp));
                rec(complete, state, seq, out);
                seq.pop();
                state[i] -= 1;
            }
        }
        if !any {
            out.push(seq.clone());
        }
    }
    let mut all = Vec::new();
    rec(complete, &mut vec![0; complete.len()], &mut Vec::new(), &mut all);
    let mut seen = BTreeSet::new();
    all.into_iter()
        .filter(|markers| {
            let pos = |i: usize, r: bool| markers.iter().position(|m| *m == (i, r));
            let n = complete.len();
            let rel: Vec<bool> = (0..n * n)
                .map(|x| {
                    let (a, b) = (x / n, x % n);
                    matches!((pos(a, true), pos(b, false)), (Some(ra), Some(ib)) if ra < ib)
                })
                .collect();
            seen.insert(rel)
        })
        .collect()
}

fn multisets(n: usize, k: usize, from: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    (from..n)
        .flat_map(|i| {
            multisets(n, k - 1, i).into_iter().map(move |mut m| {
                m.insert(0, i);
                m
            })
        })
        .collect()
}

fn multinomial(parts: &[usize]) -> usize {
    let mut total = 0;
    let mut acc: u128 = 1;
    for &p in parts {
        for i in 1..=p {
            total += 1;
            acc = acc * total as u128 / i as u128;
        }
    }
    acc as usize
}

#[test]
fn criterion_8_checkers_are_exact() {
    let ops: Vec<Operation> = (1..=3).flat_map(|k| [Operation::insert(k), Operation::delete(k), Operation::find(k)]).collect();
    let (mut histories, mut disagreements, mut linearizable) = (0usize, 0usize, 0usize);
    for n in 1..=4usize {
        // three response choices per op (true, false, pending) up to three ops
        let choices: Vec<Option<bool>> =
            if n <= 3 { vec![Some(true), Some(false), None] } else { vec![Some(true), Some(false)] };
        let mut resp_vectors = vec![Vec::new()];
        for _ in 0..n {
            resp_vectors = resp_vectors
                .into_iter()
                .flat_map(|v: Vec<Option<bool>>| {
                    choices.iter().map(move |c| {
                        let mut v = v.clone();
                        v.push(*c);
                        v
                    })
                })
                .collect();
        }
        let mut orders: BTreeMap<Vec<bool>, Vec<Vec<(usize, bool)>>> = BTreeMap::new();
        for m in multisets(ops.len(), n, 0) {
            for resp in &resp_vectors {
                let complete: Vec<bool> = resp.iter().map(Option::is_some).collect();
                let markers = orders.entry(complete.clone()).or_insert_with(|| interval_orders(&complete));
                let hops: Vec<(Operation, Option<bool>)> = m.iter().zip(resp).map(|(&i, r)| (ops[i], *r)).collect();
                for mk in markers.iter() {
                    let hh = HighLevelHistory::from_markers(mk, &hops);
                    let fast = check_linearizable(&hh);
                    let slow = naive_linearizable(&hh);
                    histories += 1;
                    linearizable += usize::from(slow);
                    if fast.holds() != slow || fast.inconclusive {
                        disagreements += 1;
                    }
                }
            }
        }
    }
    // conflict-free workloads: interleaving counts follow the multinomial
    let counts = [
        (vec![], vec![Operation::find(1), Operation::find(2)]),
        (vec![1, 2, 3], vec![Operation::find(2), Operation::find(3)]),
        (vec![1], vec![Operation::find(1), Operation::find(1), Operation::find(5)]),
    ];
    let mut count_fails = Vec::new();
    for (setup, finds) in counts {
        let conc: Vec<(ProcId, Operation)> =
            finds.iter().enumerate().map(|(i, o)| (ProcId(i as u32 + 1), *o)).collect();
        let w = Workload::new(StructureDef::SortedList, Workload::inserts(&setup), conc);
        let lens: Vec<usize> = finds
            .iter()
            .map(|f| {
                let solo = Workload::new(StructureDef::SortedList, Workload::inserts(&setup), vec![(ProcId(1), *f)]);
                enumerate(Impl::Bare, &solo, 10, &mut |_| {}).unwrap().accepted.values().next().unwrap().len()
            })
            .collect();
        let expect = multinomial(&lens);
        for imp in [Impl::Bare, Impl::Hoh, STM] {
            let r = enumerate(imp, &w, 1_000_000, &mut |_| {}).unwrap();
            if r.total != expect || r.accepted.len() != expect {
                count_fails.push(format!("{imp} {lens:?}: {} leaves, {} accepted, expected {expect}", r.total, r.accepted.len()));
            }
        }
    }
    let small = multinomial(&[3, 3]) == 20 && multinomial(&[3, 2]) == 10;
    let ok = disagreements == 0 && count_fails.is_empty() && small;
    report(
        8,
        "checker exactness",
        ok,
        format!("{histories} histories ({linearizable} linearizable), {disagreements} disagreements; counts {count_fails:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_9_reports_are_deterministic() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut differing = Vec::new();
    for f in &files {
        let s = Scenario::parse(&std::fs::read_to_string(f).unwrap()).unwrap();
        let o = Overrides { seed: Some(9), budget: None };
        let a = scenario::run(&s, o).unwrap().render(ReportFormat::Json);
        let b = scenario::run(&s, o).unwrap().render(ReportFormat::Json);
        if a != b {
            differing.push(f.display().to_string());
        }
    }
    for fig in [Figure::Fig2, Figure::Fig3, Figure::Thm2, Figure::Thm3] {
        if scenario::reproduce(fig).unwrap().json != scenario::reproduce(fig).unwrap().json {
            differing.push(format!("{fig:?}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for def in StructureDef::all() {
        let w = random_workload(def, &mut rng, 4, 0);
        for imp in [Impl::Hoh, STM] {
            let a = free_run(imp, &w, 99, 100).unwrap().execution.to_json();
            let b = free_run(imp, &w, 99, 100).unwrap().execution.to_json();
            if a != b {
                differing.push(format!("free run {def} {imp}"));
            }
        }
    }
    let ok = differing.is_empty() && files.len() >= 10;
    report(9, "determinism", ok, format!("{} scenario files, differing: {differing:?}", files.len()));
    assert!(ok);
}
