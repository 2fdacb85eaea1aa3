//! Canned workloads and schedules.
//!
//! Schedules are produced by running a choice script on the unsynchronized
//! implementation, so the roles they name (`r`, `X<k>`, `t`) are exactly the
//! ones a sequential traversal touches. Element `X<k>` is the node holding
//! key `k`.

use crate::error::Result;
use crate::model::{Key, Operation, ProcId, Schedule, SlotKind};
use crate::scheduler::{concurrent_schedule, script_schedule, Workload, World};
use crate::seqspec::{non_triviality_witness, StructureDef, Witness};
use crate::sync::Impl;

const ALL: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub workload: Workload,
    pub schedule: Schedule,
}

fn p(n: u32) -> ProcId {
    ProcId(n)
}

fn build(name: &str, workload: Workload, script: &[(ProcId, usize)]) -> Fixture {
    let schedule = script_schedule(&workload, script).expect("fixture script runs on the bare implementation");
    Fixture { name: name.to_string(), workload, schedule }
}

/// Two failing inserts on `{1,2,3}` whose traversals overlap.
pub fn fig2a() -> Fixture {
    let w = Workload::new(
        StructureDef::SortedList,
        Workload::inserts(&[1, 2, 3]),
        vec![(p(1), Operation::insert(1)), (p(2), Operation::insert(2))],
    );
    build("fig2a", w, &[(p(1), 2), (p(2), 2), (p(1), 1), (p(2), 1), (p(1), 1), (p(2), ALL)])
}

/// Two succeeding inserts on `{3}` that both overwrite the root, followed by
/// a `find(1)` that sees only the later one.
pub fn fig2b() -> Fixture {
    let w = Workload::new(
        StructureDef::SortedList,
        Workload::inserts(&[3]),
        vec![(p(1), Operation::insert(1)), (p(2), Operation::insert(2)), (p(3), Operation::find(1))],
    );
    build(
        "fig2b",
        w,
        &[(p(1), 2), (p(2), 2), (p(1), 1), (p(2), 1), (p(1), 2), (p(2), 2), (p(1), 1), (p(2), 1), (p(3), ALL)],
    )
}

/// `find(5)` overlapping `insert(2)` and `insert(5)` on `{1,3,4}`: the find
/// misses 2 but sees 5.
pub fn fig3() -> Fixture {
    let w = Workload::new(
        StructureDef::SortedList,
        Workload::inserts(&[1, 3, 4]),
        vec![(p(1), Operation::find(5)), (p(2), Operation::insert(2)), (p(3), Operation::insert(5))],
    );
    build("fig3", w, &[(p(1), 4), (p(2), ALL), (p(3), ALL), (p(1), ALL)])
}

fn alternate(n: usize) -> Vec<(ProcId, usize)> {
    (0..n).flat_map(|_| [(p(1), 1), (p(2), 1)]).collect()
}

/// Two identical `insert(k)` stepping in lockstep: on `G'` (key present,
/// both fail) and on `G` (key absent, both write).
pub fn thm2(def: StructureDef) -> (Fixture, Fixture) {
    let wit = non_triviality_witness(&def);
    let ins = Operation::insert(wit.key);
    let present = Workload::new(def, wit.to_g_prime.clone(), vec![(p(1), ins), (p(2), ins)]);
    let absent = Workload::new(def, wit.to_g.clone(), vec![(p(1), ins), (p(2), ins)]);
    (
        build(&format!("thm2-present-{}", def.name()), present, &alternate(64)),
        build(&format!("thm2-absent-{}", def.name()), absent, &alternate(64)),
    )
}

/// The find/delete construction on `G'`: `find(k)` stops just before the
/// unique predecessor `a` of `k`; a second process then deletes an earlier
/// node `c` of the find's path and then `k`; the find completes with false.
pub fn thm3(def: StructureDef) -> Result<Fixture> {
    let wit: Witness = non_triviality_witness(&def);
    let g = {
        let (g, _, _) = crate::seqspec::sequential_run(&def, &wit.to_g_prime);
        g
    };
    let a_role = crate::model::Role::of_key(g.node(wit.source).key);
    // run the find alone up to the read of `a` to learn which nodes it reads
    let probe = Workload::new(def, wit.to_g_prime.clone(), vec![(p(1), Operation::find(wit.key))]);
    let mut world = World::new(Impl::Bare, &probe)?;
    loop {
        let next = world.peek(p(1))?;
        if next.kind == SlotKind::Read && next.elem.as_ref() == Some(&a_role) {
            break;
        }
        world.step(p(1))?;
    }
    let c = world
        .execution()
        .events
        .iter()
        .filter(|e| e.proc == p(1))
        .find_map(|e| match &e.kind {
            crate::model::EventKind::ReadResponse(x, Some(n)) => match n.key {
                Key::Fin(kc) if kc < wit.key && x.id != wit.source => Some(kc),
                _ => None,
            },
            _ => None,
        })
        .expect("the find reads a node before its predecessor");
    let w = Workload::new(
        def,
        wit.to_g_prime.clone(),
        vec![(p(1), Operation::find(wit.key)), (p(2), Operation::delete(c)), (p(2), Operation::delete(wit.key))],
    );
    let mut world = World::new(Impl::Bare, &w)?;
    loop {
        let next = world.peek(p(1))?;
        if next.kind == SlotKind::Read && next.elem.as_ref() == Some(&a_role) {
            break;
        }
        world.step(p(1))?;
    }
    world.run_script(&[(p(2), ALL), (p(1), ALL)])?;
    Ok(Fixture {
        name: format!("thm3-{}", def.name()),
        workload: w,
        schedule: concurrent_schedule(&world.execution()),
    })
}

/// An optimistic find whose early and late reads straddle two commits; only
/// commit-time validation lets it read on.
pub fn doomed_read() -> Fixture {
    let w = Workload::new(
        StructureDef::SortedList,
        Workload::inserts(&[1, 3, 5]),
        vec![(p(1), Operation::find(5)), (p(2), Operation::insert(2)), (p(3), Operation::insert(4))],
    );
    build("doomed-read", w, &[(p(1), 3), (p(2), ALL), (p(3), ALL), (p(1), ALL)])
}
