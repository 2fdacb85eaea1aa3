//! Executions, histories, high-level histories and schedules.
//!
//! Every record here is a plain value: histories are totally ordered event
//! sequences and all projections return fresh subsequences that keep the
//! original `seq` numbers of their events.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One shared element (a node of the search structure).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcId(pub u32);

/// Process that runs the sequential setup prefix of every workload.
pub const SETUP_PROC: ProcId = ProcId(0);

/// Component tag of an operation inside a composed object. Plain objects use 0.
pub type ObjectId = u8;

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op{}", self.0)
    }
}

impl fmt::Display for ProcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Node key. Sentinels sit outside the natural-number key universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Key {
    NegInf,
    Fin(u64),
    PosInf,
}

impl Serialize for Key {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Key::NegInf => s.serialize_str("-inf"),
            Key::Fin(k) => s.serialize_u64(*k),
            Key::PosInf => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Key {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "-inf" => Ok(Key::NegInf),
            Value::String(s) if s == "+inf" => Ok(Key::PosInf),
            Value::Number(n) => n
                .as_u64()
                .map(Key::Fin)
                .ok_or_else(|| de::Error::custom("key must be a natural number")),
            other => Err(de::Error::custom(format!("invalid key {other}"))),
        }
    }
}

/// Content of one element: its key, value and labeled outgoing edges.
///
/// Key and value never change after allocation; writes replace edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub key: Key,
    pub value: u64,
    pub edges: Vec<Option<ElementId>>,
}

impl Node {
    pub fn new(key: Key, value: u64, edges: Vec<Option<ElementId>>) -> Self {
        Node { key, value, edges }
    }

    pub fn targets(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.edges.iter().flatten().copied()
    }
}

/// Symbolic element name used by schedules: `r` (root), `t` (tail), `X<k>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Role(pub String);

impl Role {
    pub fn of_key(key: Key) -> Role {
        match key {
            Key::NegInf => Role("r".into()),
            Key::PosInf => Role("t".into()),
            Key::Fin(k) => Role(format!("X{k}")),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A concrete element together with the role it had when accessed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ElemRef {
    pub id: ElementId,
    pub role: Role,
}

impl ElemRef {
    pub fn new(id: ElementId, key: Key) -> Self {
        ElemRef { id, role: Role::of_key(key) }
    }

    fn encode(&self) -> String {
        format!("{}#{}", self.role, self.id.0)
    }

    fn decode(s: &str) -> Result<Self> {
        let (role, id) = s
            .split_once('#')
            .ok_or_else(|| Error::Format(format!("history element `{s}` lacks `#id`")))?;
        let id = id
            .parse()
            .map_err(|_| Error::Format(format!("bad element id in `{s}`")))?;
        Ok(ElemRef { id: ElementId(id), role: Role(role.to_string()) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpName {
    Insert,
    Delete,
    Find,
}

impl fmt::Display for OpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpName::Insert => "insert",
            OpName::Delete => "delete",
            OpName::Find => "find",
        })
    }
}

/// A dictionary operation with its arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Operation {
    #[serde(rename = "op")]
    pub name: OpName,
    pub key: u64,
    #[serde(default)]
    pub value: u64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub obj: ObjectId,
}

fn is_zero(v: &ObjectId) -> bool {
    *v == 0
}

impl Operation {
    /// `insert(k)` with the value defaulting to the key.
    pub fn insert(key: u64) -> Self {
        Operation { name: OpName::Insert, key, value: key, obj: 0 }
    }

    pub fn insert_value(key: u64, value: u64) -> Self {
        Operation { name: OpName::Insert, key, value, obj: 0 }
    }

    pub fn delete(key: u64) -> Self {
        Operation { name: OpName::Delete, key, value: 0, obj: 0 }
    }

    pub fn find(key: u64) -> Self {
        Operation { name: OpName::Find, key, value: 0, obj: 0 }
    }

    pub fn on(mut self, obj: ObjectId) -> Self {
        self.obj = obj;
        self
    }

    pub fn is_update(&self) -> bool {
        self.name != OpName::Find
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.obj != 0 {
            write!(f, "O{}.", self.obj)?;
        }
        write!(f, "{}({})", self.name, self.key)
    }
}

/// High-level response. `find` reports the node reference as `true`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Response {
    Bool(bool),
    Abort,
}

impl Response {
    fn to_json(self) -> Value {
        match self {
            Response::Bool(b) => Value::Bool(b),
            Response::Abort => Value::String("abort".into()),
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Bool(b) => Ok(Response::Bool(*b)),
            Value::String(s) if s == "abort" => Ok(Response::Abort),
            other => Err(Error::Format(format!("invalid response {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    OpInvoke(Operation),
    OpResponse(Response),
    ReadInvoke(ElemRef),
    /// `None` is the abort mark.
    ReadResponse(ElemRef, Option<Node>),
    WriteInvoke(ElemRef, Node),
    /// `false` is the abort mark.
    WriteResponse(ElemRef, bool),
}

impl EventKind {
    pub fn code(&self) -> &'static str {
        match self {
            EventKind::OpInvoke(_) => "oi",
            EventKind::OpResponse(_) => "or",
            EventKind::ReadInvoke(_) => "ri",
            EventKind::ReadResponse(..) => "rr",
            EventKind::WriteInvoke(..) => "wi",
            EventKind::WriteResponse(..) => "wr",
        }
    }

    pub fn elem(&self) -> Option<&ElemRef> {
        match self {
            EventKind::ReadInvoke(e)
            | EventKind::ReadResponse(e, _)
            | EventKind::WriteInvoke(e, _)
            | EventKind::WriteResponse(e, _) => Some(e),
            _ => None,
        }
    }

    pub fn is_abort_mark(&self) -> bool {
        matches!(
            self,
            EventKind::ReadResponse(_, None) | EventKind::WriteResponse(_, false)
        )
    }

    pub fn is_high_level(&self) -> bool {
        matches!(self, EventKind::OpInvoke(_) | EventKind::OpResponse(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub seq: usize,
    pub proc: ProcId,
    pub op: OpId,
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize)]
struct EventJson {
    seq: usize,
    proc: ProcId,
    op: OpId,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<Value>,
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let value = match &self.kind {
            EventKind::OpInvoke(op) => Some(serde_json::to_value(op).expect("operation json")),
            EventKind::OpResponse(r) => Some(r.to_json()),
            EventKind::ReadInvoke(_) => None,
            EventKind::ReadResponse(_, Some(n)) | EventKind::WriteInvoke(_, n) => {
                Some(serde_json::to_value(n).expect("node json"))
            }
            EventKind::ReadResponse(_, None) | EventKind::WriteResponse(_, false) => {
                Some(json!("abort"))
            }
            EventKind::WriteResponse(_, true) => Some(json!("ok")),
        };
        EventJson {
            seq: self.seq,
            proc: self.proc,
            op: self.op,
            kind: self.kind.code().to_string(),
            elem: self.kind.elem().map(ElemRef::encode),
            value,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = EventJson::deserialize(d)?;
        Event::from_json(raw).map_err(de::Error::custom)
    }
}

impl Event {
    fn from_json(raw: EventJson) -> Result<Self> {
        let elem = || -> Result<ElemRef> {
            ElemRef::decode(
                raw.elem
                    .as_deref()
                    .ok_or_else(|| Error::Format(format!("event {} lacks elem", raw.seq)))?,
            )
        };
        let value = || -> Result<&Value> {
            raw.value
                .as_ref()
                .ok_or_else(|| Error::Format(format!("event {} lacks value", raw.seq)))
        };
        let node = |v: &Value| -> Result<Node> {
            serde_json::from_value(v.clone()).map_err(|e| Error::Format(e.to_string()))
        };
        let kind = match raw.kind.as_str() {
            "oi" => EventKind::OpInvoke(
                serde_json::from_value(value()?.clone())
                    .map_err(|e| Error::Format(e.to_string()))?,
            ),
            "or" => EventKind::OpResponse(Response::from_json(value()?)?),
            "ri" => EventKind::ReadInvoke(elem()?),
            "rr" => {
                let v = value()?;
                let content = if v == "abort" { None } else { Some(node(v)?) };
                EventKind::ReadResponse(elem()?, content)
            }
            "wi" => EventKind::WriteInvoke(elem()?, node(value()?)?),
            "wr" => EventKind::WriteResponse(elem()?, value()? != "abort"),
            other => return Err(Error::Format(format!("unknown event kind `{other}`"))),
        };
        Ok(Event { seq: raw.seq, proc: raw.proc, op: raw.op, kind })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpStatus {
    Incomplete,
    Complete(bool),
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperationInstance {
    pub id: OpId,
    pub proc: ProcId,
    pub op: Operation,
    pub status: OpStatus,
}

impl OperationInstance {
    pub fn is_complete(&self) -> bool {
        matches!(self.status, OpStatus::Complete(_))
    }
}

/// A totally ordered record of events plus the table of operations they
/// belong to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<Event>,
    pub ops: BTreeMap<OpId, OperationInstance>,
}

impl History {
    /// Builds the operation table from the invocation and response events.
    pub fn from_events(events: Vec<Event>) -> Self {
        let mut ops = BTreeMap::new();
        for e in &events {
            match &e.kind {
                EventKind::OpInvoke(op) => {
                    ops.insert(
                        e.op,
                        OperationInstance { id: e.op, proc: e.proc, op: *op, status: OpStatus::Incomplete },
                    );
                }
                EventKind::OpResponse(r) => {
                    if let Some(inst) = ops.get_mut(&e.op) {
                        inst.status = match r {
                            Response::Bool(b) => OpStatus::Complete(*b),
                            Response::Abort => OpStatus::Aborted,
                        };
                    }
                }
                _ => {}
            }
        }
        History { events, ops }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn filtered(&self, keep: impl Fn(&Event) -> bool) -> History {
        let events: Vec<Event> = self.events.iter().filter(|e| keep(e)).cloned().collect();
        let ops = self
            .ops
            .iter()
            .filter(|(id, _)| events.iter().any(|e| e.op == **id))
            .map(|(id, inst)| (*id, inst.clone()))
            .collect();
        History { events, ops }
    }

    pub fn project_process(&self, p: ProcId) -> History {
        self.filtered(|e| e.proc == p)
    }

    /// Events of operations that returned a matching (non-abort) response.
    pub fn complete(&self) -> History {
        self.filtered(|e| self.ops.get(&e.op).is_some_and(OperationInstance::is_complete))
    }

    /// The local history of one operation, without any abort-marked step.
    pub fn restrict_to_operation(&self, op: OpId) -> History {
        let mut events: Vec<Event> = self.events.iter().filter(|e| e.op == op).cloned().collect();
        // an aborted read/write appears as an invocation followed by an abort mark
        let mut i = 0;
        while i < events.len() {
            if events[i].kind.is_abort_mark() {
                events.remove(i);
                if i > 0 && matches!(events[i - 1].kind, EventKind::ReadInvoke(_) | EventKind::WriteInvoke(..)) {
                    events.remove(i - 1);
                    i -= 1;
                }
            } else {
                i += 1;
            }
        }
        let ops = self.ops.get(&op).map(|inst| (op, inst.clone())).into_iter().collect();
        History { events, ops }
    }

    /// Events of operations tagged with component `obj`.
    pub fn restrict_to_object(&self, obj: ObjectId) -> History {
        self.filtered(|e| self.ops.get(&e.op).is_some_and(|i| i.op.obj == obj))
    }

    /// The history exported by an execution: abort-marked reads and writes
    /// (invocation and response) are dropped.
    pub fn exported(&self) -> History {
        let mut drop = vec![false; self.events.len()];
        for (i, e) in self.events.iter().enumerate() {
            if e.kind.is_abort_mark() {
                drop[i] = true;
                if let Some(j) = (0..i).rev().find(|&j| self.events[j].op == e.op) {
                    if matches!(self.events[j].kind, EventKind::ReadInvoke(_) | EventKind::WriteInvoke(..)) {
                        drop[j] = true;
                    }
                }
            }
        }
        let events = self
            .events
            .iter()
            .zip(drop)
            .filter(|(_, d)| !d)
            .map(|(e, _)| e.clone())
            .collect();
        History { events, ops: self.ops.clone() }
    }

    fn invocation(&self, op: OpId) -> Option<usize> {
        self.events
            .iter()
            .position(|e| e.op == op && matches!(e.kind, EventKind::OpInvoke(_)))
    }

    fn response(&self, op: OpId) -> Option<usize> {
        self.events
            .iter()
            .position(|e| e.op == op && matches!(e.kind, EventKind::OpResponse(_)))
    }

    /// Real-time order: the response of `a` occurs before the invocation of `b`.
    pub fn precedes(&self, a: OpId, b: OpId) -> bool {
        match (self.response(a), self.invocation(b)) {
            (Some(r), Some(i)) => r < i,
            _ => false,
        }
    }

    /// Erases read values and responses, keeping the order of invocations.
    pub fn schedule(&self) -> Schedule {
        let slots = self
            .events
            .iter()
            .filter_map(|e| {
                let (kind, elem, op) = match &e.kind {
                    EventKind::OpInvoke(op) => (SlotKind::Invoke, None, Some(*op)),
                    EventKind::ReadInvoke(r) => (SlotKind::Read, Some(r.role.clone()), None),
                    EventKind::WriteInvoke(r, _) => (SlotKind::Write, Some(r.role.clone()), None),
                    EventKind::OpResponse(_) => (SlotKind::Respond, None, None),
                    _ => return None,
                };
                Some(Slot { proc: e.proc, op_id: Some(e.op), kind, elem, op })
            })
            .collect();
        Schedule { slots }
    }

    /// No process starts a new operation or step before its previous one returned.
    pub fn is_well_formed(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum St {
            Idle,
            InOp(OpId),
            InStep(OpId),
        }
        let mut state: BTreeMap<ProcId, St> = BTreeMap::new();
        for e in &self.events {
            let st = state.entry(e.proc).or_insert(St::Idle);
            *st = match (*st, &e.kind) {
                (St::Idle, EventKind::OpInvoke(_)) => St::InOp(e.op),
                (St::InOp(o), EventKind::ReadInvoke(_) | EventKind::WriteInvoke(..)) if o == e.op => {
                    St::InStep(o)
                }
                (St::InStep(o), EventKind::ReadResponse(..) | EventKind::WriteResponse(..)) if o == e.op => {
                    St::InOp(o)
                }
                (St::InOp(o), EventKind::OpResponse(_)) if o == e.op => St::Idle,
                _ => return false,
            };
        }
        true
    }

    /// Invocations and responses of the non-aborted operations.
    pub fn high_level(&self) -> HighLevelHistory {
        let mut ops = Vec::new();
        for (pos, e) in self.events.iter().enumerate() {
            if let EventKind::OpInvoke(op) = &e.kind {
                let inst = &self.ops[&e.op];
                if inst.status == OpStatus::Aborted {
                    continue;
                }
                let ret = self.events[pos..]
                    .iter()
                    .position(|r| r.op == e.op && matches!(r.kind, EventKind::OpResponse(_)))
                    .map(|off| pos + off);
                let response = match inst.status {
                    OpStatus::Complete(b) => Some(b),
                    _ => None,
                };
                ops.push(HighLevelOp { id: e.op, proc: e.proc, op: *op, invoked: pos, returned: ret, response });
            }
        }
        HighLevelHistory { ops }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.events).expect("history json")
    }

    pub fn from_json(s: &str) -> Result<History> {
        let events: Vec<Event> =
            serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        Ok(History::from_events(events))
    }
}

/// One operation of a high-level history with its interval positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HighLevelOp {
    pub id: OpId,
    pub proc: ProcId,
    pub op: Operation,
    pub invoked: usize,
    pub returned: Option<usize>,
    pub response: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HighLevelHistory {
    pub ops: Vec<HighLevelOp>,
}

impl HighLevelHistory {
    /// Builds a high-level history from `(proc, op, response)` intervals expressed
    /// as an ordered list of invocation/response markers.
    pub fn from_markers(markers: &[(usize, bool)], ops: &[(Operation, Option<bool>)]) -> Self {
        let mut hl: Vec<HighLevelOp> = ops
            .iter()
            .enumerate()
            .map(|(i, (op, resp))| HighLevelOp {
                id: OpId(i as u32),
                proc: ProcId(i as u32 + 1),
                op: *op,
                invoked: usize::MAX,
                returned: None,
                response: *resp,
            })
            .collect();
        for (pos, &(idx, is_response)) in markers.iter().enumerate() {
            if is_response {
                hl[idx].returned = Some(pos);
            } else {
                hl[idx].invoked = pos;
            }
        }
        for o in &mut hl {
            if o.response.is_none() {
                o.returned = None;
            }
        }
        HighLevelHistory { ops: hl }
    }

    /// `a` responded before `b` was invoked.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.ops[a].returned.is_some_and(|r| r < self.ops[b].invoked)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotKind {
    Invoke,
    Read,
    Write,
    Respond,
}

impl SlotKind {
    pub fn code(self) -> &'static str {
        match self {
            SlotKind::Invoke => "oi",
            SlotKind::Read => "ri",
            SlotKind::Write => "wi",
            SlotKind::Respond => "or",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "oi" => SlotKind::Invoke,
            "ri" => SlotKind::Read,
            "wi" => SlotKind::Write,
            "or" => SlotKind::Respond,
            other => return Err(Error::Format(format!("unknown slot kind `{other}`"))),
        })
    }
}

/// One schedule slot. `op_id` and `op` are informative; schedule identity is
/// the sequence of `(proc, kind, elem)` triples.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Slot {
    pub proc: ProcId,
    pub op_id: Option<OpId>,
    pub kind: SlotKind,
    pub elem: Option<Role>,
    pub op: Option<Operation>,
}

impl Slot {
    pub fn invoke(proc: u32) -> Slot {
        Slot { proc: ProcId(proc), op_id: None, kind: SlotKind::Invoke, elem: None, op: None }
    }

    pub fn read(proc: u32, role: &str) -> Slot {
        Slot { proc: ProcId(proc), op_id: None, kind: SlotKind::Read, elem: Some(Role(role.into())), op: None }
    }

    pub fn write(proc: u32, role: &str) -> Slot {
        Slot { proc: ProcId(proc), op_id: None, kind: SlotKind::Write, elem: Some(Role(role.into())), op: None }
    }

    pub fn respond(proc: u32) -> Slot {
        Slot { proc: ProcId(proc), op_id: None, kind: SlotKind::Respond, elem: None, op: None }
    }

    /// Compact rendering, e.g. `p1:R(X3)`.
    pub fn notation(&self) -> String {
        match self.kind {
            SlotKind::Invoke => match &self.op {
                Some(op) => format!("{}:inv {op}", self.proc),
                None => format!("{}:inv", self.proc),
            },
            SlotKind::Read => format!("{}:R({})", self.proc, self.elem.as_ref().map_or("?", Role::as_str)),
            SlotKind::Write => format!("{}:W({})", self.proc, self.elem.as_ref().map_or("?", Role::as_str)),
            SlotKind::Respond => format!("{}:resp", self.proc),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SlotJson {
    #[serde(default)]
    seq: usize,
    proc: ProcId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    op: Option<OpId>,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<Operation>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub slots: Vec<Slot>,
}

pub type CanonicalSlot = (ProcId, SlotKind, Option<Role>);

impl Schedule {
    pub fn new(slots: Vec<Slot>) -> Self {
        Schedule { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn canonical(&self) -> Vec<CanonicalSlot> {
        self.slots.iter().map(|s| (s.proc, s.kind, s.elem.clone())).collect()
    }

    pub fn same_order(&self, other: &Schedule) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn without_process(&self, p: ProcId) -> Schedule {
        Schedule { slots: self.slots.iter().filter(|s| s.proc != p).cloned().collect() }
    }

    /// Stable identity of the schedule: hex prefix of a SHA-256 over the
    /// canonical triples.
    pub fn hash(&self) -> String {
        let mut text = String::new();
        for (p, k, r) in self.canonical() {
            text.push_str(&format!("{}:{}:{};", p.0, k.code(), r.as_ref().map_or("", Role::as_str)));
        }
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn notation(&self) -> String {
        self.slots.iter().map(Slot::notation).collect::<Vec<_>>().join(" ")
    }

    pub fn to_json_value(&self) -> Value {
        let slots: Vec<SlotJson> = self
            .slots
            .iter()
            .enumerate()
            .map(|(seq, s)| SlotJson {
                seq,
                proc: s.proc,
                op: s.op_id,
                kind: s.kind.code().to_string(),
                elem: s.elem.as_ref().map(|r| r.0.clone()),
                value: s.op,
            })
            .collect();
        serde_json::to_value(slots).expect("schedule json")
    }

    pub fn from_json_value(v: &Value) -> Result<Schedule> {
        let raw: Vec<SlotJson> =
            serde_json::from_value(v.clone()).map_err(|e| Error::Format(e.to_string()))?;
        let slots = raw
            .into_iter()
            .map(|s| {
                let kind = SlotKind::parse(&s.kind)?;
                let needs_elem = matches!(kind, SlotKind::Read | SlotKind::Write);
                if needs_elem != s.elem.is_some() {
                    return Err(Error::Format(format!("slot {} elem mismatch for kind {}", s.seq, s.kind)));
                }
                // history-style `X3#7` names are accepted; only the role matters
                let elem = s.elem.map(|e| Role(e.split('#').next().unwrap_or_default().to_string()));
                Ok(Slot { proc: s.proc, op_id: s.op, kind, elem, op: s.value })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule { slots })
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(seq: usize, proc: u32, op: u32, kind: EventKind) -> Event {
        Event { seq, proc: ProcId(proc), op: OpId(op), kind }
    }

    fn node(key: u64, next: u32) -> Node {
        Node::new(Key::Fin(key), key, vec![Some(ElementId(next))])
    }

    fn read(seq: usize, proc: u32, op: u32, id: u32, content: Option<Node>) -> [Event; 2] {
        let key = content.as_ref().map_or(Key::Fin(id as u64), |n| n.key);
        let r = ElemRef::new(ElementId(id), key);
        [
            ev(seq, proc, op, EventKind::ReadInvoke(r.clone())),
            ev(seq + 1, proc, op, EventKind::ReadResponse(r, content)),
        ]
    }

    /// Two-process history: p1 runs find(1), p2 runs insert(2) which aborts on its
    /// second read.
    fn sample() -> History {
        let mut events = vec![ev(0, 1, 0, EventKind::OpInvoke(Operation::find(1)))];
        events.push(ev(1, 2, 1, EventKind::OpInvoke(Operation::insert(2))));
        let root = Node::new(Key::NegInf, 0, vec![Some(ElementId(2))]);
        events.extend(read(2, 1, 0, 0, Some(root.clone())));
        events.extend(read(4, 2, 1, 0, Some(root)));
        events.extend(read(6, 1, 0, 2, Some(node(1, 1))));
        events.extend(read(8, 2, 1, 2, None));
        events.push(ev(10, 2, 1, EventKind::OpResponse(Response::Abort)));
        events.push(ev(11, 1, 0, EventKind::OpResponse(Response::Bool(true))));
        History::from_events(events)
    }

    #[test]
    fn projections_keep_order() {
        let h = sample();
        assert!(h.is_well_formed());
        let p1 = h.project_process(ProcId(1));
        let p2 = h.project_process(ProcId(2));
        assert_eq!(p1.len() + p2.len(), h.len());
        assert!(p1.is_well_formed() && p2.is_well_formed());
        assert!(p1.events.windows(2).all(|w| w[0].seq < w[1].seq));
        assert!(h.project_process(ProcId(9)).is_empty());
        assert!(History::default().project_process(ProcId(1)).is_empty());
    }

    #[test]
    fn complete_drops_aborted_operation() {
        let h = sample();
        let c = h.complete();
        assert!(c.events.iter().all(|e| e.op == OpId(0)));
        assert_eq!(c.len(), 6);
    }

    #[test]
    fn restrict_to_operation_drops_aborted_step() {
        let h = sample();
        let local = h.restrict_to_operation(OpId(1));
        let codes: Vec<_> = local.events.iter().map(|e| e.kind.code()).collect();
        assert_eq!(codes, ["oi", "ri", "rr", "or"]);
        let exported = h.exported();
        assert_eq!(exported.len(), h.len() - 2);
        assert_eq!(exported.restrict_to_operation(OpId(1)), local);
    }

    #[test]
    fn restrict_to_operation_with_no_steps() {
        let h = History::from_events(vec![ev(0, 1, 0, EventKind::OpInvoke(Operation::find(3)))]);
        let local = h.restrict_to_operation(OpId(0));
        assert_eq!(local.len(), 1);
    }

    #[test]
    fn precedes_is_irreflexive_and_real_time() {
        let h = sample();
        assert!(!h.precedes(OpId(0), OpId(0)));
        assert!(!h.precedes(OpId(0), OpId(1)));
        assert!(!h.precedes(OpId(1), OpId(0)));
    }

    #[test]
    fn schedule_ignores_values() {
        let h = sample();
        let mut other = h.clone();
        for e in &mut other.events {
            if let EventKind::ReadResponse(_, Some(n)) = &mut e.kind {
                n.value += 100;
            }
            if let EventKind::OpResponse(Response::Bool(b)) = &mut e.kind {
                *b = !*b;
            }
        }
        assert_eq!(h.schedule(), other.schedule());
        let s = h.schedule();
        assert_eq!(s.len(), 8);
        assert_eq!(s.slots[0].kind, SlotKind::Invoke);
    }

    #[test]
    fn json_round_trip_and_field_order() {
        let h = sample();
        let text = h.to_json();
        assert_eq!(History::from_json(&text).unwrap(), h);
        let compact = serde_json::to_string(&h.events[2]).unwrap();
        assert_eq!(compact, r#"{"seq":2,"proc":1,"op":0,"kind":"ri","elem":"r#0"}"#);
        let sched = h.schedule();
        let back = Schedule::from_json_value(&sched.to_json_value()).unwrap();
        assert_eq!(back, sched);
    }

    #[test]
    fn restrict_to_object_partitions() {
        let mut events = vec![
            ev(0, 1, 0, EventKind::OpInvoke(Operation::find(1).on(1))),
            ev(1, 2, 1, EventKind::OpInvoke(Operation::find(1).on(2))),
            ev(2, 1, 0, EventKind::OpResponse(Response::Bool(false))),
            ev(3, 2, 1, EventKind::OpResponse(Response::Bool(false))),
        ];
        events.push(ev(4, 1, 2, EventKind::OpInvoke(Operation::insert(1).on(1))));
        events.push(ev(5, 1, 2, EventKind::OpResponse(Response::Bool(true))));
        let h = History::from_events(events);
        let a = h.restrict_to_object(1);
        let b = h.restrict_to_object(2);
        assert_eq!(a.len() + b.len(), h.len());
        assert!(a.is_well_formed() && b.is_well_formed());
        assert_eq!(a.ops.len(), 2);
        assert!(h.restrict_to_object(3).is_empty());
    }
}
