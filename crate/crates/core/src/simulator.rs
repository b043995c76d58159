//! Deterministic discrete-event simulation of replicated stores.
//!
//! Processes issue operations at scheduled ticks and exchange messages with
//! random or scripted delays. Partitions drop messages between blocked pairs;
//! once a partition heals, dropped messages are sent again. Every run yields
//! a history annotated with Lamport clocks, the execution induced by what
//! each replica actually knew, and the messaging happens-before relation.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::execution::{render_trace, Execution};
use crate::history::{parse_event_line, render_history, Event, History, Operation};
use crate::models::{model, ModelSpec};
use crate::relation::{bit, has, iter_bits, Bits, Relation, MAX_EVENTS};
use crate::semantics::{lookup, DataTypeSpec, Kind, SemError, SeqState};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown protocol '{0}'")]
    UnknownProtocol(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("script line {line}: {msg}")]
    Script { line: usize, msg: String },
    #[error(transparent)]
    Semantics(#[from] SemError),
}

/// Replica protocols. `causal_broadcast` is also accepted by [`Protocol::from_name`]
/// as the bare transport, exposed as a grow-only set of broadcast messages.
pub const PROTOCOLS: [&str; 7] = [
    "crdt_counter",
    "crdt_orset",
    "crdt_mvreg",
    "replay_store",
    "prefix_store",
    "sc_register",
    "lww_store",
];

pub fn register_protocols() -> &'static [&'static str] {
    &PROTOCOLS
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    CausalBroadcast,
    CrdtCounter,
    CrdtOrset,
    CrdtMvreg,
    ReplayStore(DataTypeSpec),
    PrefixStore(DataTypeSpec),
    ScRegister,
    LwwStore,
}

impl Protocol {
    pub fn from_name(name: &str) -> Result<Protocol, SimError> {
        let queue = lookup("queue")?;
        Ok(match name {
            "causal_broadcast" => Protocol::CausalBroadcast,
            "crdt_counter" => Protocol::CrdtCounter,
            "crdt_orset" => Protocol::CrdtOrset,
            "crdt_mvreg" => Protocol::CrdtMvreg,
            "replay_store" => Protocol::ReplayStore(queue),
            "prefix_store" => Protocol::PrefixStore(queue),
            "sc_register" => Protocol::ScRegister,
            "lww_store" => Protocol::LwwStore,
            _ => return Err(SimError::UnknownProtocol(name.to_string())),
        })
    }

    /// Replaces the replicated type of `replay_store` or `prefix_store`.
    pub fn with_data_type(self, dt: DataTypeSpec) -> Result<Protocol, SimError> {
        if dt.kind() != Kind::Sequential {
            return Err(SimError::Config(format!(
                "{dt} has no sequential specification"
            )));
        }
        match self {
            Protocol::ReplayStore(_) => Ok(Protocol::ReplayStore(dt)),
            Protocol::PrefixStore(_) => Ok(Protocol::PrefixStore(dt)),
            p if p.data_type() == dt => Ok(p),
            p => Err(SimError::Config(format!(
                "{} only replicates {}",
                p.name(),
                p.data_type()
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::CausalBroadcast => "causal_broadcast",
            Protocol::CrdtCounter => "crdt_counter",
            Protocol::CrdtOrset => "crdt_orset",
            Protocol::CrdtMvreg => "crdt_mvreg",
            Protocol::ReplayStore(_) => "replay_store",
            Protocol::PrefixStore(_) => "prefix_store",
            Protocol::ScRegister => "sc_register",
            Protocol::LwwStore => "lww_store",
        }
    }

    pub fn data_type(&self) -> DataTypeSpec {
        let name = match self {
            Protocol::CausalBroadcast => "gset",
            Protocol::CrdtCounter => "counter",
            Protocol::CrdtOrset => "orset",
            Protocol::CrdtMvreg => "mvregister",
            Protocol::ReplayStore(dt) | Protocol::PrefixStore(dt) => return *dt,
            Protocol::ScRegister => "register",
            Protocol::LwwStore => "memory",
        };
        lookup(name).expect("built-in type")
    }

    /// The model every ground-truth execution of this protocol satisfies.
    pub fn advertised_model(&self) -> ModelSpec {
        let name = match self {
            Protocol::CausalBroadcast
            | Protocol::CrdtCounter
            | Protocol::CrdtOrset
            | Protocol::CrdtMvreg => "convergent_causal",
            Protocol::ReplayStore(_) | Protocol::LwwStore => "causal_replay",
            Protocol::PrefixStore(_) => "pipelined_prefix",
            Protocol::ScRegister => "sequential",
        };
        model(name).expect("catalog model")
    }

    fn causal_delivery(&self) -> bool {
        *self != Protocol::ScRegister
    }

    fn object(&self, rng: &mut ChaCha8Rng) -> Value {
        let dt = self.data_type();
        let name = match dt.to_string().as_str() {
            "memory" => ["x", "y"][rng.gen_range(0..2)],
            "counter" | "seq_counter" => "c",
            "queue" | "partial_queue" => "q",
            "stack" => "s",
            "gset" | "orset" => "s",
            _ => "r",
        };
        Value::str(name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// Unordered pairs of process indices that cannot communicate.
    pub pairs: Vec<(usize, usize)>,
    pub start: u64,
    pub end: u64,
}

impl Partition {
    /// Blocks every pair of `processes` processes.
    pub fn full(processes: usize, start: u64, end: u64) -> Partition {
        let pairs = (0..processes)
            .flat_map(|a| (a + 1..processes).map(move |b| (a, b)))
            .collect();
        Partition { pairs, start, end }
    }

    fn blocks(&self, a: usize, b: usize, t: u64) -> bool {
        self.start <= t
            && t < self.end
            && self
                .pairs
                .iter()
                .any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    /// Parses `pairs@start..end`, where pairs is `*` or a comma list of `a|b`.
    /// Processes are named or given by index.
    pub fn parse(spec: &str, processes: &[String]) -> Result<Partition, String> {
        let (pairs, span) = spec.split_once('@').ok_or("expected 'pairs@start..end'")?;
        let (s, e) = span.split_once("..").ok_or("expected 'start..end'")?;
        let start: u64 = s.trim().parse().map_err(|_| format!("bad tick '{s}'"))?;
        let end: u64 = e.trim().parse().map_err(|_| format!("bad tick '{e}'"))?;
        if end < start {
            return Err(format!(
                "partition ends at {end} before it starts at {start}"
            ));
        }
        if pairs.trim() == "*" {
            return Ok(Partition::full(processes.len(), start, end));
        }
        let resolve = |p: &str| {
            let p = p.trim();
            processes
                .iter()
                .position(|n| n == p)
                .or_else(|| p.parse().ok().filter(|&i: &usize| i < processes.len()))
                .ok_or_else(|| format!("unknown process '{p}'"))
        };
        let pairs = pairs
            .split(',')
            .map(|pair| {
                let (a, b) = pair
                    .split_once('|')
                    .ok_or_else(|| format!("expected 'a|b', got '{pair}'"))?;
                Ok((resolve(a)?, resolve(b)?))
            })
            .collect::<Result<_, String>>()?;
        Ok(Partition { pairs, start, end })
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub processes: usize,
    pub protocol: Protocol,
    pub ops_per_process: usize,
    /// Relative weights per operation name; empty means uniform.
    pub op_mix: Vec<(String, u32)>,
    pub seed: u64,
    /// Inclusive bounds on message delay, in ticks.
    pub delay: (u64, u64),
    pub partitions: Vec<Partition>,
    /// Ticks between consecutive operations of one process.
    pub op_interval: u64,
    /// Ticks between clock announcements of `prefix_store`.
    pub heartbeat: u64,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            processes: 3,
            protocol: Protocol::CrdtCounter,
            ops_per_process: 3,
            op_mix: Vec::new(),
            seed: 1,
            delay: (1, 8),
            partitions: Vec::new(),
            op_interval: 6,
            heartbeat: 3,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.processes == 0 {
            return bad("at least one process is required".into());
        }
        if self.processes * self.ops_per_process > MAX_EVENTS {
            return bad(format!("at most {MAX_EVENTS} operations in total"));
        }
        if self.delay.0 == 0 || self.delay.0 > self.delay.1 {
            return bad(format!(
                "delay bounds {}..{} must be positive and ordered",
                self.delay.0, self.delay.1
            ));
        }
        if self.op_interval == 0 || self.heartbeat == 0 {
            return bad("intervals must be positive".into());
        }
        for p in &self.partitions {
            if p.end < p.start
                || p.pairs
                    .iter()
                    .any(|&(a, b)| a >= self.processes || b >= self.processes)
            {
                return bad(format!("partition {}..{} is malformed", p.start, p.end));
            }
        }
        let names: Vec<&str> = self
            .protocol
            .data_type()
            .alphabet()
            .iter()
            .map(|(n, _, _)| *n)
            .collect();
        if let Some((n, _)) = self
            .op_mix
            .iter()
            .find(|(n, _)| !names.contains(&n.as_str()))
        {
            return bad(format!(
                "operation '{n}' is not part of {}",
                self.protocol.data_type()
            ));
        }
        if !self.op_mix.is_empty() && self.op_mix.iter().all(|(_, w)| *w == 0) {
            return bad("operation weights are all zero".into());
        }
        Ok(())
    }
}

/// An explicit schedule: who invokes what and when, message delays, partitions.
#[derive(Clone, Debug, Default)]
pub struct Script {
    pub processes: Vec<String>,
    pub default_delay: u64,
    /// Directed per-pair delays.
    pub delays: BTreeMap<(usize, usize), u64>,
    pub partitions: Vec<Partition>,
    /// `(tick, process, event)`; event results are ignored.
    pub invocations: Vec<(u64, usize, Event)>,
}

/// Parses a schedule:
///
/// ```text
/// processes i j k
/// delay 1
/// delay i k 20
/// partition i|j@0..10
/// at 0 i a add(m,a)
/// ```
pub fn parse_script(text: &str) -> Result<Script, SimError> {
    let mut s = Script {
        default_delay: 1,
        ..Script::default()
    };
    let mut counts: Vec<usize> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let err = |msg: String| SimError::Script { line, msg };
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let words: Vec<&str> = t.split_whitespace().collect();
        let proc_of = |name: &str, s: &Script| {
            s.processes
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| err(format!("unknown process '{name}'")))
        };
        let tick = |w: &str| w.parse::<u64>().map_err(|_| err(format!("bad tick '{w}'")));
        match words[0] {
            "processes" => {
                if !s.processes.is_empty() {
                    return Err(err("processes declared twice".into()));
                }
                s.processes = words[1..].iter().map(|w| w.to_string()).collect();
                if s.processes.iter().collect::<BTreeSet<_>>().len() != s.processes.len() {
                    return Err(err("duplicate process name".into()));
                }
                counts = vec![0; s.processes.len()];
            }
            "delay" if words.len() == 2 => s.default_delay = tick(words[1])?,
            "delay" if words.len() == 4 => {
                let (a, b) = (proc_of(words[1], &s)?, proc_of(words[2], &s)?);
                s.delays.insert((a, b), tick(words[3])?);
            }
            "partition" => {
                let p = Partition::parse(&words[1..].join(""), &s.processes).map_err(err)?;
                s.partitions.push(p);
            }
            "at" if words.len() >= 4 => {
                let at = tick(words[1])?;
                let p = proc_of(words[2], &s)?;
                let rest = t.splitn(4, char::is_whitespace).nth(3).unwrap_or("").trim();
                let auto = format!("{}{}", s.processes[p], counts[p]);
                let ev = parse_event_line(rest, line, &s.processes[p], auto)
                    .map_err(|e| err(e.to_string()))?;
                counts[p] += 1;
                s.invocations.push((at, p, ev));
            }
            _ => return Err(err(format!("unrecognized line '{t}'"))),
        }
    }
    if s.default_delay == 0 || s.delays.values().any(|&d| d == 0) {
        return Err(SimError::Script {
            line: 0,
            msg: "delays must be positive".into(),
        });
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub process: String,
    /// The operation whose message was delivered.
    pub event: String,
    pub tick: u64,
}

#[derive(Clone, Debug)]
pub struct SimTrace {
    pub protocol: Protocol,
    pub history: History,
    pub ground_truth: Execution,
    pub msg_hb: Relation,
    /// Update deliveries in the order they happened.
    pub deliveries: Vec<Delivery>,
}

impl SimTrace {
    pub fn data_type(&self) -> DataTypeSpec {
        self.protocol.data_type()
    }

    /// The history file and the trace file (execution plus messaging edges).
    pub fn dump(&self) -> (String, String) {
        (
            render_history(&self.history),
            render_trace(&self.ground_truth, &self.msg_hb),
        )
    }

    /// Deliveries at `process`, in order.
    pub fn deliveries_at(&self, process: &str) -> Vec<&str> {
        self.deliveries
            .iter()
            .filter(|d| d.process == process)
            .map(|d| d.event.as_str())
            .collect()
    }
}

type Key = (u64, usize);

#[derive(Clone, Debug)]
enum Payload {
    Update(usize),
    Heartbeat,
    ScWrite { event: usize, wc: u64 },
}

#[derive(Clone, Debug)]
struct Msg {
    from: usize,
    to: usize,
    vc: Vec<u64>,
    lamport: u64,
    known: Bits,
    mknown: Bits,
    payload: Payload,
}

#[derive(Clone, Debug)]
enum State {
    Counter(i64),
    GSet(BTreeSet<Value>),
    /// Live add tags.
    Tags(BTreeMap<usize, Value>),
    Replay {
        log: Vec<(Key, usize)>,
        snaps: Vec<SeqState>,
    },
    Prefix(BTreeMap<Key, usize>),
    Sc {
        value: Value,
        tag: Option<Key>,
        wc: u64,
    },
    Lww(BTreeMap<Value, (Value, Key)>),
}

struct Replica {
    lamport: u64,
    sent: u64,
    delivered: Vec<u64>,
    buffer: Vec<Msg>,
    known: Bits,
    mknown: Bits,
    order: Vec<usize>,
    last_heard: Vec<u64>,
    state: State,
}

struct Rec {
    id: String,
    process: usize,
    op: Operation,
    result: Value,
    lamport: u64,
    vis: Bits,
    mhb: Bits,
    /// Tags a remove or write supersedes; the tag a register read observed.
    covers: Bits,
    tag: Option<Key>,
}

enum Action {
    Invoke {
        process: usize,
        event: Option<Event>,
    },
    Arrive(Msg),
    Heartbeat(usize),
    Heal,
}

enum Delays {
    Random(u64, u64),
    Fixed {
        default: u64,
        pairs: BTreeMap<(usize, usize), u64>,
    },
}

struct Sim {
    proto: Protocol,
    dt: DataTypeSpec,
    names: Vec<String>,
    rng: ChaCha8Rng,
    op_mix: Vec<(String, u32)>,
    delays: Delays,
    partitions: Vec<Partition>,
    heartbeat: u64,
    last_invoke: u64,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    actions: Vec<Option<Action>>,
    replicas: Vec<Replica>,
    recs: Vec<Rec>,
    dropped: Vec<Msg>,
    deliveries: Vec<(usize, usize, u64)>,
    counts: Vec<usize>,
}

impl Sim {
    fn new(
        proto: Protocol,
        names: Vec<String>,
        seed: u64,
        delays: Delays,
        partitions: Vec<Partition>,
    ) -> Sim {
        let n = names.len();
        let dt = proto.data_type();
        let replicas = (0..n)
            .map(|_| Replica {
                lamport: 0,
                sent: 0,
                delivered: vec![0; n],
                buffer: Vec::new(),
                known: 0,
                mknown: 0,
                order: Vec::new(),
                last_heard: vec![0; n],
                state: match proto {
                    Protocol::CausalBroadcast => State::GSet(BTreeSet::new()),
                    Protocol::CrdtCounter => State::Counter(0),
                    Protocol::CrdtOrset | Protocol::CrdtMvreg => State::Tags(BTreeMap::new()),
                    Protocol::ReplayStore(dt) => State::Replay {
                        log: vec![],
                        snaps: vec![dt.initial_state()],
                    },
                    Protocol::PrefixStore(_) => State::Prefix(BTreeMap::new()),
                    Protocol::ScRegister => State::Sc {
                        value: Value::Int(0),
                        tag: None,
                        wc: 0,
                    },
                    Protocol::LwwStore => State::Lww(BTreeMap::new()),
                },
            })
            .collect();
        Sim {
            proto,
            dt,
            names,
            rng: ChaCha8Rng::seed_from_u64(seed),
            op_mix: Vec::new(),
            delays,
            partitions,
            heartbeat: 0,
            last_invoke: 0,
            queue: BinaryHeap::new(),
            actions: Vec::new(),
            replicas,
            recs: Vec::new(),
            dropped: Vec::new(),
            deliveries: Vec::new(),
            counts: vec![0; n],
        }
    }

    fn schedule(&mut self, tick: u64, a: Action) {
        let seq = self.actions.len() as u64;
        self.actions.push(Some(a));
        self.queue.push(Reverse((tick, seq)));
    }

    fn blocked(&self, a: usize, b: usize, t: u64) -> bool {
        self.partitions.iter().any(|p| p.blocks(a, b, t))
    }

    fn delay(&mut self, a: usize, b: usize) -> u64 {
        match &self.delays {
            Delays::Random(lo, hi) => self.rng.gen_range(*lo..=*hi),
            Delays::Fixed { default, pairs } => *pairs.get(&(a, b)).unwrap_or(default),
        }
    }

    fn run(&mut self) {
        for p in self.partitions.clone() {
            self.schedule(p.end, Action::Heal);
        }
        if matches!(self.proto, Protocol::PrefixStore(_)) {
            for p in 0..self.names.len() {
                self.schedule(self.heartbeat, Action::Heartbeat(p));
            }
        }
        while let Some(Reverse((tick, seq))) = self.queue.pop() {
            let action = self.actions[seq as usize]
                .take()
                .expect("each action runs once");
            match action {
                Action::Invoke { process, event } => self.invoke(process, event, tick),
                Action::Arrive(m) => {
                    if self.blocked(m.from, m.to, tick) {
                        self.dropped.push(m);
                    } else {
                        self.receive(m, tick);
                    }
                }
                Action::Heartbeat(p) => {
                    if tick <= self.last_invoke + self.heartbeat {
                        self.replicas[p].lamport += 1;
                        self.broadcast(p, Payload::Heartbeat, tick);
                        self.schedule(tick + self.heartbeat, Action::Heartbeat(p));
                    }
                }
                Action::Heal => {
                    let (resend, keep): (Vec<Msg>, Vec<Msg>) = std::mem::take(&mut self.dropped)
                        .into_iter()
                        .partition(|m| !self.blocked(m.from, m.to, tick));
                    self.dropped = keep;
                    for m in resend {
                        let d = self.delay(m.from, m.to);
                        self.schedule(tick + d, Action::Arrive(m));
                    }
                }
            }
        }
    }

    fn broadcast(&mut self, p: usize, payload: Payload, tick: u64) {
        let r = &mut self.replicas[p];
        r.sent += 1;
        r.delivered[p] = r.sent;
        let base = Msg {
            from: p,
            to: p,
            vc: r.delivered.clone(),
            lamport: r.lamport,
            known: r.known,
            mknown: r.mknown,
            payload,
        };
        for q in 0..self.names.len() {
            if q == p {
                continue;
            }
            let m = Msg {
                to: q,
                ..base.clone()
            };
            if self.blocked(p, q, tick) {
                self.dropped.push(m);
            } else {
                let d = self.delay(p, q);
                self.schedule(tick + d, Action::Arrive(m));
            }
        }
    }

    fn random_op(&mut self) -> Operation {
        let alphabet = self.dt.alphabet();
        let weights: Vec<u32> = alphabet
            .iter()
            .map(|(n, _, _)| {
                if self.op_mix.is_empty() {
                    1
                } else {
                    self.op_mix
                        .iter()
                        .find(|(m, _)| m == n)
                        .map_or(0, |(_, w)| *w)
                }
            })
            .collect();
        let mut pick = self.rng.gen_range(0..weights.iter().sum::<u32>());
        let mut k = 0;
        while pick >= weights[k] {
            pick -= weights[k];
            k += 1;
        }
        let (name, lo, _) = alphabet[k];
        let mut args = vec![self.proto.object(&mut self.rng)];
        if lo == 2 {
            let hi = if self.proto == Protocol::CrdtOrset {
                3
            } else {
                9
            };
            args.push(Value::Int(self.rng.gen_range(1..=hi)));
        }
        Operation::new(name, args)
    }

    fn invoke(&mut self, p: usize, event: Option<Event>, tick: u64) {
        let (id, op) = match event {
            Some(e) => (e.id, e.op),
            None => (format!("p{p}e{}", self.counts[p]), self.random_op()),
        };
        self.counts[p] += 1;
        let idx = self.recs.len();
        let r = &mut self.replicas[p];
        r.lamport += 1;
        let lamport = r.lamport;
        let mut rec = Rec {
            id,
            process: p,
            op,
            result: Value::Unit,
            lamport,
            vis: r.known,
            mhb: r.mknown,
            covers: 0,
            tag: None,
        };
        let key = (lamport, p);
        let dt = self.dt;
        let mutator = dt.is_mutator(&rec.op) && rec.op.name != "rd";
        let obj = rec.op.args[0].clone();
        let arg = rec.op.args.get(1).cloned();
        let mut sc_wc = None;
        match &mut r.state {
            State::Counter(c) => match rec.op.name.as_str() {
                "inc" => *c += rec.op.arg(1).and_then(Value::as_int).unwrap_or(1),
                _ => rec.result = Value::Int(*c),
            },
            State::GSet(s) => match rec.op.name.as_str() {
                "add" => {
                    s.insert(arg.unwrap());
                }
                _ => rec.result = Value::Set(s.clone()),
            },
            State::Tags(tags) => match rec.op.name.as_str() {
                "add" => {
                    tags.insert(idx, arg.unwrap());
                }
                "rmv" => {
                    let v = arg.unwrap();
                    rec.covers = tags
                        .iter()
                        .filter(|(_, x)| **x == v)
                        .fold(0, |m, (t, _)| m | bit(*t));
                    tags.retain(|_, x| *x != v);
                }
                "wr" => {
                    rec.covers = tags.keys().fold(0, |m, t| m | bit(*t));
                    tags.clear();
                    tags.insert(idx, arg.unwrap());
                }
                _ => rec.result = Value::set(tags.values().cloned()),
            },
            State::Replay { log, snaps } => {
                let mut st = snaps.last().unwrap().clone();
                rec.result = dt
                    .apply(&mut st, &rec.op)
                    .ok()
                    .flatten()
                    .unwrap_or(Value::Unit);
                if mutator {
                    log.push((key, idx));
                    snaps.push(st);
                }
            }
            State::Prefix(updates) => {
                let w = (0..self.names.len())
                    .filter(|&j| j != p)
                    .map(|j| r.last_heard[j])
                    .min()
                    .unwrap_or(u64::MAX);
                let mut st = dt.initial_state();
                for (k, &u) in updates.iter() {
                    if *k < key && k.0 <= w {
                        let _ = dt.apply(&mut st, &self.recs[u].op);
                    }
                }
                rec.result = dt
                    .apply(&mut st, &rec.op)
                    .ok()
                    .flatten()
                    .unwrap_or(Value::Unit);
                rec.vis = self
                    .recs
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| (x.lamport, x.process) < key && x.lamport <= w)
                    .fold(0, |m, (i, _)| m | bit(i));
                if mutator {
                    updates.insert(key, idx);
                }
            }
            State::Sc { value, tag, wc } => match rec.op.name.as_str() {
                "wr" => {
                    *wc += 1;
                    *tag = Some((*wc, p));
                    *value = arg.unwrap();
                    rec.tag = *tag;
                    sc_wc = Some(*wc);
                }
                _ => {
                    rec.result = value.clone();
                    rec.tag = *tag;
                }
            },
            State::Lww(map) => match rec.op.name.as_str() {
                "wr" => {
                    map.insert(obj, (arg.unwrap(), key));
                }
                _ => rec.result = map.get(&obj).map_or(Value::Int(0), |(v, _)| v.clone()),
            },
        }
        r.known |= bit(idx);
        r.mknown |= bit(idx);
        r.order.push(idx);
        self.recs.push(rec);
        if mutator {
            let payload = match sc_wc {
                Some(wc) => Payload::ScWrite { event: idx, wc },
                None => Payload::Update(idx),
            };
            self.broadcast(p, payload, tick);
        }
    }

    fn receive(&mut self, m: Msg, tick: u64) {
        let to = m.to;
        let r = &mut self.replicas[to];
        r.lamport = r.lamport.max(m.lamport) + 1;
        r.mknown |= m.mknown;
        if !self.proto.causal_delivery() {
            self.deliver(m, tick);
            return;
        }
        r.buffer.push(m);
        loop {
            let r = &mut self.replicas[to];
            let ready = r.buffer.iter().position(|m| {
                m.vc[m.from] == r.delivered[m.from] + 1
                    && (0..m.vc.len()).all(|k| k == m.from || m.vc[k] <= r.delivered[k])
            });
            let Some(k) = ready else { break };
            let m = r.buffer.remove(k);
            r.delivered[m.from] += 1;
            self.deliver(m, tick);
        }
    }

    fn deliver(&mut self, m: Msg, tick: u64) {
        let to = m.to;
        let recs = &self.recs;
        let dt = self.dt;
        let r = &mut self.replicas[to];
        r.last_heard[m.from] = r.last_heard[m.from].max(m.lamport);
        let mut fresh: Vec<usize> = iter_bits(m.known & !r.known).collect();
        fresh.sort_by_key(|&x| (recs[x].lamport, recs[x].process));
        r.order.extend(fresh);
        r.known |= m.known;
        let u = match m.payload {
            Payload::Heartbeat => return,
            Payload::Update(u) => u,
            Payload::ScWrite { event, wc } => {
                if let State::Sc {
                    value,
                    tag,
                    wc: mine,
                } = &mut r.state
                {
                    *mine = (*mine).max(wc);
                    if tag.is_none_or(|t| (wc, m.from) > t) {
                        *tag = Some((wc, m.from));
                        *value = recs[event].op.args[1].clone();
                    }
                }
                self.deliveries.push((to, event, tick));
                return;
            }
        };
        let op = &recs[u].op;
        let key = (recs[u].lamport, recs[u].process);
        match &mut r.state {
            State::Counter(c) => *c += op.arg(1).and_then(Value::as_int).unwrap_or(1),
            State::GSet(s) => {
                s.insert(op.args[1].clone());
            }
            State::Tags(tags) => {
                tags.retain(|t, _| !has(recs[u].covers, *t));
                if op.name != "rmv" {
                    tags.insert(u, op.args[1].clone());
                }
            }
            State::Replay { log, snaps } => {
                let at = log.partition_point(|(k, _)| *k < key);
                log.insert(at, (key, u));
                snaps.truncate(at + 1);
                let mut st = snaps[at].clone();
                for &(_, x) in &log[at..] {
                    let _ = dt.apply(&mut st, &recs[x].op);
                    snaps.push(st.clone());
                }
            }
            State::Prefix(updates) => {
                updates.insert(key, u);
            }
            State::Lww(map) => {
                let obj = op.args[0].clone();
                if map.get(&obj).is_none_or(|(_, k)| *k < key) {
                    map.insert(obj, (op.args[1].clone(), key));
                }
            }
            State::Sc { .. } => {}
        }
        self.deliveries.push((to, u, tick));
    }

    fn finish(self) -> Result<SimTrace, SimError> {
        let n_proc = self.names.len();
        let recs = &self.recs;
        let mut by_proc: Vec<Vec<usize>> = vec![Vec::new(); n_proc];
        for (i, r) in recs.iter().enumerate() {
            by_proc[r.process].push(i);
        }
        let spec: Vec<(String, Vec<Event>)> = (0..n_proc)
            .map(|p| {
                let events = by_proc[p]
                    .iter()
                    .map(|&i| {
                        let r = &recs[i];
                        Event::new(
                            r.id.clone(),
                            self.names[p].clone(),
                            r.op.clone(),
                            r.result.clone(),
                        )
                        .with_clocks(r.lamport, r.lamport)
                    })
                    .collect();
                (self.names[p].clone(), events)
            })
            .collect();
        let history = History::new(spec).map_err(|e| SimError::Config(e.to_string()))?;
        let map: Vec<usize> = recs
            .iter()
            .map(|r| history.index_of(&r.id).unwrap())
            .collect();
        let remap = |b: Bits| iter_bits(b).fold(0, |m, x| m | bit(map[x]));
        let n = recs.len();
        let key = |i: usize| (recs[i].lamport, recs[i].process);
        let mut arbitration: Vec<usize> = (0..n).collect();
        arbitration.sort_by_key(|&i| key(i));

        let mut rows = vec![0; n];
        let mut mhb = vec![0; n];
        for (i, r) in recs.iter().enumerate() {
            rows[map[i]] = remap(r.vis);
            mhb[map[i]] = remap(r.mhb);
        }
        let sers: Vec<Vec<usize>> = match self.proto {
            Protocol::CausalBroadcast
            | Protocol::CrdtCounter
            | Protocol::CrdtOrset
            | Protocol::CrdtMvreg => self
                .replicas
                .iter()
                .map(|r| {
                    let known: Bits = r.order.iter().fold(0, |m, &x| m | bit(x));
                    let tail = arbitration.iter().copied().filter(|&x| !has(known, x));
                    r.order
                        .iter()
                        .copied()
                        .chain(tail)
                        .map(|x| map[x])
                        .collect()
                })
                .collect(),
            Protocol::ScRegister => {
                let total = sc_order(recs, &by_proc);
                for (k, &x) in total.iter().enumerate() {
                    rows[map[x]] = total[..k].iter().fold(0, |m, &y| m | bit(map[y]));
                }
                vec![total.iter().map(|&x| map[x]).collect(); n_proc]
            }
            _ => vec![arbitration.iter().map(|&x| map[x]).collect(); n_proc],
        };
        let ground_truth = Execution::new(history.clone(), Relation::from_in_rows(&rows), sers)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let deliveries = self
            .deliveries
            .iter()
            .map(|&(p, u, tick)| Delivery {
                process: self.names[p].clone(),
                event: recs[u].id.clone(),
                tick,
            })
            .collect();
        Ok(SimTrace {
            protocol: self.proto,
            history,
            ground_truth,
            msg_hb: Relation::from_in_rows(&mhb),
            deliveries,
        })
    }
}

/// Writes by `(clock, process)`; each write is followed by the reads that
/// returned it, grouped by process. Reads of the initial value come first.
fn sc_order(recs: &[Rec], by_proc: &[Vec<usize>]) -> Vec<usize> {
    let mut writes: Vec<usize> = (0..recs.len())
        .filter(|&i| recs[i].op.name == "wr")
        .collect();
    writes.sort_by_key(|&i| recs[i].tag);
    let reads_of = |tag: Option<Key>| {
        by_proc
            .iter()
            .flatten()
            .copied()
            .filter(move |&i| recs[i].op.name != "wr" && recs[i].tag == tag)
    };
    let mut out: Vec<usize> = reads_of(None).collect();
    for w in writes {
        out.push(w);
        out.extend(reads_of(recs[w].tag));
    }
    out
}

pub fn simulate(cfg: &SimConfig) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    let names: Vec<String> = (0..cfg.processes).map(|p| format!("p{p}")).collect();
    let mut sim = Sim::new(
        cfg.protocol,
        names,
        cfg.seed,
        Delays::Random(cfg.delay.0, cfg.delay.1),
        cfg.partitions.clone(),
    );
    sim.op_mix = cfg.op_mix.clone();
    sim.heartbeat = cfg.heartbeat;
    for p in 0..cfg.processes {
        for k in 0..cfg.ops_per_process {
            let tick = 1 + k as u64 * cfg.op_interval + sim.rng.gen_range(0..cfg.op_interval);
            sim.last_invoke = sim.last_invoke.max(tick);
            sim.schedule(
                tick,
                Action::Invoke {
                    process: p,
                    event: None,
                },
            );
        }
    }
    sim.run();
    sim.finish()
}

/// Replays the exact schedule of `script`.
pub fn scripted_run(protocol: Protocol, script: &Script) -> Result<SimTrace, SimError> {
    let dt = protocol.data_type();
    for (_, _, e) in &script.invocations {
        dt.check_operation(&e.op)?;
    }
    let mut ids = BTreeSet::new();
    if let Some((_, _, e)) = script
        .invocations
        .iter()
        .find(|(_, _, e)| !ids.insert(e.id.clone()))
    {
        return Err(SimError::Config(format!("duplicate event id '{}'", e.id)));
    }
    if script.invocations.len() > MAX_EVENTS {
        return Err(SimError::Config(format!(
            "at most {MAX_EVENTS} operations in total"
        )));
    }
    let delays = Delays::Fixed {
        default: script.default_delay.max(1),
        pairs: script.delays.clone(),
    };
    let mut sim = Sim::new(
        protocol,
        script.processes.clone(),
        0,
        delays,
        script.partitions.clone(),
    );
    sim.heartbeat = 3;
    for (tick, p, e) in &script.invocations {
        sim.last_invoke = sim.last_invoke.max(*tick);
        sim.schedule(
            *tick,
            Action::Invoke {
                process: *p,
                event: Some(e.clone()),
            },
        );
    }
    sim.run();
    sim.finish()
}

/// Two processes cut off from each other for the whole run, each issuing one
/// update followed by one query.
pub fn clam_scenario(dt: DataTypeSpec) -> Result<(Protocol, Script), SimError> {
    use crate::semantics::DataType::*;
    let op = |name: &str, args: &[Value]| Operation::new(name, args.iter().cloned());
    let (o, x, y) = (Value::str("o"), Value::str("x"), Value::str("y"));
    let (one, two) = (Value::Int(1), Value::Int(2));
    let (protocol, ops) = match dt.data_type() {
        Queue | PartialQueue => (
            Protocol::ReplayStore(dt),
            [
                op("enq", &[o.clone(), one]),
                op("val", &[o.clone()]),
                op("enq", &[o.clone(), two]),
                op("val", &[o]),
            ],
        ),
        Stack => (
            Protocol::ReplayStore(dt),
            [
                op("push", &[o.clone(), one]),
                op("val", &[o.clone()]),
                op("push", &[o.clone(), two]),
                op("val", &[o]),
            ],
        ),
        SeqCounter => (
            Protocol::ReplayStore(dt),
            [
                op("inc", &[o.clone(), one.clone()]),
                op("val", &[o.clone()]),
                op("inc", &[o.clone(), one]),
                op("val", &[o]),
            ],
        ),
        Counter => (
            Protocol::CrdtCounter,
            [
                op("inc", &[o.clone(), one.clone()]),
                op("val", &[o.clone()]),
                op("inc", &[o.clone(), one]),
                op("val", &[o]),
            ],
        ),
        Memory => (
            Protocol::LwwStore,
            [
                op("wr", &[x.clone(), one.clone()]),
                op("rd", &[y.clone()]),
                op("wr", &[y, one]),
                op("rd", &[x]),
            ],
        ),
        Register => (
            Protocol::ReplayStore(dt),
            [
                op("wr", &[o.clone(), one]),
                op("rd", &[o.clone()]),
                op("wr", &[o.clone(), two]),
                op("rd", &[o]),
            ],
        ),
        _ => return Err(SimError::Config(format!("no partition scenario for {dt}"))),
    };
    let processes = vec!["i".to_string(), "j".to_string()];
    let invocations = ops
        .into_iter()
        .enumerate()
        .map(|(k, op)| {
            let p = k / 2;
            let id = ["a", "b", "c", "d"][k];
            (
                1 + (k % 2) as u64,
                p,
                Event::new(id, processes[p].clone(), op, Value::Unit),
            )
        })
        .collect();
    let partitions = vec![Partition::full(2, 0, 1_000)];
    Ok((
        protocol,
        Script {
            processes,
            default_delay: 1,
            delays: BTreeMap::new(),
            partitions,
            invocations,
        },
    ))
}

/// The history produced by [`clam_scenario`].
pub fn clam_witness(dt: DataTypeSpec) -> Result<History, SimError> {
    let (protocol, script) = clam_scenario(dt)?;
    Ok(scripted_run(protocol, &script)?.history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::holds_all;
    use crate::semantics::check_valid;

    #[test]
    fn seven_protocols() {
        assert_eq!(register_protocols().len(), 7);
        assert!(register_protocols().contains(&"replay_store"));
        assert!(register_protocols().contains(&"sc_register"));
        assert!(Protocol::from_name("causal_broadcast").is_ok());
        assert!(matches!(
            Protocol::from_name("paxos"),
            Err(SimError::UnknownProtocol(_))
        ));
    }

    #[test]
    fn clam_witness_for_queue() {
        let h = clam_witness(lookup("queue").unwrap()).unwrap();
        let expected = "process i\n  a enq(o,1) @ 1..1\n  b val(o) -> [1] @ 2..2\nprocess j\n  c enq(o,2) @ 1..1\n  d val(o) -> [2] @ 2..2";
        assert_eq!(h, crate::history::parse_history(expected).unwrap());
        assert!(clam_witness(lookup("orset").unwrap()).is_err());
    }

    #[test]
    fn zero_ops_gives_empty_history() {
        let t = simulate(&SimConfig {
            ops_per_process: 0,
            ..SimConfig::default()
        })
        .unwrap();
        assert!(t.history.is_empty());
    }

    #[test]
    fn counter_run_is_convergent_causal() {
        let t = simulate(&SimConfig::default()).unwrap();
        assert_eq!(t.history.len(), 9);
        assert!(check_valid(&t.ground_truth, &t.data_type()));
        assert!(holds_all(&t.protocol.advertised_model().axioms, &t.ground_truth).unwrap());
    }

    #[test]
    fn partitions_parse() {
        let names = vec!["i".to_string(), "j".to_string(), "k".to_string()];
        let p = Partition::parse("i|j,2|0@5..9", &names).unwrap();
        assert_eq!(p.pairs, vec![(0, 1), (2, 0)]);
        assert!(p.blocks(1, 0, 5) && !p.blocks(1, 0, 9) && !p.blocks(1, 2, 6));
        assert_eq!(Partition::parse("*@0..1", &names).unwrap().pairs.len(), 3);
        assert!(Partition::parse("i|z@0..1", &names).is_err());
        assert!(Partition::parse("*@4..1", &names).is_err());
    }

    #[test]
    fn script_errors() {
        assert!(parse_script("processes i\nat 0 j wr(r,1)\n").is_err());
        assert!(parse_script("processes i i\n").is_err());
        assert!(parse_script("processes i\nfly away\n").is_err());
        let s = parse_script("processes i\nat 0 i wr(r,1)\nat 1 i rd(r)\n").unwrap();
        let t = scripted_run(Protocol::ScRegister, &s).unwrap();
        assert_eq!(t.history.event(1).result, Value::Int(1));
    }
}
