//! Data types: sequential semantic functions folded over serializations, and
//! concurrent ones computed directly from visibility.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::execution::{check_well_formed, Execution};
use crate::history::{Event, History, Operation};
use crate::relation::{bit, has, iter_bits, Bits};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemError {
    #[error("unknown data type '{0}'")]
    UnknownType(String),
    #[error("operation '{op}' is not in the alphabet of {ty}")]
    UnknownOperation { ty: String, op: String },
    #[error("operation '{op}' of {ty} expects {expected} arguments, got {got}")]
    Arity {
        ty: String,
        op: String,
        expected: String,
        got: usize,
    },
    #[error("{0} is not a {1} data type")]
    WrongKind(String, &'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Sequential,
    Concurrent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Choice {
    Min,
    Max,
}

impl Choice {
    fn pick(self, vals: &BTreeSet<Value>) -> Option<Value> {
        match self {
            Choice::Min => vals.iter().next().cloned(),
            Choice::Max => vals.iter().next_back().cloned(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataType {
    Register,
    Memory,
    SeqCounter,
    Queue,
    PartialQueue,
    Stack,
    Counter,
    GSet,
    ORSet,
    MVRegister,
    AddSet,
    Barrier(usize),
    Consensus(usize, Choice),
}

/// A registered data type. Immutable; cheap to copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DataTypeSpec {
    ty: DataType,
}

/// Per-object abstract state of a sequential type.
pub type SeqState = BTreeMap<Value, Value>;

/// `None` stands for an undefined result of a partial specification.
pub type Outcome = Option<Value>;

const REGISTERED: &[&str] = &[
    "register",
    "memory",
    "seq_counter",
    "queue",
    "partial_queue",
    "stack",
    "counter",
    "gset",
    "orset",
    "mvregister",
    "addset",
    "barrier[n]",
    "consensus[n,min|max]",
];

pub fn registered_types() -> &'static [&'static str] {
    REGISTERED
}

pub fn lookup(name: &str) -> Result<DataTypeSpec, SemError> {
    let unknown = || SemError::UnknownType(name.to_string());
    let ty = match name {
        "register" => DataType::Register,
        "memory" => DataType::Memory,
        "seq_counter" => DataType::SeqCounter,
        "queue" => DataType::Queue,
        "partial_queue" => DataType::PartialQueue,
        "stack" => DataType::Stack,
        "counter" => DataType::Counter,
        "gset" => DataType::GSet,
        "orset" => DataType::ORSet,
        "mvregister" => DataType::MVRegister,
        "addset" => DataType::AddSet,
        _ => {
            let (base, params) = name
                .strip_suffix(']')
                .and_then(|s| s.split_once('['))
                .ok_or_else(unknown)?;
            let params: Vec<&str> = params.split(',').map(str::trim).collect();
            let n: usize = params[0].parse().map_err(|_| unknown())?;
            if n == 0 {
                return Err(unknown());
            }
            match (base, params.len()) {
                ("barrier", 1) => DataType::Barrier(n),
                ("consensus", 1) => DataType::Consensus(n, Choice::Min),
                ("consensus", 2) => DataType::Consensus(
                    n,
                    match params[1] {
                        "min" => Choice::Min,
                        "max" => Choice::Max,
                        _ => return Err(unknown()),
                    },
                ),
                _ => return Err(unknown()),
            }
        }
    };
    Ok(DataTypeSpec { ty })
}

fn object_key(op: &Operation) -> Value {
    op.object().cloned().unwrap_or(Value::Unit)
}

fn int_arg(op: &Operation, i: usize, default: i64) -> i64 {
    op.arg(i).and_then(Value::as_int).unwrap_or(default)
}

impl DataTypeSpec {
    pub fn new(ty: DataType) -> DataTypeSpec {
        DataTypeSpec { ty }
    }

    pub fn data_type(&self) -> DataType {
        self.ty
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn kind(&self) -> Kind {
        use DataType::*;
        match self.ty {
            Register | Memory | SeqCounter | Queue | PartialQueue | Stack => Kind::Sequential,
            _ => Kind::Concurrent,
        }
    }

    /// Operation names with their accepted argument counts.
    pub fn alphabet(&self) -> &'static [(&'static str, usize, usize)] {
        use DataType::*;
        match self.ty {
            Register | Memory => &[("wr", 2, 2), ("rd", 1, 1)],
            SeqCounter | Counter => &[("inc", 1, 2), ("val", 1, 1)],
            Queue | PartialQueue => &[("enq", 2, 2), ("deq", 1, 1), ("val", 1, 1)],
            Stack => &[("push", 2, 2), ("pop", 1, 1), ("val", 1, 1)],
            GSet => &[("add", 2, 2), ("val", 1, 1)],
            ORSet => &[("add", 2, 2), ("rmv", 2, 2), ("val", 1, 1)],
            MVRegister => &[("wr", 2, 2), ("rd", 1, 1)],
            AddSet => &[("add", 2, 2)],
            Barrier(_) => &[("wait", 1, 1)],
            Consensus(..) => &[("propose", 2, 2)],
        }
    }

    pub fn check_operation(&self, op: &Operation) -> Result<(), SemError> {
        let Some(&(_, lo, hi)) = self.alphabet().iter().find(|(n, _, _)| *n == op.name) else {
            return Err(SemError::UnknownOperation {
                ty: self.name(),
                op: op.name.clone(),
            });
        };
        if op.args.len() < lo || op.args.len() > hi {
            let expected = if lo == hi {
                lo.to_string()
            } else {
                format!("{lo}..{hi}")
            };
            return Err(SemError::Arity {
                ty: self.name(),
                op: op.name.clone(),
                expected,
                got: op.args.len(),
            });
        }
        Ok(())
    }

    pub fn check_history(&self, h: &History) -> Result<(), SemError> {
        h.events()
            .iter()
            .try_for_each(|e| self.check_operation(&e.op))
    }

    /// The result an operation returns regardless of state and visibility, if any.
    pub fn constant_result(&self, op: &Operation) -> Option<Value> {
        use DataType::*;
        let n = op.name.as_str();
        let constant = match self.ty {
            Register | Memory | MVRegister => n == "wr",
            SeqCounter | Counter => n == "inc",
            Queue | PartialQueue => n == "enq",
            Stack => n == "push",
            GSet => n == "add",
            ORSet => n == "add" || n == "rmv",
            AddSet | Barrier(_) | Consensus(..) => false,
        };
        constant.then_some(Value::Unit)
    }

    /// Whether applying `op` can change the state of a sequential type.
    pub fn is_mutator(&self, op: &Operation) -> bool {
        !matches!(op.name.as_str(), "rd" | "val")
    }

    /// Whether the visibility into an event with operation `op` can influence
    /// the concurrent result of some other event.
    pub fn row_referenced(&self, op: &Operation) -> bool {
        use DataType::*;
        match self.ty {
            ORSet => op.name == "rmv",
            MVRegister => op.name == "wr",
            Barrier(_) | Consensus(..) => true,
            _ => false,
        }
    }

    /// Events whose visible sets the concurrent result of `o` reads, besides `o` itself.
    pub fn result_dependencies(&self, h: &History, o: usize, row: Bits) -> Bits {
        use DataType::*;
        let obj = object_key(&h.event(o).op);
        let same = |name: &str| {
            iter_bits(row)
                .filter(|&x| {
                    let op = &h.event(x).op;
                    op.name == name && object_key(op) == obj
                })
                .fold(0, |m, x| m | bit(x))
        };
        match self.ty {
            ORSet => same("rmv"),
            MVRegister => same("wr"),
            Barrier(_) | Consensus(..) => row | h.po_before(o),
            _ => 0,
        }
    }

    pub fn initial_state(&self) -> SeqState {
        SeqState::new()
    }

    /// Applies `op` to `st` and returns its result, or `None` when undefined.
    pub fn apply(&self, st: &mut SeqState, op: &Operation) -> Result<Outcome, SemError> {
        use DataType::*;
        if self.kind() != Kind::Sequential {
            return Err(SemError::WrongKind(self.name(), "sequential"));
        }
        self.check_operation(op)?;
        let key = object_key(op);
        let n = op.name.as_str();
        let out = match (self.ty, n) {
            (Register | Memory, "wr") => {
                st.insert(key, op.args[1].clone());
                Value::Unit
            }
            (Register | Memory, "rd") => st.get(&key).cloned().unwrap_or(Value::Int(0)),
            (SeqCounter, "inc") => {
                let cur = st.get(&key).and_then(Value::as_int).unwrap_or(0);
                st.insert(key, Value::Int(cur + int_arg(op, 1, 1)));
                Value::Unit
            }
            (SeqCounter, "val") => st.get(&key).cloned().unwrap_or(Value::Int(0)),
            (Queue | PartialQueue | Stack, "enq" | "push") => {
                let entry = st.entry(key).or_insert_with(|| Value::List(vec![]));
                let Value::List(items) = entry else {
                    unreachable!()
                };
                if n == "enq" {
                    items.push(op.args[1].clone());
                } else {
                    items.insert(0, op.args[1].clone());
                }
                Value::Unit
            }
            (Queue | PartialQueue | Stack, "deq" | "pop") => match st.get_mut(&key) {
                Some(Value::List(items)) if !items.is_empty() => items.remove(0),
                _ if self.ty == PartialQueue => return Ok(None),
                _ => Value::Unit,
            },
            (Queue | PartialQueue | Stack, "val") => {
                st.get(&key).cloned().unwrap_or(Value::List(vec![]))
            }
            _ => unreachable!("alphabet checked"),
        };
        Ok(Some(out))
    }

    /// Folds `prior` over the initial state and returns the result of `op`.
    pub fn sequential_result<'a>(
        &self,
        prior: impl IntoIterator<Item = &'a Operation>,
        op: &Operation,
    ) -> Result<Outcome, SemError> {
        let mut st = self.initial_state();
        let obj = object_key(op);
        for p in prior {
            if object_key(p) != obj {
                self.check_operation(p)?;
                continue;
            }
            if self.apply(&mut st, p)?.is_none() {
                return Ok(None);
            }
        }
        self.apply(&mut st, op)
    }

    /// Result of event `o` given visibility as predecessor sets.
    pub fn concurrent_result(
        &self,
        events: &[Event],
        vis_in: &[Bits],
        o: usize,
    ) -> Result<Outcome, SemError> {
        use DataType::*;
        if self.kind() != Kind::Concurrent {
            return Err(SemError::WrongKind(self.name(), "concurrent"));
        }
        let ev = &events[o];
        self.check_operation(&ev.op)?;
        let obj = object_key(&ev.op);
        let row = vis_in[o];
        let visible = |name: &'static str| {
            iter_bits(
                iter_bits(row)
                    .filter(|&x| {
                        let op = &events[x].op;
                        op.name == name && object_key(op) == obj
                    })
                    .fold(0, |m, x| m | bit(x)),
            )
        };
        let vis = |a: usize, b: usize| has(vis_in[b], a);
        let out = match (self.ty, ev.op.name.as_str()) {
            (Counter, "inc") | (GSet | ORSet, "add" | "rmv") | (MVRegister, "wr") => Value::Unit,
            (Counter, "val") => {
                Value::Int(visible("inc").map(|x| int_arg(&events[x].op, 1, 1)).sum())
            }
            (GSet, "val") => Value::set(visible("add").map(|x| events[x].op.args[1].clone())),
            (ORSet, "val") => Value::set(
                visible("add")
                    .filter(|&a| {
                        let v = &events[a].op.args[1];
                        !visible("rmv").any(|b| &events[b].op.args[1] == v && vis(a, b))
                    })
                    .map(|a| events[a].op.args[1].clone()),
            ),
            (MVRegister, "rd") => Value::set(
                visible("wr")
                    .filter(|&a| !visible("wr").any(|b| vis(a, b)))
                    .map(|a| events[a].op.args[1].clone()),
            ),
            (AddSet, "add") => {
                let mut s: BTreeSet<Value> = visible("add")
                    .map(|x| events[x].op.args[1].clone())
                    .collect();
                s.insert(ev.op.args[1].clone());
                Value::Set(s)
            }
            (Barrier(n) | Consensus(n, _), _) => {
                let arena = row | bit(o);
                let maximal = iter_bits(arena)
                    .filter(|&x| iter_bits(arena).all(|y| y == x || !vis(x, y) || vis(y, x)));
                let members: Vec<usize> = maximal
                    .filter(|&x| {
                        let op = &events[x].op;
                        op.name == ev.op.name && object_key(op) == obj
                    })
                    .collect();
                let fresh = members.iter().all(|&a| {
                    (0..o)
                        .filter(|&b| events[b].process == ev.process)
                        .all(|b| !vis(a, b))
                });
                if members.len() != n || !fresh {
                    return Ok(None);
                }
                match self.ty {
                    Consensus(_, f) => {
                        let vals: BTreeSet<Value> = members
                            .iter()
                            .map(|&x| events[x].op.args[1].clone())
                            .collect();
                        return Ok(f.pick(&vals));
                    }
                    _ => Value::Unit,
                }
            }
            _ => unreachable!("alphabet checked"),
        };
        Ok(Some(out))
    }

    /// The result `o` must have in `e`, or `None` when undefined.
    pub fn mandated_result(
        &self,
        e: &Execution,
        vis_in: &[Bits],
        o: usize,
    ) -> Result<Outcome, SemError> {
        let h = e.history();
        match self.kind() {
            Kind::Sequential => {
                let row = vis_in[o];
                let p = h.process_of(o);
                let prior = e
                    .ser(p)
                    .iter()
                    .filter(|&&x| has(row, x))
                    .map(|&x| &h.event(x).op);
                self.sequential_result(prior, &h.event(o).op)
            }
            Kind::Concurrent => self.concurrent_result(h.events(), vis_in, o),
        }
    }
}

impl fmt::Display for DataTypeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DataType::*;
        match self.ty {
            Register => write!(f, "register"),
            Memory => write!(f, "memory"),
            SeqCounter => write!(f, "seq_counter"),
            Queue => write!(f, "queue"),
            PartialQueue => write!(f, "partial_queue"),
            Stack => write!(f, "stack"),
            Counter => write!(f, "counter"),
            GSet => write!(f, "gset"),
            ORSet => write!(f, "orset"),
            MVRegister => write!(f, "mvregister"),
            AddSet => write!(f, "addset"),
            Barrier(n) => write!(f, "barrier[{n}]"),
            Consensus(n, Choice::Min) => write!(f, "consensus[{n},min]"),
            Consensus(n, Choice::Max) => write!(f, "consensus[{n},max]"),
        }
    }
}

/// First event whose recorded result differs from the mandated one.
pub fn result_violation(e: &Execution, dt: &DataTypeSpec) -> Option<(usize, Outcome)> {
    let vis_in = e.vis_in();
    (0..e.len()).find_map(|o| match dt.mandated_result(e, &vis_in, o) {
        Ok(Some(v)) if v == e.history().event(o).result => None,
        Ok(out) => Some((o, out)),
        Err(_) => Some((o, None)),
    })
}

pub fn check_result_validity(e: &Execution, dt: &DataTypeSpec) -> bool {
    result_violation(e, dt).is_none()
}

pub fn check_valid(e: &Execution, dt: &DataTypeSpec) -> bool {
    check_well_formed(e) && check_result_validity(e, dt)
}
