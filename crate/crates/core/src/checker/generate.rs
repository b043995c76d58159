//! Random valid executions, for property tests and implication sampling.
//!
//! Events are first ordered by a random total order consistent with program
//! order; visibility only follows that order, so executions are physically
//! realizable. Results are then computed from the semantics.

use rand::seq::SliceRandom;
use rand::Rng;

use super::before_in;
use crate::execution::Execution;
use crate::history::{Event, History, Operation};
use crate::relation::{bit, has, iter_bits, Bits, Relation};
use crate::semantics::{DataType, DataTypeSpec, Kind};
use crate::value::Value;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_processes: usize,
    pub max_events_per_process: usize,
    pub types: Vec<DataTypeSpec>,
    pub max_value: i64,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        use DataType::*;
        GenConfig {
            max_processes: 3,
            max_events_per_process: 3,
            types: [
                Register, Memory, SeqCounter, Queue, Stack, Counter, GSet, ORSet, MVRegister,
            ]
            .into_iter()
            .map(DataTypeSpec::new)
            .collect(),
            max_value: 3,
        }
    }
}

fn random_op(rng: &mut impl Rng, dt: &DataTypeSpec, max_value: i64) -> Operation {
    let ops = dt.alphabet();
    let (name, lo, _) = ops[rng.gen_range(0..ops.len())];
    let object = match dt.data_type() {
        DataType::Memory => ["x", "y"][rng.gen_range(0..2)],
        _ => "o",
    };
    let mut args = vec![Value::str(object)];
    if lo == 2 {
        args.push(Value::Int(rng.gen_range(1..=max_value)));
    }
    Operation::new(name, args)
}

/// A random history over `dt` with unit results.
pub fn random_history(rng: &mut impl Rng, cfg: &GenConfig, dt: &DataTypeSpec) -> History {
    let procs = rng.gen_range(1..=cfg.max_processes);
    let mut next = 0;
    let spec = (0..procs)
        .map(|p| {
            let len = rng.gen_range(1..=cfg.max_events_per_process);
            let events = (0..len)
                .map(|_| {
                    next += 1;
                    Event::new(
                        format!("e{next}"),
                        format!("p{p}"),
                        random_op(rng, dt, cfg.max_value),
                        Value::Unit,
                    )
                })
                .collect();
            (format!("p{p}"), events)
        })
        .collect();
    History::new(spec).expect("generated history is well formed")
}

/// A random total order consistent with program order.
fn interleave(rng: &mut impl Rng, h: &History) -> Vec<usize> {
    let mut heads: Vec<usize> = (0..h.process_count())
        .map(|p| h.process_range(p).start)
        .collect();
    let mut out = Vec::with_capacity(h.len());
    while out.len() < h.len() {
        let live: Vec<usize> = (0..heads.len())
            .filter(|&p| heads[p] < h.process_range(p).end)
            .collect();
        let p = *live.choose(rng).unwrap();
        out.push(heads[p]);
        heads[p] += 1;
    }
    out
}

/// A random linear extension of the given predecessor sets.
fn linear_extension(rng: &mut impl Rng, preds: &[Bits]) -> Vec<usize> {
    let n = preds.len();
    let mut placed: Bits = 0;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let ready: Vec<usize> = (0..n)
            .filter(|&x| !has(placed, x) && preds[x] & !placed == 0)
            .collect();
        let x = *ready.choose(rng).unwrap();
        placed |= bit(x);
        out.push(x);
    }
    out
}

fn random_rows(rng: &mut impl Rng, h: &History, order: &[usize]) -> Vec<Bits> {
    let n = h.len();
    let mut rows = vec![0; n];
    match rng.gen_range(0..4) {
        0 => {
            for &x in order {
                rows[x] = before_in(order, x);
            }
        }
        1 => {
            let p: f64 = rng.gen_range(0.2..0.9);
            for &x in order {
                rows[x] = iter_bits(before_in(order, x))
                    .filter(|_| rng.gen_bool(p))
                    .fold(0, |m, y| m | bit(y));
            }
        }
        2 => {
            // Each process sees a growing prefix of the order.
            for pr in 0..h.process_count() {
                let mut seen = 0;
                for x in h.process_range(pr) {
                    let pos = order.iter().position(|&y| y == x).unwrap();
                    seen = rng.gen_range(seen..=pos);
                    rows[x] = order[..seen].iter().fold(0, |m, &y| m | bit(y)) | h.po_before(x);
                }
            }
        }
        _ => {
            // Transitive visibility that includes program order.
            for &x in order {
                let mut r = h.po_before(x);
                for y in iter_bits(before_in(order, x)) {
                    if rng.gen_bool(0.4) {
                        r |= bit(y) | rows[y];
                    }
                }
                for y in iter_bits(r) {
                    r |= rows[y];
                }
                rows[x] = r & !bit(x);
            }
        }
    }
    if rng.gen_bool(0.5) {
        for x in 0..n {
            rows[x] |= h.po_before(x);
        }
    }
    rows
}

/// Fills in the results mandated by `rows` and `sers`. `None` when some result is undefined.
pub fn assign_results(
    h: &History,
    dt: &DataTypeSpec,
    rows: &[Bits],
    sers: &[Vec<usize>],
) -> Option<History> {
    let ev = h.events();
    let results: Vec<Value> = (0..h.len())
        .map(|o| match dt.kind() {
            Kind::Sequential => {
                let prior = sers[h.process_of(o)]
                    .iter()
                    .filter(|&&x| has(rows[o], x))
                    .map(|&x| &ev[x].op);
                dt.sequential_result(prior, &ev[o].op).ok().flatten()
            }
            Kind::Concurrent => dt.concurrent_result(ev, rows, o).ok().flatten(),
        })
        .collect::<Option<_>>()?;
    let spec = (0..h.process_count())
        .map(|p| {
            let events = h
                .process_range(p)
                .map(|x| {
                    let mut e = ev[x].clone();
                    e.result = results[x].clone();
                    e
                })
                .collect();
            (h.processes()[p].clone(), events)
        })
        .collect();
    History::new(spec).ok()
}

/// A random valid execution together with the data type it is valid for.
pub fn random_valid_execution(rng: &mut impl Rng, cfg: &GenConfig) -> (Execution, DataTypeSpec) {
    loop {
        let dt = *cfg.types.choose(rng).expect("at least one data type");
        let h = random_history(rng, cfg, &dt);
        let order = interleave(rng, &h);
        let rows = random_rows(rng, &h, &order);
        let sers: Vec<Vec<usize>> = if rng.gen_bool(0.5) {
            vec![order.clone(); h.process_count()]
        } else {
            (0..h.process_count())
                .map(|_| linear_extension(rng, &rows))
                .collect()
        };
        let Some(h) = assign_results(&h, &dt, &rows, &sers) else {
            continue;
        };
        let e = Execution::new(h, Relation::from_in_rows(&rows), sers)
            .expect("generated execution is well formed");
        return (e, dt);
    }
}
