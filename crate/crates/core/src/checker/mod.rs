//! Decides whether a history admits a valid execution that satisfies a model.

pub mod generate;
mod search;

use std::fmt;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::axioms::{holds_all, Axiom, AxiomError};
use crate::execution::Execution;
use crate::history::History;
use crate::models::ModelSpec;
use crate::relation::{bit, has, iter_bits, Bits, Relation};
use crate::semantics::{check_result_validity, check_valid, DataTypeSpec, Kind, SemError};

use search::{Engine, Meter, Options, SerMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_events: usize,
    pub max_nodes: u64,
    pub max_time: Duration,
}

impl Default for Budget {
    fn default() -> Budget {
        Budget {
            max_events: 12,
            max_nodes: 10_000_000,
            max_time: Duration::from_secs(60),
        }
    }
}

impl Budget {
    fn meter(&self) -> Meter {
        Meter::new(self.max_nodes, Instant::now() + self.max_time)
    }

    fn too_large(&self, h: &History) -> Option<String> {
        (h.len() > self.max_events).then(|| {
            format!(
                "history has {} events, budget allows {}",
                h.len(),
                self.max_events
            )
        })
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Satisfied(Box<Execution>),
    Unsatisfiable,
    Unknown(String),
}

impl Verdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, Verdict::Satisfied(_))
    }

    pub fn is_unsatisfiable(&self) -> bool {
        matches!(self, Verdict::Unsatisfiable)
    }

    pub fn witness(&self) -> Option<&Execution> {
        match self {
            Verdict::Satisfied(e) => Some(e),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Satisfied(_) => f.write_str("satisfied"),
            Verdict::Unsatisfiable => f.write_str("unsatisfiable"),
            Verdict::Unknown(_) => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Semantics(#[from] SemError),
    #[error(transparent)]
    Axiom(#[from] AxiomError),
}

fn precheck(h: &History, dt: &DataTypeSpec, axioms: &[Axiom]) -> Result<(), CheckError> {
    dt.check_history(h)?;
    if let Some(&ax) = axioms.iter().find(|a| a.needs_clocks()) {
        if let Some(e) = h.events().iter().find(|e| e.clocks().is_none()) {
            return Err(AxiomError::MissingClocks {
                axiom: ax,
                event: e.id.clone(),
            }
            .into());
        }
    }
    Ok(())
}

fn build(h: &History, rows: &[Bits], sers: &[Vec<usize>]) -> Option<Execution> {
    Execution::new(h.clone(), Relation::from_in_rows(rows), sers.to_vec()).ok()
}

/// Searches for a valid execution of `h` satisfying `m` and `extra`.
pub fn check_existential(
    h: &History,
    dt: &DataTypeSpec,
    m: &ModelSpec,
    extra: &[Axiom],
    budget: &Budget,
) -> Result<Verdict, CheckError> {
    let m = m.with(extra);
    precheck(h, dt, &m.axioms)?;
    if let Some(why) = budget.too_large(h) {
        return Ok(Verdict::Unknown(why));
    }
    let opts = Options {
        ser_mode: SerMode::First,
        least_rows: true,
        equal_rows: None,
        skip_query_sources: false,
    };
    Ok(find(h, dt, &m, opts, budget))
}

fn find(h: &History, dt: &DataTypeSpec, m: &ModelSpec, opts: Options, budget: &Budget) -> Verdict {
    let mut engine = Engine::new(h, *dt, &m.atoms(), opts, budget.meter());
    let mut found: Option<Result<Execution, String>> = None;
    let _ = engine.run(&mut |rows, sers| {
        found = Some(match build(h, rows, sers) {
            Some(e) if check_valid(&e, dt) && holds_all(&m.axioms, &e).unwrap_or(false) => Ok(e),
            _ => Err("search produced a witness that fails verification".to_string()),
        });
        ControlFlow::Break(())
    });
    match (found, engine.meter.tripped) {
        (Some(Ok(e)), _) => Verdict::Satisfied(Box::new(e)),
        (Some(Err(why)), _) => Verdict::Unknown(why),
        (None, Some(why)) => Verdict::Unknown(why),
        (None, None) => Verdict::Unsatisfiable,
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub executions: Vec<Execution>,
    /// False when the budget ran out before the search finished.
    pub complete: bool,
}

/// Every valid execution of `h` satisfying `m`. With `canonical_tails`, the
/// part of each serialization after its process's last event is fixed to
/// one order, which never changes a result.
pub fn enumerate_valid_executions(
    h: &History,
    dt: &DataTypeSpec,
    m: &ModelSpec,
    canonical_tails: bool,
    budget: &Budget,
) -> Result<Enumeration, CheckError> {
    precheck(h, dt, &m.axioms)?;
    if budget.too_large(h).is_some() {
        return Ok(Enumeration {
            executions: vec![],
            complete: false,
        });
    }
    let ser_mode = if canonical_tails {
        SerMode::CanonicalTails
    } else {
        SerMode::All
    };
    let opts = Options {
        ser_mode,
        least_rows: false,
        equal_rows: None,
        skip_query_sources: false,
    };
    let mut engine = Engine::new(h, *dt, &m.atoms(), opts, budget.meter());
    let mut executions = Vec::new();
    let _ = engine.run(&mut |rows, sers| {
        if let Some(e) = build(h, rows, sers) {
            executions.push(e);
        }
        ControlFlow::Continue(())
    });
    Ok(Enumeration {
        executions,
        complete: engine.meter.tripped.is_none(),
    })
}

#[derive(Clone, Debug)]
pub enum Convergence {
    Holds,
    /// A valid execution where two events with equal operations and equal
    /// visible sets return different results.
    Violated(Box<Execution>),
    Unknown(String),
}

/// Whether every valid execution of `h` satisfying `m` is convergent.
pub fn check_universal_convergence(
    h: &History,
    dt: &DataTypeSpec,
    m: &ModelSpec,
    budget: &Budget,
) -> Result<Convergence, CheckError> {
    precheck(h, dt, &m.axioms)?;
    if let Some(why) = budget.too_large(h) {
        return Ok(Convergence::Unknown(why));
    }
    let ev = h.events();
    let mut unknown = None;
    for x in 0..h.len() {
        for y in x + 1..h.len() {
            if ev[x].op != ev[y].op
                || ev[x].result == ev[y].result
                || dt.constant_result(&ev[x].op).is_some()
            {
                continue;
            }
            let opts = Options {
                ser_mode: SerMode::First,
                least_rows: true,
                equal_rows: Some((x, y)),
                skip_query_sources: false,
            };
            match find(h, dt, m, opts, budget) {
                Verdict::Satisfied(e) => return Ok(Convergence::Violated(e)),
                Verdict::Unsatisfiable => {}
                Verdict::Unknown(why) => unknown = Some(why),
            }
        }
    }
    Ok(unknown.map_or(Convergence::Holds, Convergence::Unknown))
}

/// Whether adding `a vis b` to a valid execution, keeping its
/// serializations, yields another valid execution.
pub fn is_phantom_edge(e: &Execution, dt: &DataTypeSpec, a: usize, b: usize) -> bool {
    if a == b || e.vis().contains(a, b) || !check_valid(e, dt) {
        return false;
    }
    let mut vis = e.vis().clone();
    vis.insert(a, b);
    e.with_vis(vis).is_ok_and(|e2| check_valid(&e2, dt))
}

/// Later events of `a`'s process that see `a`.
pub fn local_viewers(e: &Execution, a: usize) -> Bits {
    e.history().po_after(a) & e.vis().row(a)
}

#[derive(Clone, Debug)]
pub enum Irredundance {
    Irredundant,
    /// A qualifying execution in which the added edges keep every result valid.
    Redundant(Box<Execution>),
    /// No valid execution meets the side conditions, so the history shows nothing.
    Vacuous,
    Unknown(String),
}

/// Decides whether the events `a` and `b` of different processes form an
/// irredundant pair in `h`: in every valid execution with local visibility
/// where neither is seen by the other's local viewers and one precedes the
/// other in the other's serialization, making it visible to those viewers
/// breaks some result.
pub fn check_irredundant_pair(
    h: &History,
    dt: &DataTypeSpec,
    a: usize,
    b: usize,
    budget: &Budget,
) -> Result<Irredundance, CheckError> {
    precheck(h, dt, &[])?;
    if let Some(why) = budget.too_large(h) {
        return Ok(Irredundance::Unknown(why));
    }
    let (i, j) = (h.process_of(a), h.process_of(b));
    assert_ne!(i, j, "irredundant pairs span two processes");
    let query = |x: usize| !dt.is_mutator(&h.event(x).op) && !dt.row_referenced(&h.event(x).op);
    let opts = Options {
        ser_mode: SerMode::First,
        least_rows: true,
        equal_rows: None,
        skip_query_sources: !query(a) && !query(b),
    };
    let local = ModelSpec::custom([Axiom::VisLoc]);
    let mut engine = Engine::new(h, *dt, &local.atoms(), opts, budget.meter());
    let mut dfs = Meter::new(budget.max_nodes, Instant::now() + budget.max_time);
    let mut witness = None;
    let mut qualifying = false;
    let _ = engine.run(&mut |rows, sers| {
        let Some(e) = build(h, rows, sers) else {
            return ControlFlow::Continue(());
        };
        let (lv_a, lv_b) = (local_viewers(&e, a), local_viewers(&e, b));
        if e.vis().row(a) & lv_b != 0 || e.vis().row(b) & lv_a != 0 {
            return ControlFlow::Continue(());
        }
        // Some serialization of j has a before b, or one of i has b before a.
        if !qualifying {
            qualifying = constrained_ser(h, dt, j, rows, rows, (a, b), &mut dfs).is_some()
                || constrained_ser(h, dt, i, rows, rows, (b, a), &mut dfs).is_some();
        }
        // Results of a process depend only on its own serialization, so each
        // option is settled by searching that one serialization.
        for (src, targets, p, first, second) in [(a, lv_b, j, a, b), (b, lv_a, i, b, a)] {
            let mut after = rows.to_vec();
            for t in iter_bits(targets) {
                after[t] |= bit(src);
            }
            if dt.kind() == Kind::Concurrent
                && !e
                    .with_vis(Relation::from_in_rows(&after))
                    .is_ok_and(|e2| check_result_validity(&e2, dt))
            {
                continue;
            }
            let Some(ser) = constrained_ser(h, dt, p, rows, &after, (first, second), &mut dfs)
            else {
                if dfs.tripped.is_some() {
                    return ControlFlow::Break(());
                }
                continue;
            };
            let mut sers = sers.to_vec();
            sers[p] = ser;
            witness = build(h, rows, &sers);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    let tripped = engine.meter.tripped.or(dfs.tripped);
    Ok(match (witness, tripped) {
        (Some(e), _) => Irredundance::Redundant(Box::new(e)),
        (None, Some(why)) => Irredundance::Unknown(why),
        (None, None) if !qualifying => Irredundance::Vacuous,
        (None, None) => Irredundance::Irredundant,
    })
}

/// A serialization for process `p` placing `order.0` before `order.1`, each
/// event of `p` after everything `after` makes visible to it, and agreeing
/// with the results of `p` under both `before` and `after`.
fn constrained_ser(
    h: &History,
    dt: &DataTypeSpec,
    p: usize,
    before: &[Bits],
    after: &[Bits],
    order: (usize, usize),
    meter: &mut Meter,
) -> Option<Vec<usize>> {
    let own = h.process_mask(p);
    let relevant = iter_bits(own).fold(own | bit(order.0) | bit(order.1), |m, o| m | after[o]);
    let check = dt.kind() == Kind::Sequential;
    let ev = h.events();
    let agrees = |placed: &[usize], o: usize| {
        [before[o], after[o]].iter().all(|&row| {
            let prior = placed.iter().filter(|&&x| has(row, x)).map(|&x| &ev[x].op);
            dt.sequential_result(prior, &ev[o].op)
                .ok()
                .flatten()
                .as_ref()
                == Some(&ev[o].result)
        })
    };
    fn go(
        placed: &mut Vec<usize>,
        mask: Bits,
        relevant: Bits,
        ready: &dyn Fn(usize, Bits) -> bool,
        fits: &dyn Fn(&[usize], usize) -> bool,
        meter: &mut Meter,
    ) -> bool {
        if mask == relevant {
            return true;
        }
        if !meter.tick() {
            return false;
        }
        for x in iter_bits(relevant & !mask) {
            if !ready(x, mask) || !fits(placed, x) {
                continue;
            }
            placed.push(x);
            if go(placed, mask | bit(x), relevant, ready, fits, meter) {
                return true;
            }
            placed.pop();
        }
        false
    }
    let ready = |x: usize, mask: Bits| {
        (!has(own, x) || after[x] & !mask == 0) && (x != order.1 || has(mask, order.0))
    };
    let fits = |placed: &[usize], x: usize| !check || !has(own, x) || agrees(placed, x);
    let mut placed = Vec::new();
    if !go(&mut placed, 0, relevant, &ready, &fits, meter) {
        return None;
    }
    placed.extend((0..h.len()).filter(|&x| !has(relevant, x)));
    Some(placed)
}

/// The conjunction of closed past, local and monotonic visibility, and arbitration.
pub fn clam_model() -> ModelSpec {
    let mut m = ModelSpec::custom([Axiom::SerClo, Axiom::VisLoc, Axiom::SerArb, Axiom::VisMon]);
    m.name = "clam".to_string();
    m
}

pub fn clam_demonstration(
    h: &History,
    dt: &DataTypeSpec,
    budget: &Budget,
) -> Result<Verdict, CheckError> {
    check_existential(h, dt, &clam_model(), &[], budget)
}

/// Events a total order places before `x`.
pub(crate) fn before_in(order: &[usize], x: usize) -> Bits {
    order
        .iter()
        .take_while(|&&y| y != x)
        .fold(0, |m, &y| m | bit(y))
}
