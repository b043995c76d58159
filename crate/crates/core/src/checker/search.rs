//! Backtracking search over visibility, followed by serialization search.
//!
//! Visibility is chosen one event at a time as that event's set of visible
//! predecessors (its row). Constraints between rows are checked as soon as
//! every row they mention has been chosen. Once all rows are fixed, the
//! serializations are built as linear extensions of the ordering constraints
//! the model imposes, checking sequential results as each event is placed.
//!
//! Two reductions keep the space small:
//! - An update whose result is constant and whose row no other result reads
//!   only feels its own row through constraints that fewer edges can never
//!   break. Such rows are not branched on; they take the least row the
//!   model forces. This applies only when every axiom in play is of that kind.
//! - In a serialization for process `i`, once every event of `i` is placed
//!   the order of the remaining events cannot affect any result, so a single
//!   completion is tried.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::ControlFlow;
use std::time::Instant;

use crate::axioms::Axiom;
use crate::history::History;
use crate::relation::{bit, close_rows, has, iter_bits, Bits};
use crate::semantics::{DataTypeSpec, Kind, SeqState};
use crate::value::Value;

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Flags {
    po_forced: bool,
    mon: bool,
    pipe: bool,
    trans: bool,
    nocycles: bool,
    clocks: bool,
    serial: bool,
    clo: bool,
    arb: bool,
    ser_pipe: bool,
    ser_causal: bool,
    compat: bool,
    seq: bool,
    setseq: bool,
    conv: bool,
}

impl Flags {
    pub fn new(atoms: &BTreeSet<Axiom>) -> Flags {
        use Axiom::*;
        let a = |x: Axiom| atoms.contains(&x);
        Flags {
            po_forced: a(VisLoc) || a(VisCausal) || a(ConsSeq) || a(ConsSetSeq),
            mon: a(VisMon),
            pipe: a(VisPipe),
            trans: a(VisCausal) || a(ConsSeq),
            nocycles: a(VisNoCycles),
            clocks: a(VisLc) || a(VisPc),
            serial: a(ConsSerial),
            clo: a(SerClo),
            arb: a(SerArb),
            ser_pipe: a(SerPipe),
            ser_causal: a(SerCausal),
            compat: a(SerCompat),
            seq: a(ConsSeq),
            setseq: a(ConsSetSeq),
            conv: a(ResConv),
        }
    }

    /// Whether the least-row reduction is sound for this model: no axiom
    /// may be broken by removing edges into a constant-result update.
    fn admits_least_rows(&self) -> bool {
        !(self.serial || self.ser_causal || self.seq || self.setseq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SerMode {
    /// One serialization family per visibility relation.
    First,
    /// Every serialization family, with tails after a process's last event canonical.
    CanonicalTails,
    /// Every serialization family.
    All,
}

pub(crate) struct Meter {
    pub nodes: u64,
    max_nodes: u64,
    deadline: Instant,
    pub tripped: Option<String>,
}

impl Meter {
    pub fn new(max_nodes: u64, deadline: Instant) -> Meter {
        Meter {
            nodes: 0,
            max_nodes,
            deadline,
            tripped: None,
        }
    }

    #[inline]
    pub(crate) fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.tripped.is_some() {
            return false;
        }
        if self.nodes > self.max_nodes {
            self.tripped = Some(format!("node budget of {} exhausted", self.max_nodes));
            return false;
        }
        if self.nodes.is_multiple_of(1024) && Instant::now() > self.deadline {
            self.tripped = Some("wall-clock budget exhausted".to_string());
            return false;
        }
        true
    }
}

pub(crate) struct Options {
    pub ser_mode: SerMode,
    pub least_rows: bool,
    /// Rows of these two events must be equal.
    pub equal_rows: Option<(usize, usize)>,
    /// Visibility edges whose source is a pure query are never tried.
    pub skip_query_sources: bool,
}

/// Called with the rows (`rows[b]` holds the events visible to `b`) and one
/// serialization per process.
pub(crate) type Sink<'s> = dyn FnMut(&[Bits], &[Vec<usize>]) -> ControlFlow<()> + 's;

pub(crate) struct Engine<'a> {
    h: &'a History,
    dt: DataTypeSpec,
    f: Flags,
    n: usize,
    opts: Options,
    impossible: bool,
    allowed: Vec<Bits>,
    forced: Vec<Bits>,
    order: Vec<usize>,
    n_branch: usize,
    constant: Bits,
    objects: Vec<Value>,
    mutators: Bits,
    rows: Vec<Bits>,
    decided: Bits,
    evaluated: Bits,
    feasible_cache: HashMap<(usize, Bits), bool>,
    pub meter: Meter,
}

impl<'a> Engine<'a> {
    pub fn new(
        h: &'a History,
        dt: DataTypeSpec,
        atoms: &BTreeSet<Axiom>,
        opts: Options,
        meter: Meter,
    ) -> Engine<'a> {
        let f = Flags::new(atoms);
        let n = h.len();
        let ev = h.events();
        let mut impossible = false;
        let mut constant = 0;
        let mut mutators = 0;
        for (i, e) in ev.iter().enumerate() {
            if let Some(v) = dt.constant_result(&e.op) {
                constant |= bit(i);
                impossible |= v != e.result;
            }
            if dt.kind() == Kind::Sequential && dt.is_mutator(&e.op) {
                mutators |= bit(i);
            }
        }
        let queries_only: Bits = (0..n)
            .filter(|&i| match dt.kind() {
                Kind::Sequential => !has(mutators, i),
                Kind::Concurrent => {
                    !dt.row_referenced(&ev[i].op) && matches!(ev[i].op.name.as_str(), "val" | "rd")
                }
            })
            .fold(0, |m, i| m | bit(i));
        let mut allowed = vec![0; n];
        let mut forced = vec![0; n];
        for o in 0..n {
            let mut a = h.all_mask() & !bit(o) & !h.po_after(o);
            if f.clocks {
                for x in iter_bits(a) {
                    let (Some(start), Some(end)) = (ev[x].clock_start, ev[o].clock_end) else {
                        continue;
                    };
                    if start >= end {
                        a &= !bit(x);
                    }
                }
            }
            if f.po_forced {
                forced[o] = h.po_before(o);
            }
            if opts.skip_query_sources {
                a &= !(queries_only & !forced[o]);
            }
            allowed[o] = a;
            impossible |= forced[o] & !allowed[o] != 0;
        }
        let least = opts.least_rows && f.admits_least_rows();
        let is_least = |o: usize| {
            least
                && has(constant, o)
                && !dt.row_referenced(&ev[o].op)
                && (!f.clo || h.po_before(o) == 0)
                && opts.equal_rows.is_none_or(|(x, y)| o != x && o != y)
        };
        let mut order: Vec<usize> = (0..n).filter(|&o| !is_least(o)).collect();
        let n_branch = order.len();
        order.extend((0..n).filter(|&o| is_least(o)));
        let objects = ev
            .iter()
            .map(|e| e.op.object().cloned().unwrap_or(Value::Unit))
            .collect();
        Engine {
            h,
            dt,
            f,
            n,
            opts,
            impossible,
            allowed,
            forced,
            order,
            n_branch,
            constant,
            objects,
            mutators,
            rows: vec![0; n],
            decided: 0,
            evaluated: 0,
            feasible_cache: HashMap::new(),
            meter,
        }
    }

    pub fn run(&mut self, sink: &mut Sink<'_>) -> ControlFlow<()> {
        if self.impossible {
            return ControlFlow::Continue(());
        }
        self.descend(0, sink)
    }

    fn descend(&mut self, k: usize, sink: &mut Sink<'_>) -> ControlFlow<()> {
        if !self.meter.tick() {
            return ControlFlow::Break(());
        }
        if k == self.n_branch {
            return self.settle_least_rows(sink);
        }
        let o = self.order[k];
        let free = self.allowed[o] & !self.forced[o];
        let mut sub: Bits = 0;
        loop {
            let r = self.forced[o] | sub;
            if self.accept(o, r) {
                let saved = (self.decided, self.evaluated);
                if self.commit(o, r) {
                    self.descend(k + 1, sink)?;
                }
                self.rows[o] = 0;
                (self.decided, self.evaluated) = saved;
            }
            if sub == free {
                break;
            }
            sub = sub.wrapping_sub(free) & free;
        }
        ControlFlow::Continue(())
    }

    /// Gives the remaining events their least forced rows, then serializes.
    fn settle_least_rows(&mut self, sink: &mut Sink<'_>) -> ControlFlow<()> {
        let rest: Vec<usize> = self.order[self.n_branch..].to_vec();
        let mut least: Vec<Bits> = self.rows.clone();
        for &u in &rest {
            least[u] = self.forced[u];
        }
        loop {
            let mut changed = false;
            for &u in &rest {
                let mut r = least[u];
                if self.f.mon {
                    for b in iter_bits(self.h.po_before(u)) {
                        r |= least[b];
                    }
                }
                if self.f.pipe {
                    for b in iter_bits(r) {
                        r |= self.h.po_before(b);
                    }
                }
                if self.f.trans {
                    for b in iter_bits(r) {
                        r |= least[b];
                    }
                }
                r &= !bit(u);
                if r != least[u] {
                    least[u] = r;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let saved = (self.decided, self.evaluated);
        let mut ok = true;
        for &u in &rest {
            let r = least[u];
            if r & !self.allowed[u] != 0 || !self.accept(u, r) || !self.commit(u, r) {
                ok = false;
                break;
            }
        }
        let flow = if ok {
            self.serialize(sink)
        } else {
            ControlFlow::Continue(())
        };
        for &u in &rest {
            self.rows[u] = 0;
        }
        (self.decided, self.evaluated) = saved;
        flow
    }

    fn same_group(&self, a: usize, b: usize) -> bool {
        self.f.arb || self.h.process_of(a) == self.h.process_of(b)
    }

    /// Checks row `r` for `o` against every decided row.
    fn accept(&mut self, o: usize, r: Bits) -> bool {
        let h = self.h;
        let d = self.decided;
        let rows = &self.rows;
        if self.f.pipe && iter_bits(r).any(|b| h.po_before(b) & !r != 0) {
            return false;
        }
        if self.f.mon {
            if iter_bits(h.po_before(o) & d).any(|b| rows[b] & !r != 0) {
                return false;
            }
            if iter_bits(h.po_after(o) & d).any(|c| r & !rows[c] != 0) {
                return false;
            }
        }
        if self.f.trans {
            if iter_bits(r & d).any(|b| rows[b] & !r != 0) {
                return false;
            }
            if iter_bits(d).any(|c| has(rows[c], o) && r & !rows[c] != 0) {
                return false;
            }
        }
        if self.f.seq && iter_bits(d).any(|b| has(r, b) == has(rows[b], o)) {
            return false;
        }
        if self.f.setseq {
            if iter_bits(d).any(|b| !has(r, b) && !has(rows[b], o)) {
                return false;
            }
            if iter_bits(r & d).any(|b| rows[b] & !bit(o) & !r != 0) {
                return false;
            }
            if iter_bits(d).any(|c| has(rows[c], o) && r & !bit(c) & !rows[c] != 0) {
                return false;
            }
        }
        if self.f.serial {
            for q in iter_bits(d) {
                if !self.same_group(o, q) {
                    continue;
                }
                let q_first = has(r, q) && (rows[q] | bit(q)) & !r == 0;
                let o_first = has(rows[q], o) && (r | bit(o)) & !rows[q] == 0;
                if !q_first && !o_first {
                    return false;
                }
            }
        }
        if self.f.clo {
            for q in iter_bits(d) {
                if self.same_group(o, q) && r & !rows[q] != 0 && rows[q] & !r != 0 {
                    return false;
                }
            }
        }
        if self.f.conv {
            let eo = h.event(o);
            for q in iter_bits(d) {
                let eq = h.event(q);
                if rows[q] == r && eq.op == eo.op && eq.result != eo.result {
                    return false;
                }
            }
        }
        if let Some((x, y)) = self.opts.equal_rows {
            let other = if o == x {
                y
            } else if o == y {
                x
            } else {
                usize::MAX
            };
            if other != usize::MAX && has(d, other) && rows[other] != r {
                return false;
            }
        }
        if self.dt.kind() == Kind::Sequential && !has(self.constant, o) && !self.feasible(o, r) {
            return false;
        }
        true
    }

    /// Records the row and runs the checks that need the new closure.
    fn commit(&mut self, o: usize, r: Bits) -> bool {
        self.rows[o] = r;
        self.decided |= bit(o);
        let h = self.h;
        let mut succ: Vec<Bits> = (0..self.n).map(|a| h.po_after(a)).collect();
        for b in iter_bits(self.decided) {
            for a in iter_bits(self.rows[b]) {
                succ[a] |= bit(b);
            }
        }
        close_rows(&mut succ);
        for (a, &s) in succ.iter().enumerate() {
            if s & h.po_before(a) != 0 || (self.f.nocycles && has(s, a)) {
                return false;
            }
        }
        if self.dt.kind() == Kind::Concurrent {
            for x in iter_bits(self.decided & !self.evaluated) {
                if has(self.constant, x) {
                    self.evaluated |= bit(x);
                    continue;
                }
                let deps = self.dt.result_dependencies(h, x, self.rows[x]) | bit(x);
                if deps & !self.decided != 0 {
                    continue;
                }
                match self.dt.concurrent_result(h.events(), &self.rows, x) {
                    Ok(Some(v)) if v == h.event(x).result => self.evaluated |= bit(x),
                    _ => return false,
                }
            }
        }
        true
    }

    /// Whether some order of the visible updates yields the recorded result of `o`.
    fn feasible(&mut self, o: usize, r: Bits) -> bool {
        let rel = iter_bits(r & self.mutators)
            .filter(|&x| self.objects[x] == self.objects[o])
            .fold(0, |m, x| m | bit(x));
        if rel.count_ones() > 10 {
            return true;
        }
        if let Some(&ok) = self.feasible_cache.get(&(o, rel)) {
            return ok;
        }
        let mut seen = HashSet::new();
        let ok = self.feasible_from(o, rel, self.dt.initial_state(), &mut seen);
        self.feasible_cache.insert((o, rel), ok);
        ok
    }

    fn feasible_from(
        &self,
        o: usize,
        left: Bits,
        st: SeqState,
        seen: &mut HashSet<(Bits, SeqState)>,
    ) -> bool {
        let ev = self.h.events();
        if left == 0 {
            let mut st = st;
            return matches!(self.dt.apply(&mut st, &ev[o].op), Ok(Some(v)) if v == ev[o].result);
        }
        if !seen.insert((left, st.clone())) {
            return false;
        }
        iter_bits(left).any(|x| {
            let mut next = st.clone();
            matches!(self.dt.apply(&mut next, &ev[x].op), Ok(Some(_)))
                && self.feasible_from(o, left & !bit(x), next, seen)
        })
    }

    fn hb_rows(&self) -> Vec<Bits> {
        let h = self.h;
        let mut succ: Vec<Bits> = (0..self.n).map(|a| h.po_after(a)).collect();
        for b in 0..self.n {
            for a in iter_bits(self.rows[b]) {
                succ[a] |= bit(b);
            }
        }
        close_rows(&mut succ);
        succ
    }

    /// Ordering constraints for the serialization of the given processes:
    /// `prec[b]` must all come before `b`.
    fn precedences(&self, group: Bits, hb: &[Bits]) -> Vec<Bits> {
        let n = self.n;
        let h = self.h;
        let rows = &self.rows;
        let all = h.all_mask();
        let mut prec = vec![0; n];
        for b in iter_bits(group) {
            prec[b] |= rows[b];
        }
        if self.f.ser_pipe {
            for (b, p) in prec.iter_mut().enumerate() {
                *p |= h.po_before(b);
            }
        }
        if self.f.ser_causal {
            for a in 0..n {
                for b in iter_bits(hb[a] & !bit(a)) {
                    prec[b] |= bit(a);
                }
            }
        }
        if self.f.clo {
            for b in iter_bits(group) {
                let outside = all & !rows[b];
                for c in iter_bits(outside) {
                    prec[c] |= rows[b];
                }
            }
        }
        if self.f.serial {
            for o in iter_bits(group) {
                prec[o] |= rows[o];
                for x in iter_bits(all & !rows[o] & !bit(o)) {
                    prec[x] |= bit(o);
                }
            }
        }
        if self.f.seq {
            for (b, p) in prec.iter_mut().enumerate() {
                *p |= rows[b];
            }
        }
        if self.f.setseq {
            for b in 0..n {
                for a in iter_bits(rows[b]) {
                    if !has(rows[a], b) {
                        prec[b] |= bit(a);
                    }
                }
            }
        }
        for (b, p) in prec.iter_mut().enumerate() {
            *p &= !bit(b);
        }
        prec
    }

    fn serialize(&mut self, sink: &mut Sink<'_>) -> ControlFlow<()> {
        let h = self.h;
        let hb = self.hb_rows();
        if self.f.ser_causal && (0..self.n).any(|a| has(hb[a], a)) {
            return ControlFlow::Continue(());
        }
        let groups: Vec<Bits> = if self.f.arb {
            vec![h.all_mask()]
        } else {
            (0..h.process_count()).map(|p| h.process_mask(p)).collect()
        };
        let mode = if self.f.compat && self.opts.ser_mode != SerMode::All {
            SerMode::All
        } else {
            self.opts.ser_mode
        };
        let mut lin: Vec<LinExt> = groups
            .iter()
            .map(|&g| {
                let queries = if self.dt.kind() == Kind::Sequential {
                    g & !self.constant
                } else {
                    0
                };
                LinExt::new(self, self.precedences(g, &hb), queries, g)
            })
            .collect();
        if mode == SerMode::First && !self.f.compat {
            let mut chosen = Vec::with_capacity(lin.len());
            for l in lin.iter_mut() {
                let mut got = None;
                l.search(self, SerMode::First, &mut |s| {
                    got = Some(s.to_vec());
                    ControlFlow::Break(())
                });
                if self.meter.tripped.is_some() {
                    return ControlFlow::Break(());
                }
                match got {
                    Some(s) => chosen.push(s),
                    None => return ControlFlow::Continue(()),
                }
            }
            return sink(&self.rows, &self.expand(chosen));
        }
        let mut chosen = Vec::new();
        let flow = self.product(&mut lin, 0, mode, &mut chosen, sink);
        if self.meter.tripped.is_some() {
            return ControlFlow::Break(());
        }
        flow
    }

    fn product(
        &mut self,
        lin: &mut [LinExt],
        g: usize,
        mode: SerMode,
        chosen: &mut Vec<Vec<usize>>,
        sink: &mut Sink<'_>,
    ) -> ControlFlow<()> {
        if g == lin.len() {
            let sers = self.expand(chosen.clone());
            if self.f.compat && !compatible(self.h, &sers) {
                return ControlFlow::Continue(());
            }
            return sink(&self.rows, &sers);
        }
        let mut sols: Vec<Vec<usize>> = Vec::new();
        lin[g].search(self, mode, &mut |s| {
            sols.push(s.to_vec());
            ControlFlow::Continue(())
        });
        if self.meter.tripped.is_some() {
            return ControlFlow::Break(());
        }
        for s in sols {
            chosen.push(s);
            let flow = self.product(lin, g + 1, mode, chosen, sink);
            chosen.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }

    fn expand(&self, chosen: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
        if self.f.arb {
            vec![chosen.into_iter().next().unwrap_or_default(); self.h.process_count()]
        } else {
            chosen
        }
    }
}

fn compatible(h: &History, sers: &[Vec<usize>]) -> bool {
    let n = h.len();
    let pos: Vec<Vec<usize>> = sers
        .iter()
        .map(|s| {
            let mut p = vec![0; n];
            for (k, &e) in s.iter().enumerate() {
                p[e] = k;
            }
            p
        })
        .collect();
    (0..n).all(|a| {
        let i = h.process_of(a);
        (0..n).all(|b| {
            let j = h.process_of(b);
            a == b || pos[j][a] > pos[j][b] || pos[i][a] < pos[i][b]
        })
    })
}

/// Linear extensions of one group's precedence constraints that give every
/// query in the group its recorded result.
struct LinExt {
    prec: Vec<Bits>,
    queries: Vec<usize>,
    qmask: Bits,
    /// Updates folded into each query's state.
    feeds: Vec<Bits>,
    group: Bits,
    memo: HashSet<(Bits, Vec<SeqState>)>,
}

impl LinExt {
    fn new(e: &Engine, prec: Vec<Bits>, qmask: Bits, group: Bits) -> LinExt {
        let queries: Vec<usize> = iter_bits(qmask).collect();
        let feeds = queries
            .iter()
            .map(|&q| {
                iter_bits(e.rows[q] & e.mutators)
                    .filter(|&x| e.objects[x] == e.objects[q])
                    .fold(0, |m, x| m | bit(x))
            })
            .collect();
        LinExt {
            prec,
            queries,
            qmask,
            feeds,
            group,
            memo: HashSet::new(),
        }
    }

    fn search(
        &mut self,
        e: &mut Engine,
        mode: SerMode,
        f: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) {
        let states = vec![e.dt.initial_state(); self.queries.len()];
        let mut seq = Vec::with_capacity(e.n);
        let _ = self.step(e, mode, 0, &mut seq, states, f);
    }

    /// Returns whether any complete extension was reached below this node.
    fn step(
        &mut self,
        e: &mut Engine,
        mode: SerMode,
        placed: Bits,
        seq: &mut Vec<usize>,
        states: Vec<SeqState>,
        f: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> (bool, ControlFlow<()>) {
        if !e.meter.tick() {
            return (false, ControlFlow::Break(()));
        }
        let all = e.h.all_mask();
        let done_relevant = match mode {
            SerMode::All => placed == all,
            _ => self.qmask & !placed == 0 && (mode == SerMode::First || self.group & !placed == 0),
        };
        if done_relevant {
            return self.complete(e, mode, placed, seq, f);
        }
        let key = (placed, self.pending_states(placed, &states));
        if self.memo.contains(&key) {
            return (false, ControlFlow::Continue(()));
        }
        let mut any = false;
        for x in iter_bits(all & !placed) {
            if self.prec[x] & !placed != 0 {
                continue;
            }
            let Some(next) = self.place(e, x, placed, &states) else {
                continue;
            };
            seq.push(x);
            let (found, flow) = self.step(e, mode, placed | bit(x), seq, next, f);
            seq.pop();
            any |= found;
            if flow.is_break() {
                return (any, flow);
            }
        }
        if !any {
            self.memo.insert(key);
        }
        (any, ControlFlow::Continue(()))
    }

    fn pending_states(&self, placed: Bits, states: &[SeqState]) -> Vec<SeqState> {
        self.queries
            .iter()
            .zip(states)
            .filter(|(q, _)| !has(placed, **q))
            .map(|(_, s)| s.clone())
            .collect()
    }

    /// Places `x`: checks its result if it is a query and feeds it to pending queries.
    fn place(
        &self,
        e: &Engine,
        x: usize,
        placed: Bits,
        states: &[SeqState],
    ) -> Option<Vec<SeqState>> {
        let ev = e.h.events();
        let mut next = states.to_vec();
        for (k, &q) in self.queries.iter().enumerate() {
            if has(placed, q) {
                continue;
            }
            if q == x {
                let mut st = next[k].clone();
                match e.dt.apply(&mut st, &ev[q].op) {
                    Ok(Some(v)) if v == ev[q].result => {}
                    _ => return None,
                }
            } else if has(self.feeds[k], x) {
                match e.dt.apply(&mut next[k], &ev[x].op) {
                    Ok(Some(_)) => {}
                    _ => return None,
                }
            }
        }
        Some(next)
    }

    /// Orders the remaining events once no result can depend on them.
    fn complete(
        &mut self,
        e: &mut Engine,
        mode: SerMode,
        placed: Bits,
        seq: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> (bool, ControlFlow<()>) {
        let all = e.h.all_mask();
        if mode == SerMode::All {
            if placed == all {
                return (true, f(seq));
            }
            let mut any = false;
            for x in iter_bits(all & !placed) {
                if self.prec[x] & !placed != 0 {
                    continue;
                }
                if !e.meter.tick() {
                    return (any, ControlFlow::Break(()));
                }
                seq.push(x);
                let (found, flow) = self.complete(e, mode, placed | bit(x), seq, f);
                seq.pop();
                any |= found;
                if flow.is_break() {
                    return (any, flow);
                }
            }
            return (any, ControlFlow::Continue(()));
        }
        let start = seq.len();
        let mut placed = placed;
        while placed != all {
            let Some(x) = iter_bits(all & !placed).find(|&x| self.prec[x] & !placed == 0) else {
                seq.truncate(start);
                return (false, ControlFlow::Continue(()));
            };
            seq.push(x);
            placed |= bit(x);
        }
        let flow = f(seq);
        seq.truncate(start);
        (true, flow)
    }
}
