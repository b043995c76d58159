//! Consistency axioms as predicates over executions.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::execution::{happens_before, pr_violation, ser_vis_violation, Execution};
use crate::relation::{has, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    VisPr,
    SerVis,
    VisNoCycles,
    VisMon,
    VisLoc,
    SerClo,
    VisPipe,
    SerPipe,
    PropPipe,
    VisCausal,
    SerCausal,
    PropCausal,
    ResConv,
    SerArb,
    SerCompat,
    VisLc,
    VisPc,
    ConsSerial,
    ConsSeq,
    ConsSetSeq,
}

pub const ALL_AXIOMS: [Axiom; 20] = [
    Axiom::VisPr,
    Axiom::SerVis,
    Axiom::VisNoCycles,
    Axiom::VisMon,
    Axiom::VisLoc,
    Axiom::SerClo,
    Axiom::VisPipe,
    Axiom::SerPipe,
    Axiom::PropPipe,
    Axiom::VisCausal,
    Axiom::SerCausal,
    Axiom::PropCausal,
    Axiom::ResConv,
    Axiom::SerArb,
    Axiom::SerCompat,
    Axiom::VisLc,
    Axiom::VisPc,
    Axiom::ConsSerial,
    Axiom::ConsSeq,
    Axiom::ConsSetSeq,
];

impl Axiom {
    pub fn tag(self) -> &'static str {
        use Axiom::*;
        match self {
            VisPr => "vis_pr",
            SerVis => "ser_vis",
            VisNoCycles => "vis_nocycles",
            VisMon => "vis_mon",
            VisLoc => "vis_loc",
            SerClo => "ser_clo",
            VisPipe => "vis_pipe",
            SerPipe => "ser_pipe",
            PropPipe => "prop_pipe",
            VisCausal => "vis_causal",
            SerCausal => "ser_causal",
            PropCausal => "prop_causal",
            ResConv => "res_conv",
            SerArb => "ser_arb",
            SerCompat => "ser_compat",
            VisLc => "vis_lc",
            VisPc => "vis_pc",
            ConsSerial => "cons_serial",
            ConsSeq => "cons_seq",
            ConsSetSeq => "cons_setseq",
        }
    }

    /// Conjunction tags expand to their parts; others to themselves.
    pub fn parts(self) -> &'static [Axiom] {
        use Axiom::*;
        match self {
            PropPipe => &[VisPipe, SerPipe],
            PropCausal => &[VisCausal, SerCausal],
            VisPr => &[VisPr],
            SerVis => &[SerVis],
            VisNoCycles => &[VisNoCycles],
            VisMon => &[VisMon],
            VisLoc => &[VisLoc],
            SerClo => &[SerClo],
            VisPipe => &[VisPipe],
            SerPipe => &[SerPipe],
            VisCausal => &[VisCausal],
            SerCausal => &[SerCausal],
            ResConv => &[ResConv],
            SerArb => &[SerArb],
            SerCompat => &[SerCompat],
            VisLc => &[VisLc],
            VisPc => &[VisPc],
            ConsSerial => &[ConsSerial],
            ConsSeq => &[ConsSeq],
            ConsSetSeq => &[ConsSetSeq],
        }
    }

    pub fn needs_clocks(self) -> bool {
        matches!(self, Axiom::VisLc | Axiom::VisPc)
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AxiomError {
    #[error("unknown axiom '{0}'")]
    Unknown(String),
    #[error("axiom {axiom} needs clock annotations, event '{event}' has none")]
    MissingClocks { axiom: Axiom, event: String },
}

impl FromStr for Axiom {
    type Err = AxiomError;

    fn from_str(s: &str) -> Result<Axiom, AxiomError> {
        let t = s.trim().to_ascii_lowercase();
        ALL_AXIOMS
            .iter()
            .copied()
            .find(|a| a.tag() == t)
            .ok_or_else(|| AxiomError::Unknown(s.to_string()))
    }
}

/// The quantifier instance that falsifies an axiom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub axiom: Axiom,
    pub events: Vec<String>,
    pub process: Option<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.events.join(","))?;
        if let Some(p) = &self.process {
            write!(f, " in ser {p}")?;
        }
        Ok(())
    }
}

/// Precomputed relations shared by all axiom checks on one execution.
pub struct Context<'a> {
    pub e: &'a Execution,
    pub po: Relation,
    pub hb: Relation,
    pub vis_in: Vec<u64>,
}

impl<'a> Context<'a> {
    pub fn new(e: &'a Execution) -> Context<'a> {
        Context {
            e,
            po: e.po(),
            hb: happens_before(e),
            vis_in: e.vis_in(),
        }
    }

    fn vis(&self, a: usize, b: usize) -> bool {
        self.e.vis().contains(a, b)
    }

    fn ser(&self, p: usize, a: usize, b: usize) -> bool {
        self.e.ser_before(p, a, b)
    }

    fn proc_of(&self, i: usize) -> usize {
        self.e.history().process_of(i)
    }

    fn violation(&self, axiom: Axiom, idx: &[usize], p: Option<usize>) -> Violation {
        Violation {
            axiom,
            events: idx.iter().map(|&i| self.e.id(i).to_string()).collect(),
            process: p.map(|p| self.e.history().processes()[p].clone()),
        }
    }

    /// Evaluates one axiom and reports a falsifying instance if it fails.
    pub fn find_violation(&self, ax: Axiom) -> Result<Option<Violation>, AxiomError> {
        use Axiom::*;
        let n = self.e.len();
        let procs = self.e.history().process_count();
        let ev = 0..n;
        let v = |idx: &[usize], p: Option<usize>| Some(self.violation(ax, idx, p));
        Ok(match ax {
            PropPipe | PropCausal => {
                for &part in ax.parts() {
                    if let Some(mut viol) = self.find_violation(part)? {
                        viol.axiom = part;
                        return Ok(Some(viol));
                    }
                }
                None
            }
            VisPr => pr_violation(self.e, &self.hb).and_then(|(a, b)| v(&[a, b], None)),
            SerVis => {
                ser_vis_violation(self.e).and_then(|(a, b)| v(&[a, b], Some(self.proc_of(b))))
            }
            VisNoCycles => ev
                .clone()
                .find(|&a| self.hb.contains(a, a))
                .and_then(|a| v(&[a], None)),
            VisMon => self.po.pairs().find_map(|(b, c)| {
                crate::relation::iter_bits(self.vis_in[b] & !self.vis_in[c])
                    .next()
                    .and_then(|a| v(&[a, b, c], None))
            }),
            VisLoc => self
                .po
                .pairs()
                .find(|&(a, b)| !self.vis(a, b))
                .and_then(|(a, b)| v(&[a, b], None)),
            SerClo => {
                let mut out = None;
                'clo: for b in ev.clone() {
                    let p = self.proc_of(b);
                    for a in crate::relation::iter_bits(self.vis_in[b]) {
                        for c in ev.clone() {
                            if !has(self.vis_in[b], c) && !self.ser(p, a, c) {
                                out = v(&[a, b, c], Some(p));
                                break 'clo;
                            }
                        }
                    }
                }
                out
            }
            VisPipe => {
                let mut out = None;
                'pipe: for (a, b) in self.po.pairs() {
                    for c in crate::relation::iter_bits(self.e.vis().row(b)) {
                        if !self.vis(a, c) {
                            out = v(&[a, b, c], None);
                            break 'pipe;
                        }
                    }
                }
                out
            }
            SerPipe => self.order_violation(ax, |a, b| self.po.contains(a, b)),
            VisCausal => self
                .hb
                .pairs()
                .find(|&(a, b)| !self.vis(a, b))
                .and_then(|(a, b)| v(&[a, b], None)),
            SerCausal => {
                self.order_violation(ax, |a, b| self.hb.contains(a, b) && !self.hb.contains(b, a))
            }
            ResConv => {
                let h = self.e.history();
                let mut out = None;
                'conv: for a in ev.clone() {
                    for b in a + 1..n {
                        let (ea, eb) = (h.event(a), h.event(b));
                        if ea.op == eb.op
                            && self.vis_in[a] == self.vis_in[b]
                            && ea.result != eb.result
                        {
                            out = v(&[a, b], None);
                            break 'conv;
                        }
                    }
                }
                out
            }
            SerArb => (1..procs)
                .find(|&p| self.e.ser(p) != self.e.ser(0))
                .map(|p| Violation {
                    axiom: ax,
                    events: vec![],
                    process: Some(format!(
                        "{} vs {}",
                        self.e.history().processes()[0],
                        self.e.history().processes()[p]
                    )),
                }),
            SerCompat => {
                let mut out = None;
                'compat: for a in ev.clone() {
                    let i = self.proc_of(a);
                    for b in ev.clone() {
                        let j = self.proc_of(b);
                        if a != b && self.ser(j, a, b) && !self.ser(i, a, b) {
                            out = v(&[a, b], Some(i));
                            break 'compat;
                        }
                    }
                }
                out
            }
            VisLc | VisPc => {
                let h = self.e.history();
                if let Some(bad) = h.events().iter().find(|e| e.clocks().is_none()) {
                    return Err(AxiomError::MissingClocks {
                        axiom: ax,
                        event: bad.id.clone(),
                    });
                }
                self.e
                    .vis()
                    .pairs()
                    .find(|&(a, b)| {
                        h.event(a).clock_start.unwrap() >= h.event(b).clock_end.unwrap()
                    })
                    .and_then(|(a, b)| v(&[a, b], None))
            }
            ConsSerial => {
                let mut out = None;
                'serial: for o in ev.clone() {
                    let p = self.proc_of(o);
                    for x in ev.clone() {
                        if x != o && self.ser(p, x, o) != has(self.vis_in[o], x) {
                            out = v(&[x, o], Some(p));
                            break 'serial;
                        }
                    }
                }
                out
            }
            ConsSeq => {
                let vis = self.e.vis();
                let total = (0..n)
                    .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                    .find(|&(a, b)| vis.contains(a, b) == vis.contains(b, a));
                if let Some((a, b)) = total {
                    v(&[a, b], None)
                } else if let Some((a, b)) = self.po.pairs().find(|&(a, b)| !vis.contains(a, b)) {
                    v(&[a, b], None)
                } else if let Some((a, b)) = vis
                    .transitive_closure()
                    .pairs()
                    .find(|&(a, b)| !vis.contains(a, b))
                {
                    v(&[a, b], None)
                } else {
                    self.order_violation(ax, |a, b| vis.contains(a, b))
                }
            }
            ConsSetSeq => {
                let vis = self.e.vis();
                let pre = |a: usize, b: usize| a == b || vis.contains(a, b);
                let total = (0..n)
                    .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                    .find(|&(a, b)| !pre(a, b) && !pre(b, a));
                let mut trans = None;
                't: for a in ev.clone() {
                    for b in ev.clone() {
                        if !pre(a, b) {
                            continue;
                        }
                        for c in ev.clone() {
                            if pre(b, c) && !pre(a, c) {
                                trans = Some([a, b, c]);
                                break 't;
                            }
                        }
                    }
                }
                if let Some((a, b)) = total {
                    v(&[a, b], None)
                } else if let Some(t) = trans {
                    v(&t, None)
                } else if let Some((a, b)) = self.po.pairs().find(|&(a, b)| !vis.contains(a, b)) {
                    v(&[a, b], None)
                } else {
                    self.order_violation(ax, |a, b| vis.contains(a, b) && !vis.contains(b, a))
                }
            }
        })
    }

    /// First pair required in order by `rel` that some serialization inverts.
    fn order_violation(&self, ax: Axiom, rel: impl Fn(usize, usize) -> bool) -> Option<Violation> {
        let n = self.e.len();
        for p in 0..self.e.history().process_count() {
            for a in 0..n {
                for b in 0..n {
                    if a != b && rel(a, b) && !self.ser(p, a, b) {
                        return Some(self.violation(ax, &[a, b], Some(p)));
                    }
                }
            }
        }
        None
    }
}

pub fn holds(ax: Axiom, e: &Execution) -> Result<bool, AxiomError> {
    Context::new(e).find_violation(ax).map(|v| v.is_none())
}

pub fn violation(ax: Axiom, e: &Execution) -> Result<Option<Violation>, AxiomError> {
    Context::new(e).find_violation(ax)
}

pub fn holds_logical_clock(e: &Execution) -> Result<bool, AxiomError> {
    holds(Axiom::VisLc, e)
}

/// True iff every axiom holds; clock errors are propagated.
pub fn holds_all(axioms: &[Axiom], e: &Execution) -> Result<bool, AxiomError> {
    let cx = Context::new(e);
    for &ax in axioms {
        if cx.find_violation(ax)?.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}
