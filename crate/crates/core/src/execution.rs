//! Abstract executions: a history with visibility and one serialization per process.

use std::fmt;

use thiserror::Error;

use crate::history::{is_blank_or_comment, render_history, History, HistoryError, HistoryReader};
use crate::relation::{Bits, Relation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecutionError {
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("unknown event id '{0}'")]
    UnknownEvent(String),
    #[error("unknown process '{0}'")]
    UnknownProcess(String),
    #[error("visibility edge {0} -> {0} is reflexive")]
    Reflexive(String),
    #[error("process '{0}' has no serialization")]
    MissingSerialization(String),
    #[error("serialization of process '{0}' is not a permutation of all events")]
    NotPermutation(String),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// Irreflexive visibility over the events of a history, by index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Visibility(Relation);

impl Visibility {
    pub fn new(rel: Relation) -> Result<Visibility, ExecutionError> {
        if let Some(a) = (0..rel.len()).find(|&a| rel.contains(a, a)) {
            return Err(ExecutionError::Reflexive(a.to_string()));
        }
        Ok(Visibility(rel))
    }

    pub fn relation(&self) -> &Relation {
        &self.0
    }
}

/// One total order over all events per process, indexed like the history's processes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Serializations(Vec<Vec<usize>>);

impl Serializations {
    pub fn of(&self, p: usize) -> &[usize] {
        &self.0[p]
    }

    pub fn all(&self) -> &[Vec<usize>] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution {
    history: History,
    vis: Visibility,
    sers: Serializations,
    /// `pos[p][e]` is the position of event `e` in the serialization of process `p`.
    pos: Vec<Vec<usize>>,
}

impl Execution {
    pub fn new(
        history: History,
        vis: Relation,
        sers: Vec<Vec<usize>>,
    ) -> Result<Execution, ExecutionError> {
        assert_eq!(
            vis.len(),
            history.len(),
            "visibility must range over the history's events"
        );
        let vis = Visibility::new(vis).map_err(|e| match e {
            ExecutionError::Reflexive(i) => {
                ExecutionError::Reflexive(history.event(i.parse().unwrap()).id.clone())
            }
            e => e,
        })?;
        if sers.len() != history.process_count() {
            let missing = history
                .processes()
                .get(sers.len())
                .cloned()
                .unwrap_or_default();
            return Err(ExecutionError::MissingSerialization(missing));
        }
        let n = history.len();
        let mut pos = Vec::with_capacity(sers.len());
        for (p, s) in sers.iter().enumerate() {
            let mut at = vec![usize::MAX; n];
            for (k, &e) in s.iter().enumerate() {
                if e >= n || at[e] != usize::MAX {
                    return Err(ExecutionError::NotPermutation(
                        history.processes()[p].clone(),
                    ));
                }
                at[e] = k;
            }
            if s.len() != n {
                return Err(ExecutionError::NotPermutation(
                    history.processes()[p].clone(),
                ));
            }
            pos.push(at);
        }
        Ok(Execution {
            history,
            vis,
            sers: Serializations(sers),
            pos,
        })
    }

    /// Builds an execution from event ids.
    pub fn from_ids<'a>(
        history: History,
        vis: impl IntoIterator<Item = (&'a str, &'a str)>,
        sers: impl IntoIterator<Item = (&'a str, Vec<&'a str>)>,
    ) -> Result<Execution, ExecutionError> {
        let idx = |id: &str| {
            history
                .index_of(id)
                .ok_or_else(|| ExecutionError::UnknownEvent(id.to_string()))
        };
        let mut rel = Relation::empty(history.len());
        for (a, b) in vis {
            rel.insert(idx(a)?, idx(b)?);
        }
        let mut by_proc: Vec<Option<Vec<usize>>> = vec![None; history.process_count()];
        for (pid, ids) in sers {
            let p = history
                .process_index(pid)
                .ok_or_else(|| ExecutionError::UnknownProcess(pid.to_string()))?;
            by_proc[p] = Some(ids.into_iter().map(idx).collect::<Result<_, _>>()?);
        }
        let mut out = Vec::new();
        for (p, s) in by_proc.into_iter().enumerate() {
            out.push(s.ok_or_else(|| {
                ExecutionError::MissingSerialization(history.processes()[p].clone())
            })?);
        }
        Execution::new(history, rel, out)
    }

    /// Every process uses the same serialization.
    pub fn with_shared_order(
        history: History,
        vis: Relation,
        order: Vec<usize>,
    ) -> Result<Execution, ExecutionError> {
        let sers = vec![order; history.process_count()];
        Execution::new(history, vis, sers)
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn vis(&self) -> &Relation {
        self.vis.relation()
    }

    pub fn visibility(&self) -> &Visibility {
        &self.vis
    }

    pub fn serializations(&self) -> &Serializations {
        &self.sers
    }

    pub fn ser(&self, p: usize) -> &[usize] {
        self.sers.of(p)
    }

    /// `a` precedes `b` in the serialization of process `p`.
    #[inline]
    pub fn ser_before(&self, p: usize, a: usize, b: usize) -> bool {
        self.pos[p][a] < self.pos[p][b]
    }

    pub fn vis_in(&self) -> Vec<Bits> {
        self.vis().in_rows()
    }

    pub fn po(&self) -> Relation {
        crate::history::program_order(&self.history)
    }

    pub fn with_vis(&self, vis: Relation) -> Result<Execution, ExecutionError> {
        Execution::new(self.history.clone(), vis, self.sers.0.clone())
    }

    pub fn id(&self, i: usize) -> &str {
        &self.history.event(i).id
    }
}

/// Transitive closure of program order and visibility.
pub fn happens_before(e: &Execution) -> Relation {
    e.po().union(e.vis()).transitive_closure()
}

pub(crate) fn pr_violation(e: &Execution, hb: &Relation) -> Option<(usize, usize)> {
    hb.pairs().find(|&(a, b)| e.history().po(b, a))
}

pub fn check_physical_realizability(e: &Execution) -> bool {
    pr_violation(e, &happens_before(e)).is_none()
}

pub fn check_acyclicity(e: &Execution) -> bool {
    !e.po().union(e.vis()).has_cycle()
}

pub(crate) fn ser_vis_violation(e: &Execution) -> Option<(usize, usize)> {
    let h = e.history();
    e.vis()
        .pairs()
        .find(|&(a, b)| !e.ser_before(h.process_of(b), a, b))
}

pub fn check_serialization_of_visibility(e: &Execution) -> bool {
    ser_vis_violation(e).is_none()
}

pub fn check_well_formed(e: &Execution) -> bool {
    check_physical_realizability(e) && check_serialization_of_visibility(e)
}

/// Execution witness file: history blocks, then `vis:` edges and `ser <pid>:` lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessFile {
    pub execution: Execution,
    /// Messaging happens-before edges, present in simulator trace dumps.
    pub msg_hb: Option<Relation>,
}

enum Section {
    History,
    Vis,
    MsgHb,
}

pub fn parse_witness(text: &str) -> Result<WitnessFile, ExecutionError> {
    let mut reader = HistoryReader::new();
    let mut section = Section::History;
    let mut edges: Vec<(usize, String, String)> = Vec::new();
    let mut mhb: Option<Vec<(usize, String, String)>> = None;
    let mut sers: Vec<(usize, String, Vec<String>)> = Vec::new();
    let syntax = |line: usize, msg: &str| ExecutionError::Syntax {
        line,
        msg: msg.to_string(),
    };
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if is_blank_or_comment(raw) {
            continue;
        }
        let t = raw.trim();
        if t == "vis:" {
            section = Section::Vis;
            continue;
        }
        if t == "msghb:" {
            section = Section::MsgHb;
            mhb.get_or_insert_with(Vec::new);
            continue;
        }
        if let Some(rest) = t.strip_prefix("ser ") {
            let (pid, ids) = rest
                .split_once(':')
                .ok_or_else(|| syntax(lineno, "expected 'ser <pid>: ids'"))?;
            let ids: Vec<String> = ids
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            sers.push((lineno, pid.trim().to_string(), ids));
            section = Section::History;
            continue;
        }
        match section {
            Section::History => {
                if !reader.line(raw, lineno)? {
                    return Err(syntax(lineno, &format!("unexpected line '{t}'")));
                }
            }
            Section::Vis | Section::MsgHb => {
                let (a, b) = t
                    .split_once("->")
                    .ok_or_else(|| syntax(lineno, "expected 'a -> b'"))?;
                let edge = (lineno, a.trim().to_string(), b.trim().to_string());
                match section {
                    Section::Vis => edges.push(edge),
                    _ => mhb.as_mut().unwrap().push(edge),
                }
            }
        }
    }
    let history = reader.finish()?;
    let resolve = |id: &str| {
        history
            .index_of(id)
            .ok_or_else(|| ExecutionError::UnknownEvent(id.to_string()))
    };
    let mut vis = Relation::empty(history.len());
    for (_, a, b) in &edges {
        vis.insert(resolve(a)?, resolve(b)?);
    }
    let msg_hb = match mhb {
        None => None,
        Some(list) => {
            let mut r = Relation::empty(history.len());
            for (_, a, b) in &list {
                r.insert(resolve(a)?, resolve(b)?);
            }
            Some(r)
        }
    };
    let mut by_proc: Vec<Option<Vec<usize>>> = vec![None; history.process_count()];
    for (_, pid, ids) in &sers {
        let p = history
            .process_index(pid)
            .ok_or_else(|| ExecutionError::UnknownProcess(pid.clone()))?;
        by_proc[p] = Some(ids.iter().map(|id| resolve(id)).collect::<Result<_, _>>()?);
    }
    let mut out = Vec::new();
    for (p, s) in by_proc.into_iter().enumerate() {
        out.push(
            s.ok_or_else(|| ExecutionError::MissingSerialization(history.processes()[p].clone()))?,
        );
    }
    let execution = Execution::new(history, vis, out)?;
    Ok(WitnessFile { execution, msg_hb })
}

pub fn render_execution(e: &Execution) -> String {
    let mut out = render_history(e.history());
    out.push_str("vis:\n");
    for (a, b) in e.vis().pairs() {
        out.push_str(&format!("  {} -> {}\n", e.id(a), e.id(b)));
    }
    for (p, pid) in e.history().processes().iter().enumerate() {
        let ids: Vec<&str> = e.ser(p).iter().map(|&i| e.id(i)).collect();
        out.push_str(&format!("ser {pid}: {}\n", ids.join(", ")));
    }
    out
}

pub fn render_trace(e: &Execution, msg_hb: &Relation) -> String {
    let mut out = render_execution(e);
    out.push_str("msghb:\n");
    for (a, b) in msg_hb.pairs() {
        out.push_str(&format!("  {} -> {}\n", e.id(a), e.id(b)));
    }
    out
}

impl fmt::Display for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_execution(self))
    }
}

/// Events visible to `b`.
pub fn visible_to(e: &Execution, b: usize) -> Bits {
    e.vis().column(b)
}
