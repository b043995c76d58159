//! Events, histories, program order and the history text format.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::relation::{bit, Bits, Relation, MAX_EVENTS};
use crate::value::{is_bare_ident, Cursor, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Operation {
    pub name: String,
    pub args: Vec<Value>,
}

impl Operation {
    pub fn new(name: impl Into<String>, args: impl IntoIterator<Item = Value>) -> Operation {
        Operation {
            name: name.into(),
            args: args.into_iter().collect(),
        }
    }

    /// The object an operation acts upon, by convention its first argument.
    pub fn object(&self) -> Option<&Value> {
        self.args.first()
    }

    pub fn arg(&self, i: usize) -> Option<&Value> {
        self.args.get(i)
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub id: String,
    pub process: String,
    pub op: Operation,
    pub result: Value,
    pub clock_start: Option<u64>,
    pub clock_end: Option<u64>,
}

impl Event {
    pub fn new(
        id: impl Into<String>,
        process: impl Into<String>,
        op: Operation,
        result: Value,
    ) -> Event {
        Event {
            id: id.into(),
            process: process.into(),
            op,
            result,
            clock_start: None,
            clock_end: None,
        }
    }

    pub fn with_clocks(mut self, start: u64, end: u64) -> Event {
        self.clock_start = Some(start);
        self.clock_end = Some(end);
        self
    }

    pub fn clocks(&self) -> Option<(u64, u64)> {
        Some((self.clock_start?, self.clock_end?))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistoryError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate event id '{0}'")]
    DuplicateId(String),
    #[error("duplicate process '{0}'")]
    DuplicateProcess(String),
    #[error("event '{id}': clock start {start} exceeds end {end}")]
    ClockOrder { id: String, start: u64, end: u64 },
    #[error("event '{id}' names process '{found}' but is listed under '{expected}'")]
    ProcessMismatch {
        id: String,
        expected: String,
        found: String,
    },
    #[error("history has {0} events, at most {MAX_EVENTS} are supported")]
    TooLarge(usize),
}

/// Per-process event sequences. Events are stored process-major, so the
/// index of an event is stable and program order is index order within a
/// process.
#[derive(Clone, Debug, Default)]
pub struct History {
    procs: Vec<String>,
    starts: Vec<usize>,
    events: Vec<Event>,
    by_id: HashMap<String, usize>,
    proc_of: Vec<usize>,
}

impl PartialEq for History {
    fn eq(&self, other: &History) -> bool {
        self.procs == other.procs && self.starts == other.starts && self.events == other.events
    }
}

impl Eq for History {}

impl History {
    pub fn new(processes: Vec<(String, Vec<Event>)>) -> Result<History, HistoryError> {
        let mut h = History {
            starts: vec![0],
            ..History::default()
        };
        for (pid, events) in processes {
            if h.procs.contains(&pid) {
                return Err(HistoryError::DuplicateProcess(pid));
            }
            let p = h.procs.len();
            for e in events {
                if e.process != pid {
                    return Err(HistoryError::ProcessMismatch {
                        id: e.id,
                        expected: pid,
                        found: e.process,
                    });
                }
                if let Some((start, end)) = e.clocks() {
                    if start > end {
                        return Err(HistoryError::ClockOrder {
                            id: e.id,
                            start,
                            end,
                        });
                    }
                }
                if h.by_id.insert(e.id.clone(), h.events.len()).is_some() {
                    return Err(HistoryError::DuplicateId(e.id));
                }
                h.events.push(e);
                h.proc_of.push(p);
            }
            h.procs.push(pid);
            h.starts.push(h.events.len());
        }
        if h.events.len() > MAX_EVENTS {
            return Err(HistoryError::TooLarge(h.events.len()));
        }
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, i: usize) -> &Event {
        &self.events[i]
    }

    pub fn processes(&self) -> &[String] {
        &self.procs
    }

    pub fn process_count(&self) -> usize {
        self.procs.len()
    }

    pub fn process_index(&self, pid: &str) -> Option<usize> {
        self.procs.iter().position(|p| p == pid)
    }

    /// Events of process `p`, in program order.
    pub fn process_events(&self, p: usize) -> &[Event] {
        &self.events[self.starts[p]..self.starts[p + 1]]
    }

    pub fn process_range(&self, p: usize) -> std::ops::Range<usize> {
        self.starts[p]..self.starts[p + 1]
    }

    pub fn process_mask(&self, p: usize) -> Bits {
        self.process_range(p).fold(0, |m, i| m | bit(i))
    }

    /// Process index of event `i`.
    pub fn process_of(&self, i: usize) -> usize {
        self.proc_of[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn all_mask(&self) -> Bits {
        if self.len() == 64 {
            u64::MAX
        } else {
            bit(self.len()) - 1
        }
    }

    /// Program-order predecessors of `i`.
    pub fn po_before(&self, i: usize) -> Bits {
        let s = self.starts[self.proc_of[i]];
        (s..i).fold(0, |m, j| m | bit(j))
    }

    /// Program-order successors of `i`.
    pub fn po_after(&self, i: usize) -> Bits {
        let e = self.starts[self.proc_of[i] + 1];
        (i + 1..e).fold(0, |m, j| m | bit(j))
    }

    pub fn po(&self, a: usize, b: usize) -> bool {
        self.proc_of[a] == self.proc_of[b] && a < b
    }

    /// Keeps only the events accepted by `keep`, preserving order and processes.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> History {
        let procs = (0..self.process_count())
            .map(|p| {
                let evs = self
                    .process_range(p)
                    .filter(|&i| keep(i))
                    .map(|i| self.events[i].clone())
                    .collect();
                (self.procs[p].clone(), evs)
            })
            .collect();
        History::new(procs).expect("restriction of a valid history")
    }
}

pub fn program_order(h: &History) -> Relation {
    let mut r = Relation::empty(h.len());
    for a in 0..h.len() {
        for b in crate::relation::iter_bits(h.po_after(a)) {
            r.insert(a, b);
        }
    }
    r
}

pub(crate) fn parse_event_line(
    line: &str,
    lineno: usize,
    pid: &str,
    auto_id: String,
) -> Result<Event, HistoryError> {
    let err = |msg: String| HistoryError::Syntax { line: lineno, msg };
    let mut c = Cursor::new(line);
    let first = c.word().ok_or_else(|| err("expected an event".into()))?;
    c.skip_ws();
    let (id, name) = if c.peek() == Some('(') {
        (auto_id, first.to_string())
    } else {
        let name = c
            .word()
            .ok_or_else(|| err("expected an operation name".into()))?;
        (first.to_string(), name.to_string())
    };
    if !is_bare_ident(&name) {
        return Err(err(format!("bad operation name '{name}'")));
    }
    c.expect("(").map_err(err)?;
    let mut args = Vec::new();
    if !c.eat(")") {
        loop {
            args.push(c.value().map_err(err)?);
            if c.eat(")") {
                break;
            }
            c.expect(",").map_err(err)?;
        }
    }
    let result = if c.eat("->") {
        c.value().map_err(err)?
    } else {
        Value::Unit
    };
    let mut ev = Event::new(id, pid, Operation::new(name, args), result);
    if c.eat("@") {
        let start = clock(&mut c).map_err(err)?;
        c.expect("..").map_err(err)?;
        let end = clock(&mut c).map_err(err)?;
        ev = ev.with_clocks(start, end);
    }
    if !c.at_end() {
        return Err(err(format!("unexpected trailing text '{}'", c.rest())));
    }
    Ok(ev)
}

fn clock(c: &mut Cursor) -> Result<u64, String> {
    let w = c.word().ok_or("expected a clock value")?;
    w.parse().map_err(|_| format!("bad clock value '{w}'"))
}

/// Incrementally builds a history from the text format. Shared with the
/// witness and trace parsers, which add their own sections.
pub(crate) struct HistoryReader {
    procs: Vec<(String, Vec<Event>)>,
}

impl HistoryReader {
    pub fn new() -> HistoryReader {
        HistoryReader { procs: Vec::new() }
    }

    /// Consumes `line` if it belongs to the history part.
    pub fn line(&mut self, raw: &str, lineno: usize) -> Result<bool, HistoryError> {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix("process") {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                let pid = rest.trim();
                if pid.is_empty() || pid.contains(char::is_whitespace) {
                    return Err(HistoryError::Syntax {
                        line: lineno,
                        msg: "expected 'process <pid>'".into(),
                    });
                }
                if self.procs.iter().any(|(p, _)| p == pid) {
                    return Err(HistoryError::DuplicateProcess(pid.to_string()));
                }
                self.procs.push((pid.to_string(), Vec::new()));
                return Ok(true);
            }
        }
        if !raw.starts_with(char::is_whitespace) {
            return Ok(false);
        }
        let k = self.procs.len();
        let Some((pid, events)) = self.procs.last_mut() else {
            return Err(HistoryError::Syntax {
                line: lineno,
                msg: "event outside a process block".into(),
            });
        };
        let auto = format!("p{}e{}", k - 1, events.len());
        events.push(parse_event_line(line, lineno, pid, auto)?);
        Ok(true)
    }

    pub fn finish(self) -> Result<History, HistoryError> {
        History::new(self.procs)
    }
}

pub(crate) fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

pub fn parse_history(text: &str) -> Result<History, HistoryError> {
    let mut r = HistoryReader::new();
    for (i, raw) in text.lines().enumerate() {
        if is_blank_or_comment(raw) {
            continue;
        }
        if !r.line(raw, i + 1)? {
            return Err(HistoryError::Syntax {
                line: i + 1,
                msg: format!("unexpected line '{}'", raw.trim()),
            });
        }
    }
    r.finish()
}

pub fn render_event(e: &Event) -> String {
    let mut s = format!("{} {} -> {}", e.id, e.op, e.result);
    if let Some((a, b)) = e.clocks() {
        s.push_str(&format!(" @ {a}..{b}"));
    }
    s
}

pub fn render_history(h: &History) -> String {
    let mut out = String::new();
    for p in 0..h.process_count() {
        out.push_str(&format!("process {}\n", h.processes()[p]));
        for e in h.process_events(p) {
            out.push_str("  ");
            out.push_str(&render_event(e));
            out.push('\n');
        }
    }
    out
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_history(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = "\
# queue without closed past
process i
  a enq(q,1) -> unit
process j
  b enq(q,4) -> unit
  c deq(q) -> 4
  d val(q) -> [4,2]
  e enq(q,4) -> unit
  f val(q) -> [4,2,4]
process k
  g enq(q,2) -> unit
";

    #[test]
    fn single_event() {
        let h = parse_history("process i\n e1 inc(c,3) -> unit").unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(
            h.event(0).op,
            Operation::new("inc", [Value::str("c"), Value::Int(3)])
        );
        assert_eq!(h.event(0).result, Value::Unit);
    }

    #[test]
    fn empty_text() {
        let h = parse_history("").unwrap();
        assert!(h.is_empty());
        assert_eq!(render_history(&h), "");
    }

    #[test]
    fn queue_history_parses() {
        let h = parse_history(FIG4).unwrap();
        assert_eq!(h.len(), 7);
        assert_eq!(h.process_count(), 3);
        assert_eq!(
            h.event(h.index_of("d").unwrap()).result,
            Value::ints([4, 2])
        );
        let po = program_order(&h);
        assert_eq!(po.count(), 10);
        let j = h.process_mask(1);
        for (a, b) in po.pairs() {
            assert!(crate::relation::has(j, a) && crate::relation::has(j, b));
        }
    }

    #[test]
    fn chain_and_cross_process_order() {
        let h =
            parse_history("process i\n  a w(x)\n  b w(x)\n  c w(x)\nprocess j\n  d w(x)").unwrap();
        let po = program_order(&h);
        let pairs: Vec<_> = po.pairs().collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn clocks_and_auto_ids() {
        let h = parse_history("process p\n  deq(q) -> 4 @ 2..5\n  e3 deq(q) -> 4").unwrap();
        assert_eq!(h.event(0).id, "p0e0");
        assert_eq!(h.event(0).clocks(), Some((2, 5)));
        assert_eq!(h.event(1).id, "e3");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_history("process i\n  a f(x) -> ?"),
            Err(HistoryError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_history("process i\n  a f(x)\n  a f(x)"),
            Err(HistoryError::DuplicateId(id)) if id == "a"
        ));
        assert!(matches!(
            parse_history("process i\n  a f(x) @ 5..2"),
            Err(HistoryError::ClockOrder { .. })
        ));
        assert!(matches!(
            parse_history("  a f(x)"),
            Err(HistoryError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn render_round_trip() {
        let h = parse_history(FIG4).unwrap();
        assert_eq!(parse_history(&render_history(&h)).unwrap(), h);
    }
}
