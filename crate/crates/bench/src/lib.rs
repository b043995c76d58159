//! Benchmark workloads.

use axcheck::simulator::{simulate, Protocol, SimConfig};
use axcheck::{lookup, model, parse_history, DataTypeSpec, History, ModelSpec};

pub struct Workload {
    pub name: &'static str,
    pub history: History,
    pub data_type: DataTypeSpec,
    pub model: ModelSpec,
}

fn fixed(name: &'static str, ty: &str, m: &str, text: &str) -> Workload {
    Workload {
        name,
        history: parse_history(text).expect("workload parses"),
        data_type: lookup(ty).expect("known type"),
        model: model(m).expect("known model"),
    }
}

/// Small figure-sized histories with known verdicts.
pub fn figures() -> Vec<Workload> {
    vec![
        fixed(
            "pram_loop",
            "memory",
            "pipelined",
            "process i\n  rd(x) -> 42\n  wr(y,42)\nprocess j\n  rd(y) -> 42\n  wr(x,42)",
        ),
        fixed(
            "causal_loop",
            "memory",
            "causal",
            "process i\n  wr(x,1)\n  wr(x,2)\n  rd(y) -> 2\n  rd(y) -> 1\n  wr(x,1)\n\
             process j\n  wr(y,1)\n  wr(y,2)\n  rd(x) -> 2\n  rd(x) -> 1\n  wr(y,1)",
        ),
        fixed(
            "register_sequential",
            "register",
            "sequential",
            "process i\n  wr(r,1)\n  rd(r) -> 1\n  rd(r) -> 1\nprocess j\n  wr(r,2)\n  rd(r) -> 2\n  rd(r) -> 1",
        ),
    ]
}

/// The history of a seeded simulator run, checked against the protocol's own model.
pub fn simulated(protocol: &str, processes: usize, ops_per_process: usize, seed: u64) -> Workload {
    let protocol = Protocol::from_name(protocol).expect("known protocol");
    let cfg = SimConfig {
        processes,
        protocol,
        ops_per_process,
        seed,
        ..SimConfig::default()
    };
    let t = simulate(&cfg).expect("simulation runs");
    Workload {
        name: protocol.name(),
        history: t.history,
        data_type: protocol.data_type(),
        model: protocol.advertised_model(),
    }
}
