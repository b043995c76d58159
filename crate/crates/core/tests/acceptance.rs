mod common;

use std::process::ExitCode;

use axcheck::axioms::{holds, holds_all};
use axcheck::checker::generate::{random_valid_execution, GenConfig};
use axcheck::checker::{
    check_existential, check_universal_convergence, clam_demonstration, is_phantom_edge,
    Convergence, Verdict,
};
use axcheck::execution::{
    check_acyclicity, check_physical_realizability, happens_before, parse_witness,
};
use axcheck::semantics::{check_valid, Kind};
use axcheck::simulator::{parse_script, scripted_run, simulate, Partition, Protocol, SimConfig};
use axcheck::{
    lookup, model, parse_history, Axiom, Budget, DataTypeSpec, Execution, History, ModelSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

macro_rules! fixture {
    ($name:literal) => {
        include_str!(concat!("../../../fixtures/", $name))
    };
}

type Outcome = Result<String, String>;

fn hist(text: &str) -> History {
    parse_history(text).expect("fixture parses")
}

fn exec(text: &str) -> Execution {
    parse_witness(text).expect("fixture parses").execution
}

fn ty(name: &str) -> DataTypeSpec {
    lookup(name).unwrap()
}

fn m(name: &str) -> ModelSpec {
    model(name).unwrap()
}

fn verdict(h: &History, dt: &str, model: &ModelSpec, extra: &[Axiom]) -> Verdict {
    check_existential(h, &ty(dt), model, extra, &Budget::default()).expect("check runs")
}

fn expect(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn ax(a: Axiom, e: &Execution) -> bool {
    holds(a, e).unwrap()
}

fn fig2_well_formedness() -> Outcome {
    let a = exec(fixture!("fig02a_pr_invalid.exec"));
    let b = exec(fixture!("fig02b_pr_invalid.exec"));
    let c = exec(fixture!("fig02c_mutual.exec"));
    let got = [
        check_physical_realizability(&a),
        check_physical_realizability(&b),
        check_physical_realizability(&c),
        check_acyclicity(&c),
    ];
    expect(
        got == [false, false, true, false],
        format!("pr(a), pr(b), pr(c), acyclic(c) = {got:?}"),
    )?;
    Ok("(a) and (b) not realizable, (c) realizable and cyclic".into())
}

fn fig8_pram() -> Outcome {
    let pipelined = m("pipelined");
    let loop_h = hist(fixture!("fig08_pram_oota.hist"));
    let v = verdict(&loop_h, "memory", &pipelined, &[]);
    expect(
        v.is_unsatisfiable(),
        format!("out-of-thin-air history: {v}"),
    )?;
    let free = hist(fixture!("fig08_pram_independent.hist"));
    let v = verdict(&free, "memory", &pipelined, &[]);
    let oracle = common::oracle_sat(&common::all_valid(&free, &ty("memory")), &pipelined);
    expect(
        v.is_satisfied() && oracle,
        format!("independent writes: checker {v}, oracle {oracle}"),
    )?;
    Ok("loop unsatisfiable, independent writes satisfiable".into())
}

fn fig9_causal() -> Outcome {
    let v = verdict(
        &hist(fixture!("fig09_causal_oota.hist")),
        "memory",
        &m("causal"),
        &[],
    );
    expect(v.is_unsatisfiable(), format!("{v}"))?;
    Ok("unsatisfiable under causal".into())
}

fn fig4_closed_past() -> Outcome {
    let h = hist(fixture!("fig04_queue_closed_past.hist"));
    let none = verdict(&h, "queue", &ModelSpec::custom([]), &[]);
    expect(none.is_satisfied(), format!("no axioms: {none}"))?;
    // The drawn execution has program order inside visibility.
    let clo_loc = verdict(
        &h,
        "queue",
        &ModelSpec::custom([Axiom::SerClo, Axiom::VisLoc]),
        &[],
    );
    expect(
        clo_loc.is_unsatisfiable(),
        format!("ser_clo with vis_loc: {clo_loc}"),
    )?;
    let e = exec(fixture!("fig04_queue_closed_past.exec"));
    expect(
        check_valid(&e, &ty("queue")) && !ax(Axiom::SerClo, &e),
        "displayed execution: want valid, ser_clo false",
    )?;
    let clo = verdict(&h, "queue", &ModelSpec::custom([Axiom::SerClo]), &[]);
    Ok(format!("none satisfiable, ser_clo+vis_loc unsatisfiable, displayed execution valid without ser_clo (ser_clo alone: {clo})"))
}

fn fig5_stack() -> Outcome {
    let e = exec(fixture!("fig05_stack_non_serial.exec"));
    expect(check_valid(&e, &ty("stack")), "execution is not valid")?;
    let got: Vec<bool> = [
        Axiom::VisMon,
        Axiom::VisLoc,
        Axiom::SerClo,
        Axiom::SerArb,
        Axiom::ConsSerial,
        Axiom::ConsSeq,
    ]
    .iter()
    .map(|&a| ax(a, &e))
    .collect();
    expect(
        got == [true, true, true, true, false, false],
        format!("mon, loc, clo, arb, serial, seq = {got:?}"),
    )?;
    Ok("mon, loc, clo, arb hold; serial and sequential fail".into())
}

fn fig6_quadrant() -> Outcome {
    let cases = [
        (fixture!("fig06a_local_monotonic.exec"), (true, true)),
        (fixture!("fig06b_local_only.exec"), (true, false)),
        (fixture!("fig06c_monotonic_only.exec"), (false, true)),
        (fixture!("fig06d_neither.exec"), (false, false)),
    ];
    for (k, (text, want)) in cases.iter().enumerate() {
        let e = exec(text);
        expect(
            check_valid(&e, &ty("counter")),
            format!("execution {k} is not valid"),
        )?;
        let got = (ax(Axiom::VisLoc, &e), ax(Axiom::VisMon, &e));
        expect(
            got == *want,
            format!("execution {k}: (loc, mon) = {got:?}, want {want:?}"),
        )?;
    }
    Ok("all four (loc, mon) combinations".into())
}

fn convergence() -> Outcome {
    let a = exec(fixture!("fig10a_counter_convergent.exec"));
    let b = exec(fixture!("fig10b_queue_divergent.exec"));
    expect(
        check_valid(&a, &ty("counter")) && ax(Axiom::ResConv, &a),
        "counter execution: want valid and convergent",
    )?;
    expect(
        check_valid(&b, &ty("queue")) && !ax(Axiom::ResConv, &b),
        "queue execution: want valid and divergent",
    )?;
    let vacuous = exec(fixture!("fig11_queue_vacuous.exec"));
    expect(
        check_valid(&vacuous, &ty("queue")) && ax(Axiom::ResConv, &vacuous),
        "vacuous execution: want convergent",
    )?;
    let budget = Budget::default();
    let none = ModelSpec::custom([]);
    let cases = [
        ("fig11", fixture!("fig11_queue.hist"), "queue"),
        (
            "fig12 queue",
            fixture!("fig12a_queue_extra_enqueues.hist"),
            "queue",
        ),
        (
            "fig12 stack",
            fixture!("fig12b_stack_cancelling.hist"),
            "stack",
        ),
    ];
    for (name, text, dt) in cases {
        let h = hist(text);
        match check_universal_convergence(&h, &ty(dt), &none, &budget).unwrap() {
            Convergence::Violated(w) => expect(
                check_valid(&w, &ty(dt)) && !ax(Axiom::ResConv, &w),
                format!("{name}: bad counterexample"),
            )?,
            Convergence::Holds => return Err(format!("{name}: reported convergent")),
            Convergence::Unknown(why) => return Err(format!("{name}: unknown ({why})")),
        }
    }
    let existential = verdict(
        &hist(fixture!("fig11_queue.hist")),
        "queue",
        &ModelSpec::custom([Axiom::ResConv]),
        &[],
    );
    expect(
        existential.is_satisfied(),
        format!("existential res_conv: {existential}"),
    )?;
    Ok("10a convergent, 10b divergent, 11/12 histories not convergent, existential res_conv accepts 11".into())
}

fn fig14_phantom() -> Outcome {
    let reg = hist(fixture!("fig14a_register.hist"));
    let v = verdict(&reg, "register", &m("sequential"), &[]);
    expect(v.is_satisfied(), format!("register under sequential: {v}"))?;
    let e = exec(fixture!("fig14a_register.exec"));
    let (a, d) = (
        e.history().index_of("a").unwrap(),
        e.history().index_of("d").unwrap(),
    );
    expect(
        check_valid(&e, &ty("register")),
        "register execution is not valid",
    )?;
    expect(
        is_phantom_edge(&e, &ty("register"), d, a),
        "d -> a is not a phantom edge",
    )?;
    let mem = hist(fixture!("fig14b_memory.hist"));
    let v = verdict(
        &mem,
        "memory",
        &ModelSpec::custom([Axiom::ConsSerial, Axiom::SerArb]),
        &[],
    );
    expect(
        v.is_unsatisfiable(),
        format!("memory under serial+arbitration: {v}"),
    )?;
    Ok("register satisfiable with phantom edge d -> a, memory unsatisfiable".into())
}

fn figs16_17() -> Outcome {
    let v = verdict(
        &hist(fixture!("fig16_alternating_reads.hist")),
        "register",
        &m("causality"),
        &[],
    );
    expect(
        v.is_unsatisfiable(),
        format!("alternating reads under causality: {v}"),
    )?;
    let h = hist(fixture!("fig17_lww.hist"));
    let causal = verdict(&h, "memory", &m("causal"), &[]);
    let replay = verdict(&h, "memory", &m("causal_replay"), &[]);
    expect(
        causal.is_unsatisfiable() && replay.is_satisfied(),
        format!("causal {causal}, causal replay {replay}"),
    )?;
    let unforced = verdict(
        &hist(fixture!("fig17_lww_unforced.hist")),
        "memory",
        &m("causal"),
        &[],
    );
    Ok(format!(
        "16 unsatisfiable under causality, 17 rejected by causal and accepted by causal replay (without the forcing pair: {unforced})"
    ))
}

fn clam() -> Outcome {
    let cases = [
        (
            "queue",
            "process i\n  enq(q,1)\n  val(q) -> [1]\nprocess j\n  enq(q,2)\n  val(q) -> [2]",
            false,
        ),
        (
            "counter",
            "process i\n  inc(c,1)\n  val(c) -> 1\nprocess j\n  inc(c,1)\n  val(c) -> 1",
            false,
        ),
        (
            "stack",
            "process i\n  push(s,1)\n  val(s) -> [1]\nprocess j\n  push(s,2)\n  val(s) -> [2]",
            false,
        ),
        (
            "memory",
            "process i\n  wr(x,1)\n  rd(y) -> 0\nprocess j\n  wr(y,1)\n  rd(x) -> 0",
            false,
        ),
        (
            "register",
            "process i\n  wr(r,1)\n  rd(r) -> 1\nprocess j\n  wr(r,2)\n  rd(r) -> 2",
            true,
        ),
    ];
    let clam = axcheck::checker::clam_model();
    for (dt, text, want) in cases {
        let h = hist(text);
        let v = clam_demonstration(&h, &ty(dt), &Budget::default()).unwrap();
        let oracle = common::oracle_sat(&common::all_valid(&h, &ty(dt)), &clam);
        let ok = if want {
            v.is_satisfied()
        } else {
            v.is_unsatisfiable()
        };
        expect(
            ok && oracle == want,
            format!("{dt}: checker {v}, oracle {oracle}"),
        )?;
    }
    let reg = hist(fixture!("fig14a_register.hist"));
    let v = clam_demonstration(&reg, &ty("register"), &Budget::default()).unwrap();
    expect(v.is_satisfied(), format!("larger register history: {v}"))?;
    Ok("queue, counter, stack, memory unsatisfiable; register satisfiable".into())
}

fn propositions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = GenConfig {
        max_events_per_process: 2,
        ..GenConfig::default()
    };
    let serial = m("serial");
    let sequential = m("sequential");
    let causal = m("causal");
    let mut hits = [0usize; 8];
    let mut samples = 0;
    while samples < 600 {
        let (e, dt) = random_valid_execution(&mut rng, &cfg);
        if e.history().process_count() < 2 {
            continue;
        }
        samples += 1;
        let sat = |m: &ModelSpec| holds_all(&m.axioms, &e).unwrap();
        let mut check = |k: usize, antecedent: bool, consequent: bool, what: &str| {
            if antecedent {
                hits[k] += 1;
            }
            expect(!antecedent || consequent, format!("{what} fails on\n{e}"))
        };
        check(
            0,
            sat(&serial),
            ax(Axiom::VisMon, &e) && ax(Axiom::VisLoc, &e) && ax(Axiom::SerClo, &e),
            "serial",
        )?;
        check(
            1,
            ax(Axiom::PropCausal, &e),
            ax(Axiom::PropPipe, &e),
            "causality",
        )?;
        check(2, sat(&sequential), sat(&causal), "sequential")?;
        check(
            3,
            ax(Axiom::SerArb, &e),
            ax(Axiom::ResConv, &e),
            "arbitration",
        )?;
        check(
            4,
            true,
            sat(&sequential) == (sat(&serial) && ax(Axiom::SerArb, &e)),
            "sequential iff serial and arbitration",
        )?;
        check(
            5,
            true,
            ax(Axiom::VisCausal, &e) == (*e.vis() == happens_before(&e)),
            "causal visibility iff vis = hb",
        )?;
        check(
            6,
            check_acyclicity(&e),
            check_physical_realizability(&e),
            "acyclicity",
        )?;
        check(
            7,
            dt.kind() == Kind::Concurrent,
            ax(Axiom::ResConv, &e),
            "concurrent convergence",
        )?;
    }
    expect(
        hits.iter().all(|&n| n > 0),
        format!("some proposition was never exercised: {hits:?}"),
    )?;
    Ok(format!("{samples} executions, antecedent counts {hits:?}"))
}

fn simulator() -> Outcome {
    let cases = [
        ("causal_broadcast", m("causal").with(&[Axiom::ResConv])),
        ("crdt_counter", m("causal").with(&[Axiom::ResConv])),
        ("crdt_orset", m("causal").with(&[Axiom::ResConv])),
        ("crdt_mvreg", m("causal").with(&[Axiom::ResConv])),
        ("replay_store", m("causal_replay")),
        ("prefix_store", m("pipelined_prefix")),
        ("sc_register", ModelSpec::custom([Axiom::ConsSeq])),
        ("lww_store", m("causal_replay")),
    ];
    for (name, want) in &cases {
        for seed in 1..=20 {
            let partitions = if seed % 2 == 0 {
                vec![Partition::full(3, 5, 25)]
            } else {
                vec![]
            };
            let cfg = SimConfig {
                protocol: Protocol::from_name(name).unwrap(),
                seed,
                partitions,
                ..SimConfig::default()
            };
            let t = simulate(&cfg).map_err(|e| format!("{name} seed {seed}: {e}"))?;
            let e = &t.ground_truth;
            expect(
                check_valid(e, &t.data_type()),
                format!("{name} seed {seed}: ground truth is not valid"),
            )?;
            expect(
                holds_all(&want.axioms, e).unwrap(),
                format!("{name} seed {seed}: ground truth violates {want}"),
            )?;
        }
    }
    let script = parse_script(fixture!("fig17_lww.sim")).unwrap();
    let t = scripted_run(Protocol::LwwStore, &script).unwrap();
    expect(t.history.len() <= 10, "lww sub-history too large")?;
    let v = verdict(&t.history, "memory", &m("causal"), &[]);
    expect(
        v.is_unsatisfiable(),
        format!("lww history under causal: {v}\n{}", t.history),
    )?;
    let script = parse_script(fixture!("fig03_cbcast.sim")).unwrap();
    let t = scripted_run(Protocol::CausalBroadcast, &script).unwrap();
    let at_k = t.deliveries_at("k");
    let pos = |id: &str| at_k.iter().position(|&x| x == id);
    expect(
        matches!((pos("a"), pos("b")), (Some(x), Some(y)) if x < y),
        format!("deliveries at k: {at_k:?}"),
    )?;
    Ok(
        "seeds 1-20 conform for all protocols, lww history not causal, k delivers a before b"
            .into(),
    )
}

fn time_pruning() -> Outcome {
    let sequential = m("sequential");
    let timed = hist(fixture!("fig14a_register_clocks.hist"));
    let before = verdict(&timed, "register", &sequential, &[]);
    let after = verdict(&timed, "register", &sequential, &[Axiom::VisLc]);
    expect(
        before.is_satisfied() && after.is_unsatisfiable(),
        format!("without clocks axiom {before}, with {after}"),
    )?;
    Ok("satisfied without vis_lc, unsatisfiable with it".into())
}

fn barrier() -> Outcome {
    let h = hist(fixture!("barrier_mutual_wait.hist"));
    let v = verdict(&h, "barrier[2]", &ModelSpec::custom([]), &[]);
    let w = v.witness().ok_or(format!("mutual wait: {v}"))?;
    expect(
        ax(Axiom::VisPr, w) && w.vis().has_cycle(),
        "witness should be realizable with a visibility cycle",
    )?;
    let v = verdict(
        &h,
        "barrier[2]",
        &ModelSpec::custom([]),
        &[Axiom::VisNoCycles],
    );
    expect(v.is_unsatisfiable(), format!("with vis_nocycles: {v}"))?;
    Ok("cyclic witness found, vis_nocycles rejects".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("well-formedness", fig2_well_formedness),
        ("pipelined out-of-thin-air", fig8_pram),
        ("causal out-of-thin-air", fig9_causal),
        ("queue closed past", fig4_closed_past),
        ("stack basic axioms", fig5_stack),
        ("local and monotonic quadrant", fig6_quadrant),
        ("convergence", convergence),
        ("phantom visibility", fig14_phantom),
        ("causality and last writer wins", figs16_17),
        ("clam instances", clam),
        ("propositions", propositions),
        ("simulator conformance", simulator),
        ("time pruning", time_pruning),
        ("barrier", barrier),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:2}: PASS {name} ({secs:.2}s): {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:2}: FAIL {name} ({secs:.2}s): {msg}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
