use axcheck::axioms::holds_all;
use axcheck::execution::happens_before;
use axcheck::semantics::check_valid;
use axcheck::simulator::{register_protocols, simulate, Partition, Protocol, SimConfig, SimTrace};

fn configs() -> Vec<SimConfig> {
    let mut out = Vec::new();
    let names = ["causal_broadcast"]
        .into_iter()
        .chain(register_protocols().iter().copied());
    for name in names {
        for seed in 1..=20 {
            let partitions = if seed % 2 == 0 {
                vec![Partition::full(3, 5, 25)]
            } else {
                vec![]
            };
            out.push(SimConfig {
                protocol: Protocol::from_name(name).unwrap(),
                seed,
                ops_per_process: 4,
                partitions,
                ..SimConfig::default()
            });
        }
    }
    out
}

fn check_trace(t: &SimTrace) {
    let e = &t.ground_truth;
    let name = t.protocol.name();
    assert!(
        check_valid(e, &t.data_type()),
        "{name}: ground truth invalid\n{e}"
    );
    let m = t.protocol.advertised_model();
    assert!(
        holds_all(&m.axioms, e).unwrap(),
        "{name}: ground truth violates {m}\n{e}"
    );
    if t.protocol != Protocol::ScRegister {
        assert!(
            happens_before(e).is_subset(&t.msg_hb),
            "{name}: hb not within messaging hb"
        );
    }
    for (a, b) in t.msg_hb.pairs() {
        let (ea, eb) = (t.history.event(a), t.history.event(b));
        assert!(
            ea.clock_end.unwrap() < eb.clock_start.unwrap(),
            "{name}: clock condition fails for {} {}",
            ea.id,
            eb.id
        );
    }
}

#[test]
fn ground_truth_satisfies_advertised_models() {
    for cfg in configs() {
        let t = simulate(&cfg).unwrap();
        assert_eq!(t.history.len(), 12);
        check_trace(&t);
    }
}

#[test]
fn runs_are_deterministic() {
    for cfg in configs().into_iter().step_by(7) {
        assert_eq!(
            simulate(&cfg).unwrap().dump(),
            simulate(&cfg).unwrap().dump()
        );
    }
}

#[test]
fn sc_register_ground_truth_is_cons_seq() {
    for seed in 1..=20 {
        let cfg = SimConfig {
            protocol: Protocol::ScRegister,
            seed,
            ..SimConfig::default()
        };
        let t = simulate(&cfg).unwrap();
        assert!(holds_all(&[axcheck::Axiom::ConsSeq], &t.ground_truth).unwrap());
    }
}
