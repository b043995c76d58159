mod common;

use axcheck::axioms::holds_all;
use axcheck::checker::enumerate_valid_executions;
use axcheck::checker::generate::{random_valid_execution, GenConfig};
use axcheck::models::catalog;
use axcheck::{
    check_existential, lookup, model, parse_history, Budget, History, ModelSpec, Verdict,
};
use common::{all_valid, oracle_sat};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn perturbed(h: &History, rng: &mut ChaCha8Rng) -> History {
    let ev = h.events();
    let i = rng.gen_range(0..ev.len());
    let j = rng.gen_range(0..ev.len());
    let spec = (0..h.process_count())
        .map(|p| {
            let events = h
                .process_range(p)
                .map(|x| {
                    let mut e = ev[x].clone();
                    if x == i {
                        e.result = ev[j].result.clone();
                    }
                    e
                })
                .collect();
            (h.processes()[p].clone(), events)
        })
        .collect();
    History::new(spec).unwrap()
}

fn agree(h: &History, dt: &axcheck::DataTypeSpec, models: &[ModelSpec]) {
    let valid = all_valid(h, dt);
    for m in models {
        let got = check_existential(h, dt, m, &[], &Budget::default()).unwrap();
        let want = oracle_sat(&valid, m);
        match got {
            Verdict::Satisfied(_) => {
                assert!(want, "{m}: checker found a witness the oracle rejects\n{h}")
            }
            Verdict::Unsatisfiable => {
                assert!(!want, "{m}: oracle found a witness the checker missed\n{h}")
            }
            Verdict::Unknown(why) => panic!("{m}: unknown ({why})\n{h}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn checker_agrees_with_brute_force(seed in any::<u64>(), perturb in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig { max_processes: 3, max_events_per_process: 2, ..GenConfig::default() };
        let (e, dt) = loop {
            let (e, dt) = random_valid_execution(&mut rng, &cfg);
            if e.len() <= 3 {
                break (e, dt);
            }
        };
        let h = if perturb { perturbed(e.history(), &mut rng) } else { e.history().clone() };
        agree(&h, &dt, &catalog());
    }
}

#[test]
fn four_event_histories_agree() {
    let cases = [
        (
            "register",
            "process i\n  wr(r,1)\n  rd(r) -> 2\nprocess j\n  wr(r,2)\n  rd(r) -> 1\n",
        ),
        (
            "queue",
            "process i\n  enq(q,1)\n  deq(q) -> 2\nprocess j\n  enq(q,2)\n  deq(q) -> 1\n",
        ),
        (
            "counter",
            "process i\n  inc(c)\n  val(c) -> 1\nprocess j\n  inc(c)\n  val(c) -> 1\n",
        ),
        (
            "memory",
            "process i\n  wr(x,1)\n  rd(y) -> 0\nprocess j\n  wr(y,1)\n  rd(x) -> 0\n",
        ),
    ];
    let models: Vec<ModelSpec> = [
        "sequential",
        "causal",
        "pipelined",
        "replay",
        "prefix",
        "serial",
        "causal_prefix",
        "convergent_causal",
    ]
    .iter()
    .map(|n| model(n).unwrap())
    .collect();
    for (ty, text) in cases {
        agree(&parse_history(text).unwrap(), &lookup(ty).unwrap(), &models);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn enumeration_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig { max_processes: 2, max_events_per_process: 2, ..GenConfig::default() };
        let (e, dt) = loop {
            let (e, dt) = random_valid_execution(&mut rng, &cfg);
            if e.len() <= 3 {
                break (e, dt);
            }
        };
        let h = e.history();
        let valid = all_valid(h, &dt);
        for m in [ModelSpec::custom([]), model("causal").unwrap(), model("prefix").unwrap(), model("replay").unwrap()] {
            let got = enumerate_valid_executions(h, &dt, &m, false, &Budget::default()).unwrap();
            prop_assert!(got.complete);
            let want: Vec<_> = valid.iter().filter(|x| holds_all(&m.axioms, x).unwrap()).collect();
            prop_assert_eq!(got.executions.len(), want.len(), "{}", m);
            for x in &got.executions {
                prop_assert!(want.contains(&x));
            }
        }
    }
}

/// The irredundance definition applied directly to every valid execution
/// with local visibility: `None` when no execution meets the side conditions.
fn oracle_irredundant(h: &History, dt: &axcheck::DataTypeSpec, a: usize, b: usize) -> Option<bool> {
    use axcheck::checker::local_viewers;
    use axcheck::relation::iter_bits;
    use axcheck::semantics::check_result_validity;
    let (i, j) = (h.process_of(a), h.process_of(b));
    let mut qualifying = false;
    let mut irredundant = true;
    for e in all_valid(h, dt) {
        if !holds_all(&[axcheck::Axiom::VisLoc], &e).unwrap() {
            continue;
        }
        let (lv_a, lv_b) = (local_viewers(&e, a), local_viewers(&e, b));
        if e.vis().row(a) & lv_b != 0 || e.vis().row(b) & lv_a != 0 {
            continue;
        }
        let mut options = vec![];
        if e.ser_before(j, a, b) {
            options.push((a, lv_b));
        }
        if e.ser_before(i, b, a) {
            options.push((b, lv_a));
        }
        qualifying |= !options.is_empty();
        for (src, targets) in options {
            let mut vis = e.vis().clone();
            for t in iter_bits(targets) {
                vis.insert(src, t);
            }
            irredundant &= !check_result_validity(&e.with_vis(vis).unwrap(), dt);
        }
    }
    qualifying.then_some(irredundant)
}

#[test]
fn irredundant_pairs_agree() {
    use axcheck::checker::{check_irredundant_pair, Irredundance};
    let cases = [
        ("counter", "process i\n  a inc(c,1)\n  b val(c) -> 1\nprocess j\n  c inc(c,1)\n  d val(c) -> 1", Some(true)),
        ("queue", "process i\n  a enq(q,1)\n  b val(q) -> [1]\nprocess j\n  c enq(q,2)\n  d val(q) -> [2]", Some(true)),
        ("register", "process i\n  a wr(r,1)\n  b rd(r) -> 1\nprocess j\n  c wr(r,2)\n  d rd(r) -> 2", Some(false)),
        ("memory", "process i\n  a wr(x,1)\n  b rd(y) -> 0\nprocess j\n  c wr(y,2)\n  d rd(x) -> 0", Some(true)),
        ("counter", "process i\n  a inc(c,1)\nprocess j\n  c inc(c,1)", Some(false)),
        ("register", "process i\n  a wr(r,1)\n  b rd(r) -> 1\nprocess j\n  c wr(r,2)\n  d rd(r) -> 1", None),
    ];
    for (ty, text, want) in cases {
        let h = parse_history(text).unwrap();
        let dt = lookup(ty).unwrap();
        let (a, b) = (h.index_of("a").unwrap(), h.index_of("c").unwrap());
        assert_eq!(
            oracle_irredundant(&h, &dt, a, b),
            want,
            "oracle on {ty}\n{h}"
        );
        let got = match check_irredundant_pair(&h, &dt, a, b, &Budget::default()).unwrap() {
            Irredundance::Irredundant => Some(true),
            Irredundance::Redundant(_) => Some(false),
            Irredundance::Vacuous => None,
            Irredundance::Unknown(why) => panic!("{ty}: {why}"),
        };
        assert_eq!(got, want, "checker on {ty}");
    }
}
