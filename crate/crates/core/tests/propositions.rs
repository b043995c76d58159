use axcheck::axioms::{holds, holds_all};
use axcheck::checker::check_existential;
use axcheck::checker::generate::{random_valid_execution, GenConfig};
use axcheck::execution::{check_acyclicity, check_physical_realizability, happens_before};
use axcheck::models::{catalog, satisfies};
use axcheck::semantics::Kind;
use axcheck::{model, Axiom, Budget, Execution, History};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_execution(seed: u64) -> (Execution, axcheck::DataTypeSpec) {
    let cfg = GenConfig {
        max_events_per_process: 2,
        ..GenConfig::default()
    };
    random_valid_execution(&mut ChaCha8Rng::seed_from_u64(seed), &cfg)
}

fn ax(a: Axiom, e: &Execution) -> bool {
    holds(a, e).unwrap()
}

/// Clocks from a topological order of happens-before, so every visibility
/// edge ends before its target starts.
fn with_clocks(e: &Execution) -> History {
    let h = e.history();
    let hb = happens_before(e);
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by_key(|&x| hb.column(x).count_ones());
    let mut rank = vec![0; h.len()];
    for (k, &x) in order.iter().enumerate() {
        rank[x] = k as u64;
    }
    let spec = (0..h.process_count())
        .map(|p| {
            let events = h
                .process_range(p)
                .map(|x| h.event(x).clone().with_clocks(2 * rank[x], 2 * rank[x] + 1))
                .collect();
            (h.processes()[p].clone(), events)
        })
        .collect();
    History::new(spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn implications_between_models(seed in any::<u64>()) {
        let (e, dt) = small_execution(seed);
        let sat = |name: &str| holds_all(&model(name).unwrap().axioms, &e).unwrap();
        if sat("serial") {
            prop_assert!(ax(Axiom::VisMon, &e) && ax(Axiom::VisLoc, &e) && ax(Axiom::SerClo, &e));
        }
        if ax(Axiom::PropCausal, &e) {
            prop_assert!(ax(Axiom::PropPipe, &e));
        }
        if sat("sequential") {
            prop_assert!(sat("causal"));
        }
        if ax(Axiom::SerArb, &e) {
            prop_assert!(ax(Axiom::ResConv, &e));
        }
        prop_assert_eq!(sat("sequential"), sat("serial") && ax(Axiom::SerArb, &e));
        prop_assert_eq!(ax(Axiom::VisCausal, &e), *e.vis() == happens_before(&e));
        if check_acyclicity(&e) {
            prop_assert!(check_physical_realizability(&e));
        }
        if dt.kind() == Kind::Concurrent {
            prop_assert!(ax(Axiom::ResConv, &e));
        }
    }

    #[test]
    fn causal_prefix_is_prefix_and_causality(seed in any::<u64>()) {
        let (e, _) = small_execution(seed);
        let sat = |name: &str| satisfies(&model(name).unwrap(), &e);
        prop_assert_eq!(sat("causal_prefix"), sat("prefix") && sat("causality"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Clocks taken from a real run never prune that run away.
    #[test]
    fn time_pruning_is_sound(seed in any::<u64>()) {
        let (e, dt) = small_execution(seed);
        let timed = with_clocks(&e);
        let e = Execution::new(timed.clone(), e.vis().clone(), e.serializations().all().to_vec()).unwrap();
        prop_assert!(ax(Axiom::VisLc, &e));
        for m in catalog().into_iter().filter(|m| satisfies(m, &e)) {
            let v = check_existential(&timed, &dt, &m, &[Axiom::VisLc], &Budget::default()).unwrap();
            let w = v.witness();
            prop_assert!(w.is_some(), "{} rejected a history it admits\n{}", m, e);
            prop_assert!(ax(Axiom::VisLc, w.unwrap()));
        }
    }
}
