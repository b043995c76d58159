use std::hint::black_box;

use axcheck::{check_existential, Budget};
use axcheck_bench::{figures, simulated};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn figure_histories(c: &mut Criterion) {
    let budget = Budget::default();
    let mut group = c.benchmark_group("figures");
    for w in figures() {
        group.bench_function(w.name, |b| {
            b.iter(|| {
                check_existential(black_box(&w.history), &w.data_type, &w.model, &[], &budget)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn simulated_histories(c: &mut Criterion) {
    let budget = Budget::default();
    let mut group = c.benchmark_group("simulated");
    group.sample_size(20);
    for ops in [2, 3] {
        for protocol in ["crdt_counter", "replay_store", "lww_store"] {
            let w = simulated(protocol, 3, ops, 7);
            group.bench_with_input(BenchmarkId::new(protocol, 3 * ops), &w, |b, w| {
                b.iter(|| {
                    check_existential(&w.history, &w.data_type, &w.model, &[], &budget).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, figure_histories, simulated_histories);
criterion_main!(benches);
