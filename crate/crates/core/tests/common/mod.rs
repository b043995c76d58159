#![allow(dead_code)]

use axcheck::axioms::holds_all;
use axcheck::relation::Relation;
use axcheck::semantics::check_valid;
use axcheck::{DataTypeSpec, Execution, History, ModelSpec};

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Every valid execution of `h`, found by trying every visibility relation
/// and every choice of serializations.
pub fn all_valid(h: &History, dt: &DataTypeSpec) -> Vec<Execution> {
    let n = h.len();
    assert!(n <= 4, "brute force is limited to tiny histories");
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let perms = permutations(&(0..n).collect::<Vec<_>>());
    let procs = h.process_count();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let vis = Relation::from_pairs(
            n,
            pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &p)| p),
        );
        let mut idx = vec![0usize; procs];
        loop {
            let sers: Vec<Vec<usize>> = idx.iter().map(|&k| perms[k].clone()).collect();
            let e = Execution::new(h.clone(), vis.clone(), sers).unwrap();
            if check_valid(&e, dt) {
                out.push(e);
            }
            let mut p = 0;
            while p < procs {
                idx[p] += 1;
                if idx[p] < perms.len() {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
            if p == procs {
                break;
            }
        }
    }
    out
}

pub fn oracle_sat(valid: &[Execution], m: &ModelSpec) -> bool {
    valid.iter().any(|e| holds_all(&m.axioms, e).unwrap())
}
