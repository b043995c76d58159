//! Dense binary relations over a fixed enumeration of at most 64 events.

use std::fmt;

pub const MAX_EVENTS: usize = 64;

/// A set of event indices.
pub type Bits = u64;

#[inline]
pub fn bit(i: usize) -> Bits {
    1u64 << i
}

#[inline]
pub fn has(set: Bits, i: usize) -> bool {
    set >> i & 1 == 1
}

pub fn iter_bits(mut set: Bits) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if set == 0 {
            None
        } else {
            let i = set.trailing_zeros() as usize;
            set &= set - 1;
            Some(i)
        }
    })
}

/// `rows[a]` holds every `b` with `a R b`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    n: usize,
    rows: Vec<Bits>,
}

impl Relation {
    pub fn empty(n: usize) -> Relation {
        assert!(
            n <= MAX_EVENTS,
            "relation over {n} events exceeds {MAX_EVENTS}"
        );
        Relation {
            n,
            rows: vec![0; n],
        }
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Relation {
        let mut r = Relation::empty(n);
        for (a, b) in pairs {
            r.insert(a, b);
        }
        r
    }

    /// Builds a relation from predecessor sets: bit `a` of `ins[b]` means `a R b`.
    pub fn from_in_rows(ins: &[Bits]) -> Relation {
        let mut r = Relation::empty(ins.len());
        for (b, &row) in ins.iter().enumerate() {
            for a in iter_bits(row) {
                r.insert(a, b);
            }
        }
        r
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|&r| r == 0)
    }

    #[inline]
    pub fn contains(&self, a: usize, b: usize) -> bool {
        has(self.rows[a], b)
    }

    #[inline]
    pub fn insert(&mut self, a: usize, b: usize) {
        self.rows[a] |= bit(b);
    }

    #[inline]
    pub fn remove(&mut self, a: usize, b: usize) {
        self.rows[a] &= !bit(b);
    }

    /// Successors of `a`.
    #[inline]
    pub fn row(&self, a: usize) -> Bits {
        self.rows[a]
    }

    /// Predecessors of `b`.
    pub fn column(&self, b: usize) -> Bits {
        let mut col = 0;
        for (a, &row) in self.rows.iter().enumerate() {
            if has(row, b) {
                col |= bit(a);
            }
        }
        col
    }

    pub fn in_rows(&self) -> Vec<Bits> {
        (0..self.n).map(|b| self.column(b)).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(a, &row)| iter_bits(row).map(move |b| (a, b)))
    }

    pub fn count(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    pub fn union(&self, other: &Relation) -> Relation {
        debug_assert_eq!(self.n, other.n);
        Relation {
            n: self.n,
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    pub fn inverse(&self) -> Relation {
        Relation::from_pairs(self.n, self.pairs().map(|(a, b)| (b, a)))
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.rows.iter().zip(&other.rows).all(|(a, b)| a & !b == 0)
    }

    pub fn is_irreflexive(&self) -> bool {
        (0..self.n).all(|a| !self.contains(a, a))
    }

    pub fn is_transitive(&self) -> bool {
        self.transitive_closure() == *self
    }

    pub fn transitive_closure(&self) -> Relation {
        let mut rows = self.rows.clone();
        close_rows(&mut rows);
        Relation { n: self.n, rows }
    }

    /// True iff the relation, seen as a graph, has a cycle.
    pub fn has_cycle(&self) -> bool {
        !self.transitive_closure().is_irreflexive()
    }
}

/// Warshall closure in place over successor rows.
pub fn close_rows(rows: &mut [Bits]) {
    for k in 0..rows.len() {
        let rk = rows[k];
        for row in rows.iter_mut() {
            if has(*row, k) {
                *row |= rk;
            }
        }
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_of_chain() {
        let r = Relation::from_pairs(3, [(0, 1), (1, 2)]);
        let c = r.transitive_closure();
        assert!(c.contains(0, 2));
        assert!(c.is_irreflexive());
        assert!(!r.has_cycle());
    }

    #[test]
    fn two_cycle_closure_is_reflexive() {
        let r = Relation::from_pairs(2, [(0, 1), (1, 0)]);
        let c = r.transitive_closure();
        assert_eq!(c.count(), 4);
        assert!(r.has_cycle());
    }

    #[test]
    fn in_rows_round_trip() {
        let r = Relation::from_pairs(4, [(0, 1), (2, 1), (3, 0)]);
        assert_eq!(Relation::from_in_rows(&r.in_rows()), r);
        assert_eq!(r.column(1), bit(0) | bit(2));
    }
}
