//! Sparse symmetric tensors keyed by sorted index tuples.

use std::collections::BTreeMap;
use std::fmt;

use crate::idx::Idx;
use crate::rat::Rat;

/// A finite symmetric tensor of fixed rank. Entries are stored once, under
/// the sorted representative of the index multiset, and zero values are never
/// stored. Looking an entry up under any permutation of its key returns the
/// same value.
#[derive(Clone, PartialEq, Eq)]
pub struct SymTensor {
    rank: usize,
    entries: BTreeMap<Vec<Idx>, Rat>,
}

impl SymTensor {
    pub fn zero(rank: usize) -> Self {
        SymTensor {
            rank,
            entries: BTreeMap::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Set the entry at the multiset of `key` (order irrelevant).
    /// Zero values erase the entry.
    pub fn set(&mut self, key: &[Idx], value: Rat) {
        assert_eq!(key.len(), self.rank, "key length != rank");
        let mut k = key.to_vec();
        k.sort();
        if value.is_zero() {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, value);
        }
    }

    pub fn add_to(&mut self, key: &[Idx], value: &Rat) {
        if value.is_zero() {
            return;
        }
        assert_eq!(key.len(), self.rank, "key length != rank");
        let mut k = key.to_vec();
        k.sort();
        let entry = self.entries.entry(k);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(value.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += value;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Entry at the multiset of `key`; zero if absent.
    pub fn get(&self, key: &[Idx]) -> Rat {
        assert_eq!(key.len(), self.rank, "key length != rank");
        let mut k = key.to_vec();
        k.sort();
        self.entries.get(&k).cloned().unwrap_or_else(Rat::zero)
    }

    /// Iterate over (sorted key, value) pairs in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Idx>, &Rat)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Vec<Idx>> {
        self.entries.keys()
    }

    pub fn scale(&self, c: &Rat) -> SymTensor {
        if c.is_zero() {
            return SymTensor::zero(self.rank);
        }
        SymTensor {
            rank: self.rank,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v * c))
                .collect(),
        }
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        assert_eq!(self.rank, other.rank, "rank mismatch");
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.add_to(k, v);
        }
        out
    }

    /// All indices appearing in any key.
    pub fn support(&self) -> impl Iterator<Item = &Idx> {
        self.entries.keys().flatten()
    }
}

impl fmt::Debug for SymTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor(rank {}) {{", self.rank)?;
        for (k, v) in &self.entries {
            let key = k
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",");
            write!(f, " [{key}]={v}")?;
        }
        write!(f, " }}")
    }
}

fn factorial(n: u64) -> u64 {
    (1..=n).product::<u64>().max(1)
}

/// Number of distinct orderings of a sorted tuple (multiset permutations):
/// n! divided by the factorial of each repetition count.
pub fn distinct_orderings(sorted_key: &[Idx]) -> u64 {
    let mut count = factorial(sorted_key.len() as u64);
    let mut run = 1u64;
    for w in 1..sorted_key.len() {
        if sorted_key[w] == sorted_key[w - 1] {
            run += 1;
        } else {
            count /= factorial(run);
            run = 1;
        }
    }
    count / factorial(run)
}

/// Average a raw (not necessarily symmetric) tensor over all slot
/// permutations. Idempotent on symmetric input.
pub fn symmetrize(rank: usize, raw: impl IntoIterator<Item = (Vec<Idx>, Rat)>) -> SymTensor {
    // Group raw orderings by multiset, then divide each accumulated value by
    // the number of distinct orderings of that multiset.
    let mut acc: BTreeMap<Vec<Idx>, Rat> = BTreeMap::new();
    for (key, value) in raw {
        assert_eq!(key.len(), rank, "key length != rank");
        let mut k = key;
        k.sort();
        *acc.entry(k).or_insert_with(Rat::zero) += value;
    }
    let mut out = SymTensor::zero(rank);
    for (k, v) in acc {
        let m = Rat::from_int(distinct_orderings(&k) as i64);
        out.set(&k, v / m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;
    use itertools::Itertools;

    fn p(n: u32) -> Idx {
        Idx::plain(n)
    }

    #[test]
    fn orderings_count() {
        assert_eq!(distinct_orderings(&[p(1), p(2)]), 2);
        assert_eq!(distinct_orderings(&[p(1), p(1), p(1)]), 1);
        assert_eq!(distinct_orderings(&[p(1), p(1), p(2)]), 3);
        assert_eq!(distinct_orderings(&[p(1), p(2), p(3)]), 6);
    }

    #[test]
    fn symmetrize_rank2_canonical_key() {
        let t = symmetrize(2, vec![(vec![p(1), p(2)], rat!(1))]);
        assert_eq!(t.get(&[p(2), p(1)]), rat!(1, 2) + rat!(1, 2));
        assert_eq!(t.get(&[p(1), p(2)]), rat!(1));
    }

    #[test]
    fn symmetrize_diagonal_fixed_point() {
        let t = symmetrize(3, vec![(vec![p(1), p(1), p(1)], rat!(1, 4))]);
        assert_eq!(t.get(&[p(1), p(1), p(1)]), rat!(1, 4));
    }

    #[test]
    fn symmetrize_averages_orderings() {
        // Independent oracle: enumerate all slot permutations explicitly.
        let raw = vec![(vec![p(1), p(2)], rat!(1)), (vec![p(2), p(1)], rat!(3))];
        let mut oracle = Rat::zero();
        for (key, v) in &raw {
            for perm in (0..2).permutations(2) {
                let permuted: Vec<Idx> = perm.iter().map(|&i| key[i].clone()).collect();
                if permuted == vec![p(1), p(2)] {
                    oracle += v.clone();
                }
            }
        }
        oracle = oracle / rat!(2); // 2! permutations
        let t = symmetrize(2, raw);
        assert_eq!(t.get(&[p(1), p(2)]), oracle);
        assert_eq!(t.get(&[p(1), p(2)]), rat!(2));
    }

    #[test]
    fn symmetrize_idempotent() {
        let t = symmetrize(
            3,
            vec![
                (vec![p(1), p(2), p(2)], rat!(5)),
                (vec![p(3), p(1), p(1)], rat!(-7, 3)),
            ],
        );
        let again = symmetrize(3, t.iter().map(|(k, v)| (k.clone(), v.clone())));
        assert_eq!(t, again);
    }

    #[test]
    fn permutation_invariant_lookup() {
        let mut t = SymTensor::zero(3);
        t.set(&[p(2), p(1), p(3)], rat!(7));
        for perm in (0..3usize).permutations(3) {
            let key: Vec<Idx> = perm.iter().map(|&i| [p(1), p(2), p(3)][i].clone()).collect();
            assert_eq!(t.get(&key), rat!(7));
        }
    }
}
