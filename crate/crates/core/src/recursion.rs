//! The abstract recursion producing the wave-function tensors S_{g,n}.
//!
//! Layers are computed in increasing Euler characteristic 2g-2+n, ties by g.
//! For each output tuple the formula is evaluated with one slot distinguished:
//!
//! ```text
//! S_{g,n; i, i_1..i_{n-1}} =
//!     2 sum_a sum_k b_{i i_a}^k S_{g, n-1; k, rest(a)}
//!   + sum_{g1+g2=g, J1|J2} sum_{jk} c_i^{jk} S_{g1, |J1|+1; j, J1} S_{g2, |J2|+1; k, J2}
//!   + sum_{jk} c_i^{jk} S_{g-1, n+1; j, k, i_1..i_{n-1}}
//! ```
//!
//! where only stored layers (g=0 with n>=3, or g>=1) appear on the right.
//!
//! Before any value is computed, a forward walk over the B/C index graph
//! produces a superset of every layer's support. Tuples outside the walked
//! support are exactly zero; a needed tuple that the walk pushed outside the
//! universe is a closure violation and aborts the run.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::airy::AiryData;
use crate::idx::Idx;
use crate::rat::Rat;
use crate::tensor::SymTensor;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecursionError {
    #[error("recursion for S_{{{g},{n}}} needs index {outside} outside the universe")]
    Closure { g: u32, n: u32, outside: Idx },
}

/// Wave-function coefficients: one symmetric rank-n tensor per stored (g, n).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WaveCoeffs {
    pub chi_max: u32,
    pub entries: BTreeMap<(u32, u32), SymTensor>,
}

impl WaveCoeffs {
    pub fn new(chi_max: u32) -> Self {
        let mut entries = BTreeMap::new();
        for (g, n) in layers(chi_max) {
            entries.insert((g, n), SymTensor::zero(n as usize));
        }
        WaveCoeffs { chi_max, entries }
    }

    pub fn get(&self, g: u32, n: u32) -> Option<&SymTensor> {
        self.entries.get(&(g, n))
    }

    pub fn value(&self, g: u32, n: u32, key: &[Idx]) -> Rat {
        self.entries
            .get(&(g, n))
            .map(|t| t.get(key))
            .unwrap_or_else(Rat::zero)
    }
}

/// Stored layers with 2g-2+n <= chi_max, in evaluation order.
pub fn layers(chi_max: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for chi in 1..=chi_max {
        for g in 0..=(chi + 2) / 2 {
            let n = chi as i64 + 2 - 2 * g as i64;
            if n < 1 {
                continue;
            }
            let n = n as u32;
            if g == 0 && n < 3 {
                continue;
            }
            out.push((g, n));
        }
    }
    out
}

fn is_stored_layer(g: u32, n: u32) -> bool {
    n >= 1 && (g >= 1 || n >= 3)
}

struct Tables {
    /// b entries grouped by the recursion index k: k -> [(i, j, value)]
    b_by_k: BTreeMap<Idx, Vec<(Idx, Idx, Rat)>>,
    /// b entries grouped by (i, j): -> [(k, value)]
    b_by_ij: BTreeMap<(Idx, Idx), Vec<(Idx, Rat)>>,
    /// c entries grouped by sorted (j, k): -> [(i, value)]
    c_by_jk: BTreeMap<(Idx, Idx), Vec<(Idx, Rat)>>,
    /// c entries grouped by i, expanded to ordered (j, k): -> [(j, k, value)]
    c_by_i: BTreeMap<Idx, Vec<(Idx, Idx, Rat)>>,
}

impl Tables {
    fn build(s: &AiryData) -> Tables {
        let mut t = Tables {
            b_by_k: BTreeMap::new(),
            b_by_ij: BTreeMap::new(),
            c_by_jk: BTreeMap::new(),
            c_by_i: BTreeMap::new(),
        };
        for ((i, j, k), v) in &s.b {
            t.b_by_k
                .entry(k.clone())
                .or_default()
                .push((i.clone(), j.clone(), v.clone()));
            t.b_by_ij
                .entry((i.clone(), j.clone()))
                .or_default()
                .push((k.clone(), v.clone()));
        }
        for ((i, j, k), v) in &s.c {
            t.c_by_jk
                .entry((j.clone(), k.clone()))
                .or_default()
                .push((i.clone(), v.clone()));
            t.c_by_i
                .entry(i.clone())
                .or_default()
                .push((j.clone(), k.clone(), v.clone()));
            if j != k {
                t.c_by_i
                    .entry(i.clone())
                    .or_default()
                    .push((k.clone(), j.clone(), v.clone()));
            }
        }
        t
    }
}

type Support = BTreeSet<Vec<Idx>>;

fn sorted_with(base: &[Idx], extra: &[&Idx]) -> Vec<Idx> {
    let mut v: Vec<Idx> = base.to_vec();
    v.extend(extra.iter().map(|i| (*i).clone()));
    v.sort();
    v
}

fn remove_one(t: &[Idx], take: usize) -> Vec<Idx> {
    let mut v = t.to_vec();
    v.remove(take);
    v
}

/// Forward walk over the B/C index graph: a superset of the support of every
/// layer, including tuples pushed outside the universe by shell entries.
pub fn walk_supports(s: &AiryData, chi_max: u32) -> BTreeMap<(u32, u32), Support> {
    let tables = Tables::build(s);
    let mut supports: BTreeMap<(u32, u32), Support> = BTreeMap::new();
    for (g, n) in layers(chi_max) {
        let mut supp: Support = BTreeSet::new();
        if (g, n) == (0, 3) {
            supp.extend(s.a.keys().cloned());
        } else if (g, n) == (1, 1) {
            supp.extend(s.eps.keys().map(|i| vec![i.clone()]));
        } else {
            // b-step from (g, n-1)
            if is_stored_layer(g, n - 1) {
                if let Some(prev) = supports.get(&(g, n - 1)) {
                    for t in prev {
                        for (pos, k) in t.iter().enumerate() {
                            if pos > 0 && t[pos - 1] == *k {
                                continue;
                            }
                            if let Some(entries) = tables.b_by_k.get(k) {
                                let rest = remove_one(t, pos);
                                for (i, j, _) in entries {
                                    supp.insert(sorted_with(&rest, &[i, j]));
                                }
                            }
                        }
                    }
                }
            }
            // pair step from (g1, m1) x (g2, m2)
            for g1 in 0..=g {
                let g2 = g - g1;
                for m1 in 1..=n {
                    let m2 = n + 1 - m1;
                    if !is_stored_layer(g1, m1) || !is_stored_layer(g2, m2) {
                        continue;
                    }
                    let (Some(s1), Some(s2)) =
                        (supports.get(&(g1, m1)), supports.get(&(g2, m2)))
                    else {
                        continue;
                    };
                    for t1 in s1 {
                        for t2 in s2 {
                            for (p1, j) in t1.iter().enumerate() {
                                if p1 > 0 && t1[p1 - 1] == *j {
                                    continue;
                                }
                                for (p2, k) in t2.iter().enumerate() {
                                    if p2 > 0 && t2[p2 - 1] == *k {
                                        continue;
                                    }
                                    let jk = if j <= k {
                                        (j.clone(), k.clone())
                                    } else {
                                        (k.clone(), j.clone())
                                    };
                                    if let Some(entries) = tables.c_by_jk.get(&jk) {
                                        let mut rest = remove_one(t1, p1);
                                        rest.extend(remove_one(t2, p2));
                                        for (i, _) in entries {
                                            supp.insert(sorted_with(&rest, &[i]));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            // handle step from (g-1, n+2)
            if g >= 1 && is_stored_layer(g - 1, n + 2) {
                if let Some(prev) = supports.get(&(g - 1, n + 2)) {
                    for t in prev {
                        for p1 in 0..t.len() {
                            if p1 > 0 && t[p1 - 1] == t[p1] {
                                continue;
                            }
                            for p2 in (p1 + 1)..t.len() {
                                if p2 > p1 + 1 && t[p2 - 1] == t[p2] {
                                    continue;
                                }
                                let jk = (t[p1].clone(), t[p2].clone());
                                let jk = if jk.0 <= jk.1 { jk } else { (jk.1, jk.0) };
                                if let Some(entries) = tables.c_by_jk.get(&jk) {
                                    let mut rest = t.to_vec();
                                    rest.remove(p2);
                                    rest.remove(p1);
                                    for (i, _) in entries {
                                        supp.insert(sorted_with(&rest, &[i]));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        supports.insert((g, n), supp);
    }
    supports
}

struct Engine<'a> {
    s: &'a AiryData,
    tables: Tables,
    supports: BTreeMap<(u32, u32), Support>,
    waves: WaveCoeffs,
}

impl<'a> Engine<'a> {
    /// Value of a lower layer at `key`, or a closure error when the walk says
    /// the tuple may be nonzero but it lies outside the universe.
    fn lookup(&self, g: u32, n: u32, key: &mut Vec<Idx>) -> Result<Rat, RecursionError> {
        if !is_stored_layer(g, n) {
            return Ok(Rat::zero());
        }
        key.sort();
        match self.supports.get(&(g, n)) {
            Some(supp) if supp.contains(key.as_slice()) => {
                if let Some(outside) = key.iter().find(|i| !self.s.universe.contains(*i)) {
                    return Err(RecursionError::Closure {
                        g,
                        n,
                        outside: outside.clone(),
                    });
                }
                Ok(self.waves.value(g, n, key))
            }
            _ => Ok(Rat::zero()),
        }
    }

    /// Evaluate the recursion at `(g, n)` with `dist` distinguished and the
    /// remaining indices `rest`.
    fn evaluate(&self, g: u32, n: u32, dist: &Idx, rest: &[Idx]) -> Result<Rat, RecursionError> {
        let mut total = Rat::zero();
        let two = Rat::from_int(2);

        // b-term
        if is_stored_layer(g, n - 1) {
            for (alpha, ia) in rest.iter().enumerate() {
                if let Some(entries) = self.tables.b_by_ij.get(&(dist.clone(), ia.clone())) {
                    let others = remove_one(rest, alpha);
                    for (k, v) in entries {
                        let mut key = others.clone();
                        key.push(k.clone());
                        let s_val = self.lookup(g, n - 1, &mut key)?;
                        if !s_val.is_zero() {
                            total += &two * v * s_val;
                        }
                    }
                }
            }
        }

        let c_entries = self.tables.c_by_i.get(dist);

        // pair term over genus splits and position subsets
        if let Some(c_entries) = c_entries {
            let m = rest.len();
            for mask in 0u32..(1 << m) {
                let n1 = mask.count_ones() + 1;
                let n2 = (m as u32 - mask.count_ones()) + 1;
                for g1 in 0..=g {
                    let g2 = g - g1;
                    if !is_stored_layer(g1, n1) || !is_stored_layer(g2, n2) {
                        continue;
                    }
                    for (j, k, v) in c_entries {
                        let mut key1: Vec<Idx> = vec![j.clone()];
                        let mut key2: Vec<Idx> = vec![k.clone()];
                        for (pos, idx) in rest.iter().enumerate() {
                            if mask & (1 << pos) != 0 {
                                key1.push(idx.clone());
                            } else {
                                key2.push(idx.clone());
                            }
                        }
                        let v1 = self.lookup(g1, n1, &mut key1)?;
                        if v1.is_zero() {
                            continue;
                        }
                        let v2 = self.lookup(g2, n2, &mut key2)?;
                        if !v2.is_zero() {
                            total += v * v1 * v2;
                        }
                    }
                }
            }
        }

        // handle term
        if g >= 1 {
            if let Some(c_entries) = c_entries {
                for (j, k, v) in c_entries {
                    let mut key = rest.to_vec();
                    key.push(j.clone());
                    key.push(k.clone());
                    let s_val = self.lookup(g - 1, n + 2, &mut key)?;
                    if !s_val.is_zero() {
                        total += v * s_val;
                    }
                }
            }
        }

        Ok(total)
    }
}

/// Run the recursion up to `chi_max`. The input must be quantum or
/// pre-quantum; for a pre-quantum input symmetry of the result is a claim to
/// verify with [`check_symmetry`], not a guarantee.
pub fn run_recursion(s: &AiryData, chi_max: u32) -> Result<WaveCoeffs, RecursionError> {
    assert!(chi_max >= 1, "chi_max must be positive");
    assert!(
        s.kind.is_quantum(),
        "recursion requires a quantum or pre-quantum structure"
    );
    let mut engine = Engine {
        s,
        tables: Tables::build(s),
        supports: walk_supports(s, chi_max),
        waves: WaveCoeffs::new(chi_max),
    };

    for (g, n) in layers(chi_max) {
        let mut tensor = SymTensor::zero(n as usize);
        if (g, n) == (0, 3) {
            tensor = s.a.scale(&Rat::from_int(2));
        } else if (g, n) == (1, 1) {
            for (i, v) in &s.eps {
                tensor.set(std::slice::from_ref(i), v.clone());
            }
        } else {
            let keys: Vec<Vec<Idx>> = engine.supports[&(g, n)]
                .iter()
                .filter(|t| t.iter().all(|i| s.universe.contains(i)))
                .cloned()
                .collect();
            for key in keys {
                let value = engine.evaluate(g, n, &key[0], &key[1..])?;
                tensor.set(&key, value);
            }
        }
        engine.waves.entries.insert((g, n), tensor);
    }
    Ok(engine.waves)
}

/// A stored entry whose value depends on which slot is distinguished.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SymmetryViolation {
    pub g: u32,
    pub n: u32,
    pub key: Vec<Idx>,
    pub values: Vec<(Idx, Rat)>,
}

/// Recompute every stored entry with each index slot taken as distinguished
/// and report disagreements. Empty for quantum Airy structures.
pub fn check_symmetry(s: &AiryData, w: &WaveCoeffs) -> Result<Vec<SymmetryViolation>, RecursionError> {
    let engine = Engine {
        s,
        tables: Tables::build(s),
        supports: walk_supports(s, w.chi_max),
        waves: w.clone(),
    };
    let mut violations = Vec::new();
    for ((g, n), tensor) in &w.entries {
        if matches!((g, n), (0, 3) | (1, 1)) {
            continue;
        }
        for (key, _) in tensor.iter() {
            let mut values: Vec<(Idx, Rat)> = Vec::new();
            for (pos, dist) in key.iter().enumerate() {
                if pos > 0 && key[pos - 1] == *dist {
                    continue;
                }
                let rest = remove_one(key, pos);
                values.push((dist.clone(), engine.evaluate(*g, *n, dist, &rest)?));
            }
            if values.windows(2).any(|w| w[0].1 != w[1].1) {
                violations.push(SymmetryViolation {
                    g: *g,
                    n: *n,
                    key: key.clone(),
                    values,
                });
            }
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airy::StructureKind;
    use crate::rat;

    fn p(n: u32) -> Idx {
        Idx::plain(n)
    }

    #[test]
    fn layer_order() {
        let l = layers(3);
        assert_eq!(
            l,
            vec![(0, 3), (1, 1), (0, 4), (1, 2), (0, 5), (1, 3), (2, 1)]
        );
    }

    #[test]
    fn base_cases_and_vanishing() {
        // B = C = 0, eps = 0: S_{0,3} = 2A and everything else vanishes.
        let mut s = AiryData::new((1..=2).map(p), StructureKind::Quantum);
        s.set_a(&p(1), &p(1), &p(2), rat!(3, 7));
        let w = run_recursion(&s, 4).unwrap();
        assert_eq!(w.value(0, 3, &[p(1), p(1), p(2)]), rat!(6, 7));
        for ((g, n), t) in &w.entries {
            if (*g, *n) != (0, 3) {
                assert!(t.is_zero(), "S_{{{g},{n}}} should vanish");
            }
        }
        assert!(check_symmetry(&s, &w).unwrap().is_empty());
    }

    #[test]
    fn zero_seed_gives_zero() {
        let mut s = AiryData::new((1..=2).map(p), StructureKind::Quantum);
        s.add_b(&p(1), &p(1), &p(2), &rat!(1, 2));
        s.add_c(&p(1), &p(2), &p(2), &rat!(5));
        let w = run_recursion(&s, 5).unwrap();
        for (_, t) in &w.entries {
            assert!(t.is_zero());
        }
    }

    #[test]
    fn broken_prequantum_fails_symmetry() {
        // b_{12}^1 = 1 with eps = e_1 seeds an asymmetric S_{1,2}.
        let mut s = AiryData::new((1..=2).map(p), StructureKind::PreQuantum);
        s.add_b(&p(1), &p(2), &p(1), &rat!(1));
        s.add_eps(&p(1), &rat!(1));
        let w = run_recursion(&s, 2).unwrap();
        assert_eq!(w.value(1, 2, &[p(1), p(2)]), rat!(2));
        let violations = check_symmetry(&s, &w).unwrap();
        assert!(!violations.is_empty());
        assert_eq!((violations[0].g, violations[0].n), (1, 2));
    }
}
