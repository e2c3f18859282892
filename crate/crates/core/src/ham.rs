//! At-most-quadratic Hamiltonians and their brackets.
//!
//! A `QuadHam` is a normal-ordered element of the span of
//! `{1, hbar, x_i, hbar d_i, x_i x_j, hbar x_i d_j, hbar^2 d_i d_j}`.
//! All x-factors stand left of all derivative factors; the scalar produced by
//! reordering is tracked in the `hbar_constant` slot. Read classically,
//! `hbar d_i` is the momentum coordinate `y_i` and `hbar_constant` is unused.
//!
//! Quadratic slots use tensor-entry semantics: the stored value at `(j,k)` is
//! the coefficient in a sum over *all ordered pairs*, so the polynomial
//! coefficient of the monomial `x_j x_k` with `j != k` is twice the entry.

use std::collections::BTreeMap;
use std::fmt;

use crate::idx::Idx;
use crate::rat::Rat;
use crate::tensor::SymTensor;

#[derive(Clone, PartialEq, Eq)]
pub struct QuadHam {
    pub constant: Rat,
    pub hbar_constant: Rat,
    pub linear_x: BTreeMap<Idx, Rat>,
    pub linear_y: BTreeMap<Idx, Rat>,
    pub quad_xx: SymTensor,
    pub quad_yy: SymTensor,
    /// Coefficient of `x_j (hbar d_k)`, keyed by `(j, k)`; no symmetry.
    pub quad_xy: BTreeMap<(Idx, Idx), Rat>,
}

impl QuadHam {
    pub fn zero() -> Self {
        QuadHam {
            constant: Rat::zero(),
            hbar_constant: Rat::zero(),
            linear_x: BTreeMap::new(),
            linear_y: BTreeMap::new(),
            quad_xx: SymTensor::zero(2),
            quad_yy: SymTensor::zero(2),
            quad_xy: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero()
            && self.hbar_constant.is_zero()
            && self.linear_x.is_empty()
            && self.linear_y.is_empty()
            && self.quad_xx.is_zero()
            && self.quad_yy.is_zero()
            && self.quad_xy.is_empty()
    }

    pub fn x(i: Idx, c: Rat) -> Self {
        let mut h = QuadHam::zero();
        h.add_x(&i, &c);
        h
    }

    pub fn y(i: Idx, c: Rat) -> Self {
        let mut h = QuadHam::zero();
        h.add_y(&i, &c);
        h
    }

    pub fn add_x(&mut self, i: &Idx, c: &Rat) {
        add_map(&mut self.linear_x, i.clone(), c);
    }

    pub fn add_y(&mut self, i: &Idx, c: &Rat) {
        add_map(&mut self.linear_y, i.clone(), c);
    }

    pub fn add_xy(&mut self, j: &Idx, k: &Idx, c: &Rat) {
        add_map(&mut self.quad_xy, (j.clone(), k.clone()), c);
    }

    pub fn add(&self, other: &QuadHam) -> QuadHam {
        let mut out = self.clone();
        out.constant += &other.constant;
        out.hbar_constant += &other.hbar_constant;
        for (k, v) in &other.linear_x {
            add_map(&mut out.linear_x, k.clone(), v);
        }
        for (k, v) in &other.linear_y {
            add_map(&mut out.linear_y, k.clone(), v);
        }
        for ((j, k), v) in &other.quad_xy {
            add_map(&mut out.quad_xy, (j.clone(), k.clone()), v);
        }
        out.quad_xx = out.quad_xx.add(&other.quad_xx);
        out.quad_yy = out.quad_yy.add(&other.quad_yy);
        out
    }

    pub fn scale(&self, c: &Rat) -> QuadHam {
        if c.is_zero() {
            return QuadHam::zero();
        }
        QuadHam {
            constant: &self.constant * c,
            hbar_constant: &self.hbar_constant * c,
            linear_x: self.linear_x.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
            linear_y: self.linear_y.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
            quad_xx: self.quad_xx.scale(c),
            quad_yy: self.quad_yy.scale(c),
            quad_xy: self.quad_xy.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn sub(&self, other: &QuadHam) -> QuadHam {
        self.add(&other.scale(&-Rat::one()))
    }

    /// Decompose into monomial terms `(x-multiset, d-multiset, coeff)`.
    /// Quadratic entries are folded into single monomials, so the returned
    /// coefficients are polynomial coefficients. The scalar slots are not
    /// included.
    fn terms(&self) -> Vec<Term> {
        let two = Rat::from_int(2);
        let mut out = Vec::new();
        for (i, c) in &self.linear_x {
            out.push(Term::new(vec![i.clone()], vec![], c.clone()));
        }
        for (i, c) in &self.linear_y {
            out.push(Term::new(vec![], vec![i.clone()], c.clone()));
        }
        for (key, c) in self.quad_xx.iter() {
            let m = if key[0] == key[1] { c.clone() } else { &two * c };
            out.push(Term::new(key.clone(), vec![], m));
        }
        for (key, c) in self.quad_yy.iter() {
            let m = if key[0] == key[1] { c.clone() } else { &two * c };
            out.push(Term::new(vec![], key.clone(), m));
        }
        for ((j, k), c) in &self.quad_xy {
            out.push(Term::new(vec![j.clone()], vec![k.clone()], c.clone()));
        }
        out
    }

    fn add_term(&mut self, xs: &[Idx], ds: &[Idx], hb: u32, coeff: &Rat) {
        if coeff.is_zero() {
            return;
        }
        match (xs.len(), ds.len(), hb) {
            (0, 0, 0) => self.constant += coeff,
            (0, 0, 1) => self.hbar_constant += coeff,
            (1, 0, 0) => add_map(&mut self.linear_x, xs[0].clone(), coeff),
            (0, 1, 0) => add_map(&mut self.linear_y, ds[0].clone(), coeff),
            (2, 0, 0) => {
                let c = if xs[0] == xs[1] { coeff.clone() } else { coeff / &Rat::from_int(2) };
                self.quad_xx.add_to(xs, &c);
            }
            (0, 2, 0) => {
                let c = if ds[0] == ds[1] { coeff.clone() } else { coeff / &Rat::from_int(2) };
                self.quad_yy.add_to(ds, &c);
            }
            (1, 1, 0) => add_map(&mut self.quad_xy, (xs[0].clone(), ds[0].clone()), coeff),
            _ => unreachable!("bracket produced a term outside the quadratic span"),
        }
    }
}

fn add_map<K: Ord>(map: &mut BTreeMap<K, Rat>, key: K, v: &Rat) {
    if v.is_zero() {
        return;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(v.clone());
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            *e.get_mut() += v;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

#[derive(Clone)]
struct Term {
    xs: Vec<Idx>,
    ds: Vec<Idx>,
    coeff: Rat,
}

impl Term {
    fn new(xs: Vec<Idx>, ds: Vec<Idx>, coeff: Rat) -> Self {
        Term { xs, ds, coeff }
    }
}

/// One Wick-style contraction pattern between the derivative factors of the
/// left term and the x-factors of the right term.
fn matchings(q: usize, p: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..p {
            out.push(vec![(a, b)]);
        }
    }
    if q == 2 && p == 2 {
        out.push(vec![(0, 0), (1, 1)]);
        out.push(vec![(0, 1), (1, 0)]);
    }
    out
}

/// Contributions of the normal-ordered product `t1 * t2` that involve at
/// least one contraction, as `(xs, ds, hbar_power, coeff)`.
fn contracted_products(t1: &Term, t2: &Term) -> Vec<(Vec<Idx>, Vec<Idx>, u32, Rat)> {
    let mut out = Vec::new();
    for m in matchings(t1.ds.len(), t2.xs.len()) {
        if m.iter().any(|&(a, b)| t1.ds[a] != t2.xs[b]) {
            continue;
        }
        let mut xs: Vec<Idx> = t1.xs.clone();
        for (pos, x) in t2.xs.iter().enumerate() {
            if !m.iter().any(|&(_, b)| b == pos) {
                xs.push(x.clone());
            }
        }
        let mut ds: Vec<Idx> = Vec::new();
        for (pos, d) in t1.ds.iter().enumerate() {
            if !m.iter().any(|&(a, _)| a == pos) {
                ds.push(d.clone());
            }
        }
        ds.extend(t2.ds.iter().cloned());
        out.push((xs, ds, m.len() as u32, &t1.coeff * &t2.coeff));
    }
    out
}

/// Lie bracket `(h1*h2 - h2*h1)/hbar` of normal-ordered quantum Hamiltonians.
/// The scalar slots of the inputs are central and do not contribute.
pub fn weyl_bracket(h1: &QuadHam, h2: &QuadHam) -> QuadHam {
    let t1s = h1.terms();
    let t2s = h2.terms();
    let mut out = QuadHam::zero();
    for t1 in &t1s {
        for t2 in &t2s {
            for (xs, ds, contractions, coeff) in contracted_products(t1, t2) {
                // Each contraction carries one power of hbar; dividing the
                // commutator by hbar leaves contractions - 1 of them.
                out.add_term(&xs, &ds, contractions - 1, &coeff);
            }
            for (xs, ds, contractions, coeff) in contracted_products(t2, t1) {
                out.add_term(&xs, &ds, contractions - 1, &-coeff);
            }
        }
    }
    out
}

/// Poisson bracket with `{y_i, x^j} = delta_ij`, i.e. the classical limit of
/// [`weyl_bracket`]: the single-contraction terms only.
pub fn poisson_bracket(h1: &QuadHam, h2: &QuadHam) -> QuadHam {
    let mut out = weyl_bracket(h1, h2);
    out.hbar_constant = Rat::zero();
    out
}

/// Contraction events over indices outside `universe` whose surviving factors
/// all lie inside it. Such events mean the in-universe part of a bracket of
/// truncated Hamiltonians is not trustworthy.
pub fn boundary_contractions(
    h1: &QuadHam,
    h2: &QuadHam,
    universe: &std::collections::BTreeSet<Idx>,
) -> Vec<Idx> {
    let mut hits = Vec::new();
    let t1s = h1.terms();
    let t2s = h2.terms();
    for (a, b) in [(&t1s, &t2s), (&t2s, &t1s)] {
        for t1 in a {
            for t2 in b {
                for m in matchings(t1.ds.len(), t2.xs.len()) {
                    if m.iter().any(|&(i, j)| t1.ds[i] != t2.xs[j]) {
                        continue;
                    }
                    let contracted: Vec<&Idx> = m.iter().map(|&(i, _)| &t1.ds[i]).collect();
                    if contracted.iter().all(|i| universe.contains(*i)) {
                        continue;
                    }
                    let survivors_in = t1
                        .xs
                        .iter()
                        .enumerate()
                        .map(|(_, x)| x)
                        .chain(t2.xs.iter().enumerate().filter(|(p, _)| !m.iter().any(|&(_, j)| j == *p)).map(|(_, x)| x))
                        .chain(t1.ds.iter().enumerate().filter(|(p, _)| !m.iter().any(|&(i, _)| i == *p)).map(|(_, d)| d))
                        .chain(t2.ds.iter())
                        .all(|i| universe.contains(i));
                    if survivors_in {
                        for c in contracted {
                            if !universe.contains(c) && !hits.contains(c) {
                                hits.push(c.clone());
                            }
                        }
                    }
                }
            }
        }
    }
    hits.sort();
    hits
}

impl fmt::Debug for QuadHam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.constant.is_zero() {
            parts.push(self.constant.to_string());
        }
        if !self.hbar_constant.is_zero() {
            parts.push(format!("{}*h", self.hbar_constant));
        }
        for (i, c) in &self.linear_x {
            parts.push(format!("{c}*x{i}"));
        }
        for (i, c) in &self.linear_y {
            parts.push(format!("{c}*y{i}"));
        }
        for (k, c) in self.quad_xx.iter() {
            parts.push(format!("{c}*x{}x{}", k[0], k[1]));
        }
        for ((j, k), c) in &self.quad_xy {
            parts.push(format!("{c}*x{j}y{k}"));
        }
        for (k, c) in self.quad_yy.iter() {
            parts.push(format!("{c}*y{}y{}", k[0], k[1]));
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    fn p(n: u32) -> Idx {
        Idx::plain(n)
    }

    #[test]
    fn canonical_pair_bracket() {
        // {y_1, x^1} = 1
        let h1 = QuadHam::y(p(1), rat!(1));
        let h2 = QuadHam::x(p(1), rat!(1));
        let b = poisson_bracket(&h1, &h2);
        assert_eq!(b.constant, rat!(1));
        assert!(b.linear_x.is_empty() && b.linear_y.is_empty());
        // [hbar d_1, x^1]/hbar = 1 as well
        let w = weyl_bracket(&h1, &h2);
        assert_eq!(w.constant, rat!(1));
        assert!(w.hbar_constant.is_zero());
    }

    #[test]
    fn antisymmetry() {
        let mut h = QuadHam::y(p(1), rat!(-1));
        h.add_xy(&p(2), &p(1), &rat!(2));
        assert!(poisson_bracket(&h, &h).is_zero());
        assert!(weyl_bracket(&h, &h).is_zero());
    }

    #[test]
    fn leibniz_example() {
        // {-y_1 + 2 x^2 y_1, -y_2} = 2 y_1
        let mut h1 = QuadHam::y(p(1), rat!(-1));
        h1.add_xy(&p(2), &p(1), &rat!(2));
        let h2 = QuadHam::y(p(2), rat!(-1));
        let b = poisson_bracket(&h1, &h2);
        assert_eq!(b, QuadHam::y(p(1), rat!(2)));
    }

    #[test]
    fn double_contraction_example() {
        // [hbar^2 d_1 d_1, x^1 x^1]/hbar = 4 x^1 hbar d_1 + 2 hbar
        let mut h1 = QuadHam::zero();
        h1.quad_yy.set(&[p(1), p(1)], rat!(1));
        let mut h2 = QuadHam::zero();
        h2.quad_xx.set(&[p(1), p(1)], rat!(1));
        let w = weyl_bracket(&h1, &h2);
        assert_eq!(w.quad_xy.get(&(p(1), p(1))), Some(&rat!(4)));
        assert_eq!(w.hbar_constant, rat!(2));
        assert!(w.constant.is_zero() && w.quad_xx.is_zero() && w.quad_yy.is_zero());
        // classical limit drops only the hbar slot
        let c = poisson_bracket(&h1, &h2);
        assert_eq!(c.quad_xy.get(&(p(1), p(1))), Some(&rat!(4)));
        assert!(c.hbar_constant.is_zero());
    }

    #[test]
    fn boundary_contraction_detection() {
        use std::collections::BTreeSet;
        let universe: BTreeSet<Idx> = (1..=5).map(p).collect();
        // x_6 y_4 against x_4 y_6 contracts over 6 and lands on x_4 y_4.
        let mut h1 = QuadHam::zero();
        h1.add_xy(&p(6), &p(4), &rat!(3));
        let mut h2 = QuadHam::zero();
        h2.add_xy(&p(4), &p(6), &rat!(2));
        let hits = boundary_contractions(&h1, &h2, &universe);
        assert_eq!(hits, vec![p(6)]);
        // in-window pair: no event
        let mut h3 = QuadHam::zero();
        h3.add_xy(&p(4), &p(2), &rat!(1));
        assert!(boundary_contractions(&h1, &h3, &universe).is_empty());
    }
}
