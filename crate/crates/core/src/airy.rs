//! Airy structures: the tensor quadruple (A, B, C, eps), constraint
//! verification, gauge transformations, canonical quantization, substructures
//! and direct sums.
//!
//! Tensor conventions, fixed once for the whole crate. The Hamiltonian
//! attached to index `i` is
//!
//! ```text
//! H_i = -y_i + sum_{jk} a_{ijk} x_j x_k + 2 sum_{jk} b_{ij}^k x_j y_k
//!       + sum_{jk} c_i^{jk} y_j y_k            (+ hbar eps_i when quantum)
//! ```
//!
//! so B acts as `e_k -> sum_{ij} b_{ij}^k e_i (x) e_j` (first slot the
//! Hamiltonian index, second the x-index) and C as
//! `e_j (x) e_k -> sum_i c_i^{jk} e_i`.
//!
//! Truncations of graded infinite structures keep a *shell*: stored entries
//! with exactly one index outside the universe. The constraint checker uses
//! the shell to tell a genuine residual from an artifact of truncation; a
//! pair whose bracket touches the shell is reported as a closure violation,
//! not as a residual.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ham::{boundary_contractions, poisson_bracket, QuadHam};
use crate::idx::Idx;
use crate::rat::Rat;
use crate::tensor::{symmetrize, SymTensor};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StructureKind {
    Classical,
    Quantum,
    PreClassical,
    PreQuantum,
}

impl StructureKind {
    pub fn is_quantum(self) -> bool {
        matches!(self, StructureKind::Quantum | StructureKind::PreQuantum)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StructureKind::Classical => "classical",
            StructureKind::Quantum => "quantum",
            StructureKind::PreClassical => "pre-classical",
            StructureKind::PreQuantum => "pre-quantum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "classical" => StructureKind::Classical,
            "quantum" => StructureKind::Quantum,
            "pre-classical" => StructureKind::PreClassical,
            "pre-quantum" => StructureKind::PreQuantum,
            _ => None,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AiryError {
    #[error("index {0} outside the universe")]
    IndexOutsideUniverse(Idx),
    #[error("trace of B not computable within the universe")]
    TraceNotComputable,
    #[error("restriction is not closed: entry for {hamiltonian} reaches {outside}")]
    RestrictionNotClosed { hamiltonian: Idx, outside: Idx },
    #[error("universes of summands overlap at {0}")]
    UniverseOverlap(Idx),
    #[error("summands have different kinds")]
    KindMismatch,
}

/// The tensor quadruple of a (pre-)Airy structure on a truncated basis.
///
/// `b` is keyed by `(i, j, k)` carrying `b_{ij}^k`; `c` by `(i, j, k)` with
/// `j <= k` carrying `c_i^{jk}`. Entries may have at most one index outside
/// `universe` (the truncation shell); the Hamiltonian index `i` is always
/// inside.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AiryData {
    pub universe: BTreeSet<Idx>,
    pub a: SymTensor,
    pub b: BTreeMap<(Idx, Idx, Idx), Rat>,
    pub c: BTreeMap<(Idx, Idx, Idx), Rat>,
    pub eps: BTreeMap<Idx, Rat>,
    pub kind: StructureKind,
}

impl AiryData {
    pub fn new(universe: impl IntoIterator<Item = Idx>, kind: StructureKind) -> Self {
        AiryData {
            universe: universe.into_iter().collect(),
            a: SymTensor::zero(3),
            b: BTreeMap::new(),
            c: BTreeMap::new(),
            eps: BTreeMap::new(),
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.universe.len()
    }

    pub fn set_a(&mut self, i: &Idx, j: &Idx, k: &Idx, v: Rat) {
        self.a.set(&[i.clone(), j.clone(), k.clone()], v);
    }

    pub fn add_b(&mut self, i: &Idx, j: &Idx, k: &Idx, v: &Rat) {
        if v.is_zero() {
            return;
        }
        let key = (i.clone(), j.clone(), k.clone());
        let e = self.b.entry(key).or_insert_with(Rat::zero);
        *e += v;
        if e.is_zero() {
            self.b.remove(&(i.clone(), j.clone(), k.clone()));
        }
    }

    pub fn add_c(&mut self, i: &Idx, j: &Idx, k: &Idx, v: &Rat) {
        if v.is_zero() {
            return;
        }
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        let key = (i.clone(), j.clone(), k.clone());
        let e = self.c.entry(key).or_insert_with(Rat::zero);
        *e += v;
        if e.is_zero() {
            self.c.remove(&(i.clone(), j.clone(), k.clone()));
        }
    }

    pub fn add_eps(&mut self, i: &Idx, v: &Rat) {
        if v.is_zero() {
            return;
        }
        let e = self.eps.entry(i.clone()).or_insert_with(Rat::zero);
        *e += v;
        if e.is_zero() {
            self.eps.remove(i);
        }
    }

    pub fn b_get(&self, i: &Idx, j: &Idx, k: &Idx) -> Rat {
        self.b
            .get(&(i.clone(), j.clone(), k.clone()))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    pub fn c_get(&self, i: &Idx, j: &Idx, k: &Idx) -> Rat {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        self.c
            .get(&(i.clone(), j.clone(), k.clone()))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    pub fn eps_get(&self, i: &Idx) -> Rat {
        self.eps.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    /// True if the structure stores no shell entries, i.e. every stored index
    /// lies in the universe.
    pub fn is_complete(&self) -> bool {
        self.a.support().all(|i| self.universe.contains(i))
            && self
                .b
                .keys()
                .all(|(i, j, k)| [i, j, k].into_iter().all(|x| self.universe.contains(x)))
            && self
                .c
                .keys()
                .all(|(i, j, k)| [i, j, k].into_iter().all(|x| self.universe.contains(x)))
            && self.eps.keys().all(|i| self.universe.contains(i))
    }

    /// Drop every entry with an index outside the universe.
    pub fn without_shell(&self) -> AiryData {
        let in_u = |i: &Idx| self.universe.contains(i);
        AiryData {
            universe: self.universe.clone(),
            a: {
                let mut t = SymTensor::zero(3);
                for (k, v) in self.a.iter() {
                    if k.iter().all(in_u) {
                        t.set(k, v.clone());
                    }
                }
                t
            },
            b: self
                .b
                .iter()
                .filter(|((i, j, k), _)| in_u(i) && in_u(j) && in_u(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            c: self
                .c
                .iter()
                .filter(|((i, j, k), _)| in_u(i) && in_u(j) && in_u(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            eps: self
                .eps
                .iter()
                .filter(|(i, _)| in_u(i))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            kind: self.kind,
        }
    }

    /// Give every index of the structure the same label.
    pub fn relabel(&self, label: &str) -> AiryData {
        let m = |i: &Idx| Idx::labeled(label, i.n);
        AiryData {
            universe: self.universe.iter().map(&m).collect(),
            a: {
                let mut t = SymTensor::zero(3);
                for (k, v) in self.a.iter() {
                    let key: Vec<Idx> = k.iter().map(&m).collect();
                    t.set(&key, v.clone());
                }
                t
            },
            b: self
                .b
                .iter()
                .map(|((i, j, k), v)| ((m(i), m(j), m(k)), v.clone()))
                .collect(),
            c: self
                .c
                .iter()
                .map(|((i, j, k), v)| ((m(i), m(j), m(k)), v.clone()))
                .collect(),
            eps: self.eps.iter().map(|(i, v)| (m(i), v.clone())).collect(),
            kind: self.kind,
        }
    }

    fn hamiltonian_inner(&self, i: &Idx, include_shell: bool) -> QuadHam {
        let in_u = |x: &Idx| self.universe.contains(x);
        let keep = |xs: &[&Idx]| include_shell || xs.iter().all(|x| in_u(x));
        let mut h = QuadHam::zero();
        h.add_y(i, &-Rat::one());
        for (key, v) in self.a.iter() {
            // fiber over i: each a-entry whose key contains i contributes a
            // rank-2 entry at the remaining pair
            let Some(pos) = key.iter().position(|x| x == i) else {
                continue;
            };
            let mut rest = key.clone();
            rest.remove(pos);
            if keep(&[&rest[0], &rest[1]]) {
                h.quad_xx.add_to(&rest, v);
                // overwrite duplicates: add_to accumulates, so remove again
                // if the same sorted pair shows up from another position of i
                // -- it cannot, positions of equal values give the same pair
                // exactly once because we take the first position only.
            }
        }
        for ((hi, j, k), v) in &self.b {
            if hi == i && keep(&[j, k]) {
                h.add_xy(j, k, &(v * &Rat::from_int(2)));
            }
        }
        for ((hi, j, k), v) in &self.c {
            if hi == i && keep(&[j, k]) {
                h.quad_yy.add_to(&[j.clone(), k.clone()], v);
            }
        }
        if self.kind.is_quantum() {
            h.hbar_constant = self.eps_get(i);
        }
        h
    }

    /// The Hamiltonian of index `i`, truncated to the universe.
    pub fn hamiltonian_of(&self, i: &Idx) -> Result<QuadHam, AiryError> {
        if !self.universe.contains(i) {
            return Err(AiryError::IndexOutsideUniverse(i.clone()));
        }
        Ok(self.hamiltonian_inner(i, false))
    }

    /// Structure constants `g_{i1,i2}^k = 2 (b_{i2 i1}^k - b_{i1 i2}^k)`,
    /// over every stored k including the shell.
    pub fn structure_constants(&self, i1: &Idx, i2: &Idx) -> BTreeMap<Idx, Rat> {
        let mut g = BTreeMap::new();
        let two = Rat::from_int(2);
        for ((i, j, k), v) in &self.b {
            if i == i2 && j == i1 {
                let e = g.entry(k.clone()).or_insert_with(Rat::zero);
                *e += &(&two * v);
            }
            if i == i1 && j == i2 {
                let e = g.entry(k.clone()).or_insert_with(Rat::zero);
                *e -= &(&two * v);
            }
        }
        g.retain(|_, v| !v.is_zero());
        g
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ResidualFamily {
    XX,
    XY,
    YY,
    Hbar,
}

impl ResidualFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ResidualFamily::XX => "xx",
            ResidualFamily::XY => "xy",
            ResidualFamily::YY => "yy",
            ResidualFamily::Hbar => "hbar",
        }
    }
}

/// A nonzero coefficient of the constraint defect for one index pair.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConstraintResidual {
    pub family: ResidualFamily,
    pub pair: (Idx, Idx),
    pub witness: Option<(Idx, Idx)>,
    pub value: Rat,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ViolationKind {
    /// The bracket relation needs a Hamiltonian outside the universe.
    StructureConstants,
    /// The bracket contracts over an index outside the universe while the
    /// surviving factors stay inside, so in-universe coefficients cannot be
    /// trusted for this pair.
    BracketBoundary,
}

/// A constraint sum for one pair leaves the universe.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClosureViolation {
    pub pair: (Idx, Idx),
    pub kind: ViolationKind,
    pub missing: Vec<Idx>,
    /// True when every escaping index lies beyond the largest universe index
    /// of its label: the violation is an artifact of truncating a graded
    /// structure, not a failure of closure inside the window.
    pub boundary: bool,
}

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub residuals: Vec<ConstraintResidual>,
    pub violations: Vec<ClosureViolation>,
}

impl CheckReport {
    pub fn interior_violations(&self) -> impl Iterator<Item = &ClosureViolation> {
        self.violations.iter().filter(|v| !v.boundary)
    }

    /// No residuals and no interior closure violations.
    pub fn passes(&self) -> bool {
        self.residuals.is_empty() && self.interior_violations().next().is_none()
    }
}

fn max_n_per_label(universe: &BTreeSet<Idx>) -> BTreeMap<Option<String>, u32> {
    let mut m = BTreeMap::new();
    for i in universe {
        let e = m.entry(i.label.clone()).or_insert(0);
        *e = (*e).max(i.n);
    }
    m
}

fn classify_boundary(missing: &[Idx], max_n: &BTreeMap<Option<String>, u32>) -> bool {
    missing
        .iter()
        .all(|i| max_n.get(&i.label).is_some_and(|m| i.n > *m))
}

/// Verify the classical constraints: for every pair `i1 < i2` the defect
/// `{H_i1, H_i2} - sum_k g_{i1 i2}^k H_k` must vanish. Nonzero in-universe
/// coefficients are reported as residuals; pairs whose computation leaves the
/// universe are reported as closure violations instead.
pub fn check_classical(s: &AiryData) -> CheckReport {
    let mut report = CheckReport::default();
    let max_n = max_n_per_label(&s.universe);
    let idxs: Vec<Idx> = s.universe.iter().cloned().collect();
    let hams: BTreeMap<Idx, QuadHam> = idxs
        .iter()
        .map(|i| (i.clone(), s.hamiltonian_inner(i, true)))
        .collect();

    for (p, i1) in idxs.iter().enumerate() {
        for i2 in idxs.iter().skip(p + 1) {
            let g = s.structure_constants(i1, i2);
            let missing_g: Vec<Idx> = g
                .keys()
                .filter(|k| !s.universe.contains(*k))
                .cloned()
                .collect();
            let boundary_hits = boundary_contractions(&hams[i1], &hams[i2], &s.universe);
            let mut skip = false;
            if !missing_g.is_empty() {
                report.violations.push(ClosureViolation {
                    pair: (i1.clone(), i2.clone()),
                    kind: ViolationKind::StructureConstants,
                    boundary: classify_boundary(&missing_g, &max_n),
                    missing: missing_g,
                });
                skip = true;
            }
            if !boundary_hits.is_empty() {
                report.violations.push(ClosureViolation {
                    pair: (i1.clone(), i2.clone()),
                    kind: ViolationKind::BracketBoundary,
                    boundary: classify_boundary(&boundary_hits, &max_n),
                    missing: boundary_hits,
                });
                skip = true;
            }
            if skip {
                continue;
            }

            let mut delta = poisson_bracket(&hams[i1], &hams[i2]);
            for (k, gk) in &g {
                delta = delta.sub(&hams[k].scale(gk));
            }
            push_residuals(&mut report.residuals, s, i1, i2, &delta);
        }
    }
    report
}

fn push_residuals(
    out: &mut Vec<ConstraintResidual>,
    s: &AiryData,
    i1: &Idx,
    i2: &Idx,
    delta: &QuadHam,
) {
    let in_u = |i: &Idx| s.universe.contains(i);
    debug_assert!(delta.constant.is_zero());
    debug_assert!(delta.linear_x.keys().filter(|i| in_u(i)).count() == 0);
    debug_assert!(delta.linear_y.keys().filter(|i| in_u(i)).count() == 0);
    for (key, v) in delta.quad_xx.iter() {
        if in_u(&key[0]) && in_u(&key[1]) {
            out.push(ConstraintResidual {
                family: ResidualFamily::XX,
                pair: (i1.clone(), i2.clone()),
                witness: Some((key[0].clone(), key[1].clone())),
                value: v.clone(),
            });
        }
    }
    for ((j, k), v) in &delta.quad_xy {
        if in_u(j) && in_u(k) {
            out.push(ConstraintResidual {
                family: ResidualFamily::XY,
                pair: (i1.clone(), i2.clone()),
                witness: Some((j.clone(), k.clone())),
                value: v.clone(),
            });
        }
    }
    for (key, v) in delta.quad_yy.iter() {
        if in_u(&key[0]) && in_u(&key[1]) {
            out.push(ConstraintResidual {
                family: ResidualFamily::YY,
                pair: (i1.clone(), i2.clone()),
                witness: Some((key[0].clone(), key[1].clone())),
                value: v.clone(),
            });
        }
    }
}

/// Verify the quantum constraints: the classical ones plus, for every pair,
/// `2 sum_{jk} (c_{i1}^{jk} a_{i2 jk} - c_{i2}^{jk} a_{i1 jk})
///  = sum_k g_{i1 i2}^k eps_k`.
/// The scalar identity is closed under truncation (A and eps are stored in
/// full), so it is checked for all pairs, including boundary ones.
pub fn check_quantum(s: &AiryData) -> CheckReport {
    assert!(
        s.kind.is_quantum(),
        "quantum check requires a quantum or pre-quantum structure"
    );
    let mut report = check_classical(s);
    let idxs: Vec<Idx> = s.universe.iter().cloned().collect();
    for (p, i1) in idxs.iter().enumerate() {
        for i2 in idxs.iter().skip(p + 1) {
            let lhs = eps_constraint_lhs(s, i1, i2);
            let mut rhs = Rat::zero();
            for (k, gk) in s.structure_constants(i1, i2) {
                rhs += gk * s.eps_get(&k);
            }
            let value = lhs - rhs;
            if !value.is_zero() {
                report.residuals.push(ConstraintResidual {
                    family: ResidualFamily::Hbar,
                    pair: (i1.clone(), i2.clone()),
                    witness: None,
                    value,
                });
            }
        }
    }
    report
}

fn eps_constraint_lhs(s: &AiryData, i1: &Idx, i2: &Idx) -> Rat {
    let two = Rat::from_int(2);
    let mut lhs = Rat::zero();
    for ((i, j, k), v) in &s.c {
        let mult = if j == k { Rat::one() } else { two.clone() };
        if i == i1 {
            lhs += &two * &mult * v * s.a.get(&[i2.clone(), j.clone(), k.clone()]);
        }
        if i == i2 {
            lhs -= &two * &mult * v * s.a.get(&[i1.clone(), j.clone(), k.clone()]);
        }
    }
    lhs
}

/// Gauge change by a symmetric bilinear form supported on the universe:
/// A is untouched, `b_{ij}^k += sum_l a_{ijl} s^{lk}`,
/// `c_i^{jk} += sum_{l1 l2} a_{i l1 l2} s^{l1 j} s^{l2 k}
///            + sum_l b_{il}^k s^{lj} + sum_l b_{il}^j s^{lk}`,
/// `eps_i += sum_{jk} a_{ijk} s^{jk}`.
pub fn gauge_transform(s: &AiryData, gauge: &SymTensor) -> AiryData {
    assert_eq!(gauge.rank(), 2, "gauge must be a rank-2 symmetric tensor");
    for i in gauge.support() {
        assert!(
            s.universe.contains(i),
            "gauge index {i} outside the universe"
        );
    }
    let mut out = s.clone();

    // ordered s-entries (l, k, value)
    let mut s_entries: Vec<(Idx, Idx, Rat)> = Vec::new();
    for (key, v) in gauge.iter() {
        s_entries.push((key[0].clone(), key[1].clone(), v.clone()));
        if key[0] != key[1] {
            s_entries.push((key[1].clone(), key[0].clone(), v.clone()));
        }
    }

    // distinct ordered (i, j, l) splittings of each A key
    let ordered_triples = |key: &Vec<Idx>| -> Vec<(Idx, Idx, Idx)> {
        let mut seen = Vec::new();
        for p0 in 0..3 {
            for p1 in 0..3 {
                if p1 == p0 {
                    continue;
                }
                let p2 = 3 - p0 - p1;
                let t = (key[p0].clone(), key[p1].clone(), key[p2].clone());
                if !seen.contains(&t) {
                    seen.push(t);
                }
            }
        }
        seen
    };

    // b gains a.s ; eps gains a:s
    for (key, v) in s.a.iter() {
        for (i, j, l) in ordered_triples(key) {
            for (sl, sk, sv) in &s_entries {
                if *sl == l {
                    out.add_b(&i, &j, sk, &(v * sv));
                }
            }
            // eps: i distinguished, (j,l) contracted with s
            out.add_eps(&i, &(v * &gauge.get(&[j.clone(), l.clone()])));
        }
    }

    // c gains a.s.s + b.s (both orientations); collect ordered contributions
    // per Hamiltonian index, then fold symmetrically.
    let mut raw_c: BTreeMap<Idx, Vec<(Vec<Idx>, Rat)>> = BTreeMap::new();
    for (key, v) in s.a.iter() {
        for (i, l1, l2) in ordered_triples(key) {
            for (sl1, sj, sv1) in &s_entries {
                if *sl1 != l1 {
                    continue;
                }
                for (sl2, sk, sv2) in &s_entries {
                    if *sl2 != l2 {
                        continue;
                    }
                    raw_c
                        .entry(i.clone())
                        .or_default()
                        .push((vec![sj.clone(), sk.clone()], v * sv1 * sv2));
                }
            }
        }
    }
    for ((i, l, k), v) in &s.b {
        for (sl, sj, sv) in &s_entries {
            if sl == l {
                // term sum_l b_{il}^k s^{lj} at ordered (j, k)
                raw_c
                    .entry(i.clone())
                    .or_default()
                    .push((vec![sj.clone(), k.clone()], v * sv));
                // term sum_l b_{il}^j s^{lk} at ordered (k', j') = transpose
                raw_c
                    .entry(i.clone())
                    .or_default()
                    .push((vec![k.clone(), sj.clone()], v * sv));
            }
        }
    }
    for (i, raw) in raw_c {
        let fiber = symmetrize(2, raw);
        for (key, v) in fiber.iter() {
            out.add_c(&i, &key[0], &key[1], v);
        }
    }
    out
}

/// The canonical quantization vector `eps_i = sum_j b_{ij}^j`. Defined only
/// for complete structures: on a truncation the trace may keep growing past
/// the window, so it is refused outright.
pub fn canonical_epsilon(s: &AiryData) -> Result<BTreeMap<Idx, Rat>, AiryError> {
    if !s.is_complete() {
        return Err(AiryError::TraceNotComputable);
    }
    let mut eps: BTreeMap<Idx, Rat> = BTreeMap::new();
    for ((i, j, k), v) in &s.b {
        if j == k {
            let e = eps.entry(i.clone()).or_insert_with(Rat::zero);
            *e += v;
        }
    }
    eps.retain(|_, v| !v.is_zero());
    Ok(eps)
}

/// The smallest coordinate subset containing the supports of A and eps and
/// closed under the images of B and C, together with the restricted
/// structure. Entries reaching outside the parent universe are kept: they
/// are the truncation shell of the substructure.
pub fn primitive_substructure(s: &AiryData) -> (BTreeSet<Idx>, AiryData) {
    let mut subset: BTreeSet<Idx> = BTreeSet::new();
    for i in s.a.support() {
        if s.universe.contains(i) {
            subset.insert(i.clone());
        }
    }
    for i in s.eps.keys() {
        if s.universe.contains(i) {
            subset.insert(i.clone());
        }
    }
    loop {
        let mut grew = false;
        // B(e_k) lands on (i, j): k in subset pulls i and j in
        for ((i, j, k), _) in &s.b {
            if subset.contains(k) {
                for t in [i, j] {
                    if s.universe.contains(t) && subset.insert(t.clone()) {
                        grew = true;
                    }
                }
            }
        }
        // C(e_j (x) e_k) lands on i
        for ((i, j, k), _) in &s.c {
            if subset.contains(j)
                && subset.contains(k)
                && s.universe.contains(i)
                && subset.insert(i.clone())
            {
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let restricted = restrict_to_subset(s, &subset);
    (subset, restricted)
}

/// Keep entries whose indices lie in `subset` or outside the parent universe
/// (shell); the universe becomes `subset`.
pub fn restrict_to_subset(s: &AiryData, subset: &BTreeSet<Idx>) -> AiryData {
    let keep = |i: &Idx| subset.contains(i) || !s.universe.contains(i);
    let mut out = AiryData::new(subset.iter().cloned(), s.kind);
    for (key, v) in s.a.iter() {
        if key.iter().all(|i| keep(i)) && key.iter().any(|i| subset.contains(i)) {
            out.a.set(key, v.clone());
        }
    }
    for ((i, j, k), v) in &s.b {
        if subset.contains(i) && keep(j) && keep(k) {
            out.b.insert((i.clone(), j.clone(), k.clone()), v.clone());
        }
    }
    for ((i, j, k), v) in &s.c {
        if subset.contains(i) && keep(j) && keep(k) {
            out.c.insert((i.clone(), j.clone(), k.clone()), v.clone());
        }
    }
    for (i, v) in &s.eps {
        if subset.contains(i) {
            out.eps.insert(i.clone(), v.clone());
        }
    }
    out
}

/// Block-diagonal sum of structures on disjoint universes.
pub fn direct_sum(parts: &[AiryData]) -> Result<AiryData, AiryError> {
    let kind = parts.first().map(|p| p.kind).unwrap_or(StructureKind::Quantum);
    if parts.iter().any(|p| p.kind != kind) {
        return Err(AiryError::KindMismatch);
    }
    let mut universe: BTreeSet<Idx> = BTreeSet::new();
    for p in parts {
        for i in &p.universe {
            if !universe.insert(i.clone()) {
                return Err(AiryError::UniverseOverlap(i.clone()));
            }
        }
    }
    let mut out = AiryData::new(universe, kind);
    for p in parts {
        for (key, v) in p.a.iter() {
            out.a.set(key, v.clone());
        }
        for (k, v) in &p.b {
            out.b.insert(k.clone(), v.clone());
        }
        for (k, v) in &p.c {
            out.c.insert(k.clone(), v.clone());
        }
        for (k, v) in &p.eps {
            out.eps.insert(k.clone(), v.clone());
        }
    }
    Ok(out)
}
