//! Formal Laurent series with explicit exactness windows.
//!
//! A `Laurent` stores finitely many coefficients together with a window
//! `[lo, hi]` of exponents on which the series is guaranteed exact.
//! Coefficients outside the window are unknown, never silently zero: reading
//! one is an error. Arithmetic narrows windows by the usual truncated-series
//! rules. Series built from finitely many known terms carry the full window.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::rat::Rat;

const INF: i64 = i64::MAX / 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WindowError {
    #[error("exponent {exp} outside exact window [{lo}, {hi}]")]
    Underflow { exp: i64, lo: i64, hi: i64 },
}

#[derive(Clone, PartialEq, Eq)]
pub struct Laurent {
    coeffs: BTreeMap<i64, Rat>,
    lo: i64,
    hi: i64,
}

impl Laurent {
    /// The zero series, exact everywhere.
    pub fn zero() -> Self {
        Laurent {
            coeffs: BTreeMap::new(),
            lo: -INF,
            hi: INF,
        }
    }

    /// `c * z^exp`, exact everywhere.
    pub fn monomial(exp: i64, c: Rat) -> Self {
        let mut s = Laurent::zero();
        s.add_coeff(exp, &c);
        s
    }

    /// Exact series from terms.
    pub fn from_terms(terms: impl IntoIterator<Item = (i64, Rat)>) -> Self {
        let mut s = Laurent::zero();
        for (e, c) in terms {
            s.add_coeff(e, &c);
        }
        s
    }

    /// Restrict the guaranteed-exact window.
    pub fn truncated(mut self, lo: i64, hi: i64) -> Self {
        self.lo = self.lo.max(lo);
        self.hi = self.hi.min(hi);
        self.coeffs.retain(|e, _| *e >= self.lo && *e <= self.hi);
        self
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn is_zero_on_window(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn add_coeff(&mut self, exp: i64, c: &Rat) {
        if c.is_zero() || exp < self.lo || exp > self.hi {
            return;
        }
        match self.coeffs.entry(exp) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// Coefficient of `z^exp`; errors when `exp` is outside the window.
    pub fn coeff(&self, exp: i64) -> Result<Rat, WindowError> {
        if exp < self.lo || exp > self.hi {
            return Err(WindowError::Underflow {
                exp,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.coeffs.get(&exp).cloned().unwrap_or_else(Rat::zero))
    }

    /// Coefficient of `z^{-1}` (the series read as the function multiplying
    /// `dz`); errors when the window excludes -1.
    pub fn residue(&self) -> Result<Rat, WindowError> {
        self.coeff(-1)
    }

    pub fn add(&self, other: &Laurent) -> Laurent {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        let mut out = Laurent {
            coeffs: BTreeMap::new(),
            lo,
            hi,
        };
        for (e, c) in &self.coeffs {
            out.add_coeff(*e, c);
        }
        for (e, c) in &other.coeffs {
            out.add_coeff(*e, c);
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> Laurent {
        Laurent {
            coeffs: if c.is_zero() {
                BTreeMap::new()
            } else {
                self.coeffs.iter().map(|(e, v)| (*e, v * c)).collect()
            },
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn neg(&self) -> Laurent {
        self.scale(&-Rat::one())
    }

    pub fn mul(&self, other: &Laurent) -> Laurent {
        // The product coefficient at e is complete only when every split
        // e = a + b with a nonzero unknown contribution is excluded:
        // window = [lo1+lo2, min(hi1+lo2, hi2+lo1)].
        let lo = sat_add(self.lo, other.lo);
        let hi = sat_add(self.hi, other.lo).min(sat_add(other.hi, self.lo));
        let mut out = Laurent {
            coeffs: BTreeMap::new(),
            lo,
            hi,
        };
        for (e1, c1) in &self.coeffs {
            for (e2, c2) in &other.coeffs {
                out.add_coeff(e1 + e2, &(c1 * c2));
            }
        }
        out
    }

    /// Substitute `z -> -z`.
    pub fn flip(&self) -> Laurent {
        Laurent {
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (*e, if e.rem_euclid(2) == 1 { -c } else { c.clone() }))
                .collect(),
            lo: self.lo,
            hi: self.hi,
        }
    }

    /// Multiply by `z^k`.
    pub fn shift(&self, k: i64) -> Laurent {
        Laurent {
            coeffs: self.coeffs.iter().map(|(e, c)| (e + k, c.clone())).collect(),
            lo: sat_add(self.lo, k),
            hi: sat_add(self.hi, k),
        }
    }

    /// Divide exactly by the monomial `c * z^k`.
    pub fn div_monomial(&self, k: i64, c: &Rat) -> Laurent {
        self.shift(-k).scale(&c.recip())
    }

    /// Antiderivative, defined when the residue vanishes (or is unknown but
    /// all stored terms miss exponent -1); the constant of integration is 0.
    pub fn antiderivative(&self) -> Result<Laurent, WindowError> {
        if !self.residue()?.is_zero() {
            // caller must ensure residue-freeness; surface as window-style error
            return Err(WindowError::Underflow {
                exp: -1,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(Laurent {
            coeffs: self
                .coeffs
                .iter()
                .map(|(e, c)| (e + 1, c / &Rat::from_int(e + 1)))
                .collect(),
            lo: sat_add(self.lo, 1),
            hi: sat_add(self.hi, 1),
        })
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &Rat)> {
        self.coeffs.iter()
    }
}

fn sat_add(a: i64, b: i64) -> i64 {
    (a + b).clamp(-INF, INF)
}

/// Antisymmetric pairing of residue-free 1-forms: the residue of
/// (antiderivative of the second argument) times the first. On the basis,
/// pairing of `z^{-n} dz/z` with `z^{n} dz/z` is `1/n`.
pub fn sympl_pairing(f: &Laurent, g: &Laurent) -> Result<Rat, WindowError> {
    let g_prim = g.antiderivative()?;
    g_prim.mul(f).residue()
}

impl fmt::Debug for Laurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = self
            .coeffs
            .iter()
            .map(|(e, c)| format!("{c}*z^{e}"))
            .collect::<Vec<_>>()
            .join(" + ");
        write!(
            f,
            "{} on [{}, {}]",
            if body.is_empty() { "0" } else { &body },
            self.lo,
            self.hi
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn residue_basics() {
        assert_eq!(Laurent::monomial(-1, rat!(1)).residue().unwrap(), rat!(1));
        assert_eq!(Laurent::monomial(3, rat!(1)).residue().unwrap(), rat!(0));
        let cut = Laurent::monomial(2, rat!(5)).truncated(0, 4);
        assert!(cut.residue().is_err());
    }

    #[test]
    fn window_narrows_under_mul() {
        let a = Laurent::monomial(0, rat!(1)).truncated(-2, 3);
        let b = Laurent::monomial(1, rat!(2)).truncated(-1, 5);
        let p = a.mul(&b);
        assert_eq!(p.window(), (-3, 2));
        assert_eq!(p.coeff(1).unwrap(), rat!(2));
        assert!(p.coeff(3).is_err());
    }

    #[test]
    fn pairing_normalization() {
        // < z^{-n} dz/z , z^{n} dz/z > = 1/n
        for n in 1..=4i64 {
            let f = Laurent::monomial(-n - 1, rat!(1));
            let g = Laurent::monomial(n - 1, rat!(1));
            assert_eq!(sympl_pairing(&f, &g).unwrap(), Rat::new(1, n));
            assert_eq!(sympl_pairing(&g, &f).unwrap(), Rat::new(-1, n));
        }
        // antisymmetry on a mixed form
        let f = Laurent::from_terms([(-3, rat!(2)), (1, rat!(5))]);
        let g = Laurent::from_terms([(2, rat!(7)), (-2, rat!(3))]);
        let a = sympl_pairing(&f, &g).unwrap();
        let b = sympl_pairing(&g, &f).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn pairing_examples() {
        // e_1 = z^{-2} dz against z^0 dz -> 1
        let e1 = Laurent::monomial(-2, rat!(1));
        let dual = Laurent::monomial(0, rat!(1));
        assert_eq!(sympl_pairing(&e1, &dual).unwrap(), rat!(1));
        // <f, f> = 0
        assert_eq!(sympl_pairing(&e1, &e1).unwrap(), rat!(0));
        // <z^{-3} dz, z^{1} dz> = 1/2
        let f = Laurent::monomial(-3, rat!(1));
        let g = Laurent::monomial(1, rat!(1));
        assert_eq!(sympl_pairing(&f, &g).unwrap(), rat!(1, 2));
    }

    #[test]
    fn flip_parity() {
        let f = Laurent::from_terms([(-2, rat!(1)), (3, rat!(4))]);
        let g = f.flip();
        assert_eq!(g.coeff(-2).unwrap(), rat!(1));
        assert_eq!(g.coeff(3).unwrap(), rat!(-4));
    }
}
