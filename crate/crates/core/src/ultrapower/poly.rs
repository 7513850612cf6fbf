//! Dense univariate polynomials over ℚ, just enough for eventual-sign
//! analysis of rational functions of `n`.

use std::ops::{Add, Mul, Neg, Sub};

use num::{BigInt, One, Zero};

use crate::rational::{sign, Rational};

/// Largest root-free threshold searched before giving up on exactness.
pub(crate) const THRESHOLD_LIMIT: u64 = 1 << 20;

/// Coefficients lowest degree first, without trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Poly(Vec<Rational>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(q: Rational) -> Self {
        Poly(vec![q]).trimmed()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn x() -> Self {
        Poly(vec![Rational::zero(), Rational::one()])
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn lead(&self) -> Option<&Rational> {
        self.0.last()
    }

    pub fn scale(&self, q: &Rational) -> Poly {
        Poly(self.0.iter().map(|c| c * q).collect()).trimmed()
    }

    #[cfg(test)]
    pub fn eval(&self, x: &Rational) -> Rational {
        self.0
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    #[cfg(test)]
    pub fn eval_at(&self, n: u64) -> Rational {
        self.eval(&Rational::from_integer(BigInt::from(n)))
    }

    /// `p(x + b)`, by Horner's rule over the shifted variable.
    pub fn shift(&self, b: &Rational) -> Poly {
        let step = Poly(vec![b.clone(), Rational::one()]).trimmed();
        self.0
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, c| &(&acc * &step) + &Poly::constant(c.clone()))
    }

    /// True when `p` has no root in `[b, ∞)`, certified by every coefficient
    /// of `p(x + b)` sharing the leading sign and a nonzero constant term.
    fn root_free_from(&self, b: u64) -> bool {
        let shifted = self.shift(&Rational::from_integer(BigInt::from(b)));
        let Some(lead) = shifted.lead() else {
            return false;
        };
        let s = sign(lead);
        !shifted.0[0].is_zero() && shifted.0.iter().all(|c| c.is_zero() || sign(c) == s)
    }

    /// Smallest `t` (up to the certificate) with no root of `p` in `[t, ∞)`.
    /// `None` when `p` is the zero polynomial or `t` would exceed
    /// [`THRESHOLD_LIMIT`].
    pub fn root_free_threshold(&self) -> Option<u64> {
        if self.is_zero() {
            return None;
        }
        if self.root_free_from(0) {
            return Some(0);
        }
        let mut hi = 1u64;
        while !self.root_free_from(hi) {
            hi *= 2;
            if hi > THRESHOLD_LIMIT {
                return None;
            }
        }
        let mut lo = hi / 2;
        // Invariant: root_free_from(hi), and lo is either 0 or fails.
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.root_free_from(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let len = self.0.len().max(rhs.0.len());
        let coeffs = (0..len)
            .map(|i| {
                let a = self.0.get(i).cloned().unwrap_or_else(Rational::zero);
                let b = rhs.0.get(i).cloned().unwrap_or_else(Rational::zero);
                a + b
            })
            .collect();
        Poly(coeffs).trimmed()
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![Rational::zero(); self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Poly(coeffs).trimmed()
    }
}
