use std::fmt;
use std::ops;
use std::sync::Arc;

use num::{BigInt, One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::UltraError;
use crate::rational::Rational;

/// A closed-form exact-rational sequence `⟨u_n⟩`.
///
/// Children are reference counted, so cloning and combining expressions is
/// cheap and values can be shared freely between threads.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SequenceExpr {
    Const(Rational),
    /// The index variable `n`.
    Index,
    Add(Arc<SequenceExpr>, Arc<SequenceExpr>),
    Sub(Arc<SequenceExpr>, Arc<SequenceExpr>),
    Mul(Arc<SequenceExpr>, Arc<SequenceExpr>),
    Div(Arc<SequenceExpr>, Arc<SequenceExpr>),
    Neg(Arc<SequenceExpr>),
    Pow(Arc<SequenceExpr>, i32),
    /// `per[a_0, …, a_{p-1}]`: the value at `n` is `a_{n mod p}`.
    Periodic(Vec<Rational>),
    /// `prefix[a_0, …; tail]`: the listed values at `n < len`, `tail(n)` after.
    Prefix(Vec<Rational>, Arc<SequenceExpr>),
    /// `ifmod(m, r; a; b)`: `a(n)` when `n ≡ r (mod m)`, else `b(n)`.
    IfMod {
        modulus: u64,
        residue: u64,
        then: Arc<SequenceExpr>,
        otherwise: Arc<SequenceExpr>,
    },
    /// Seeded pseudorandom rationals in `[lo, hi]`.
    Rand { seed: u64, lo: Rational, hi: Rational },
    /// `inv(e)`: `1/e_n` where `e_n ≠ 0`, and `0` where `e_n = 0`.
    Inv(Arc<SequenceExpr>),
}

use SequenceExpr::*;

impl SequenceExpr {
    pub fn constant(q: Rational) -> Self {
        Const(q)
    }

    pub fn int(v: i64) -> Self {
        Const(crate::rational::int(v))
    }

    pub fn index() -> Self {
        Index
    }

    pub fn periodic(values: Vec<Rational>) -> Self {
        assert!(!values.is_empty(), "periodic pattern needs at least one value");
        Periodic(values)
    }

    pub fn prefix(values: Vec<Rational>, tail: SequenceExpr) -> Self {
        Prefix(values, Arc::new(tail))
    }

    pub fn if_mod(modulus: u64, residue: u64, then: SequenceExpr, otherwise: SequenceExpr) -> Self {
        assert!(modulus >= 1 && residue < modulus, "residue must lie below the modulus");
        IfMod {
            modulus,
            residue,
            then: Arc::new(then),
            otherwise: Arc::new(otherwise),
        }
    }

    pub fn rand(seed: u64, lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "rand range must satisfy lo <= hi");
        Rand { seed, lo, hi }
    }

    pub fn pow(self, exponent: i32) -> Self {
        Pow(Arc::new(self), exponent)
    }

    pub fn inv(self) -> Self {
        Inv(Arc::new(self))
    }

    /// The exact value of the `n`-th term.
    pub fn eval(&self, n: u64) -> Result<Rational, UltraError> {
        Ok(match self {
            Const(q) => q.clone(),
            Index => Rational::from_integer(BigInt::from(n)),
            Add(a, b) => a.eval(n)? + b.eval(n)?,
            Sub(a, b) => a.eval(n)? - b.eval(n)?,
            Mul(a, b) => a.eval(n)? * b.eval(n)?,
            Div(a, b) => {
                let num = a.eval(n)?;
                let den = b.eval(n)?;
                if den.is_zero() {
                    return Err(UltraError::UndefinedAtIndex { index: n });
                }
                num / den
            }
            Neg(a) => -a.eval(n)?,
            Pow(a, k) => {
                let base = a.eval(n)?;
                if *k < 0 && base.is_zero() {
                    return Err(UltraError::UndefinedAtIndex { index: n });
                }
                num::traits::Pow::pow(&base, *k)
            }
            Periodic(values) => values[(n % values.len() as u64) as usize].clone(),
            Prefix(values, tail) => match values.get(n as usize) {
                Some(v) => v.clone(),
                None => tail.eval(n)?,
            },
            IfMod {
                modulus,
                residue,
                then,
                otherwise,
            } => {
                if n % modulus == *residue {
                    then.eval(n)?
                } else {
                    otherwise.eval(n)?
                }
            }
            Rand { seed, lo, hi } => rand_term(*seed, lo, hi, n),
            Inv(a) => {
                let v = a.eval(n)?;
                if v.is_zero() {
                    v
                } else {
                    v.recip()
                }
            }
        })
    }

    /// True when the expression contains no pseudorandom node, i.e. it lies
    /// in the fragment whose sign sets are computed exactly.
    pub fn is_tame_syntax(&self) -> bool {
        match self {
            Const(_) | Index | Periodic(_) => true,
            Rand { .. } => false,
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.is_tame_syntax() && b.is_tame_syntax(),
            Neg(a) | Pow(a, _) | Inv(a) | Prefix(_, a) => a.is_tame_syntax(),
            IfMod { then, otherwise, .. } => then.is_tame_syntax() && otherwise.is_tame_syntax(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Add(..) | Sub(..) => 1,
            Mul(..) | Div(..) => 2,
            Const(q) if q.is_integer() && !q.is_negative() => 5,
            Const(_) => 2,
            Neg(_) => 3,
            Pow(..) => 4,
            _ => 5,
        }
    }
}

fn rand_term(seed: u64, lo: &Rational, hi: &Rational, n: u64) -> Rational {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(n));
    let draw = Rational::new(BigInt::from(rng.next_u32()), BigInt::one() << 32);
    lo + (hi - lo) * draw
}

struct Wrapped<'a>(&'a SequenceExpr, u8);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.precedence() < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, values: &[Rational]) -> fmt::Result {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

impl fmt::Display for SequenceExpr {
    /// Prints in the sequence DSL. Output of the parser prints back to text
    /// that parses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(q) => write!(f, "{q}"),
            Index => f.write_str("n"),
            Add(a, b) => write!(f, "{} + {}", Wrapped(a, 1), Wrapped(b, 2)),
            Sub(a, b) => write!(f, "{} - {}", Wrapped(a, 1), Wrapped(b, 2)),
            Mul(a, b) => write!(f, "{} * {}", Wrapped(a, 2), Wrapped(b, 3)),
            Div(a, b) => write!(f, "{} / {}", Wrapped(a, 2), Wrapped(b, 3)),
            Neg(a) => write!(f, "-{}", Wrapped(a, 3)),
            Pow(a, k) => write!(f, "{}^{k}", Wrapped(a, 5)),
            Periodic(values) => {
                f.write_str("per[")?;
                write_list(f, values)?;
                f.write_str("]")
            }
            Prefix(values, tail) => {
                f.write_str("prefix[")?;
                write_list(f, values)?;
                write!(f, "; {tail}]")
            }
            IfMod {
                modulus,
                residue,
                then,
                otherwise,
            } => write!(f, "ifmod({modulus},{residue}; {then}; {otherwise})"),
            Rand { seed, lo, hi } => write!(f, "rand({seed}, {lo}, {hi})"),
            Inv(a) => write!(f, "inv({a})"),
        }
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for SequenceExpr {
            type Output = SequenceExpr;
            fn $method(self, rhs: SequenceExpr) -> SequenceExpr {
                $variant(Arc::new(self), Arc::new(rhs))
            }
        }

        impl ops::$trait<&SequenceExpr> for &SequenceExpr {
            type Output = SequenceExpr;
            fn $method(self, rhs: &SequenceExpr) -> SequenceExpr {
                $variant(Arc::new(self.clone()), Arc::new(rhs.clone()))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl ops::Neg for SequenceExpr {
    type Output = SequenceExpr;
    fn neg(self) -> SequenceExpr {
        Neg(Arc::new(self))
    }
}

impl From<Rational> for SequenceExpr {
    fn from(q: Rational) -> Self {
        Const(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn n() -> SequenceExpr {
        SequenceExpr::index()
    }

    fn c(v: i64) -> SequenceExpr {
        SequenceExpr::int(v)
    }

    #[test]
    fn evaluation_examples() {
        let e = c(1) / (n() + c(1));
        assert_eq!(e.eval(3), Ok(ratio(1, 4)));
        let alt = SequenceExpr::periodic(vec![int(1), int(-1)]);
        assert_eq!(alt.eval(7), Ok(int(-1)));
        let e = (c(2) * n().pow(2) + c(1)) / (n().pow(2) + c(3));
        // 2·25 + 1 = 51 over 25 + 3 = 28.
        assert_eq!(e.eval(5), Ok(ratio(51, 28)));
    }

    #[test]
    fn undefined_terms() {
        let e = c(1) / (n() - c(3));
        assert_eq!(e.eval(3), Err(UltraError::UndefinedAtIndex { index: 3 }));
        assert_eq!(e.eval(4), Ok(int(1)));
        let p = (n() - c(2)).pow(-1);
        assert_eq!(p.eval(2), Err(UltraError::UndefinedAtIndex { index: 2 }));
        assert_eq!(p.eval(4), Ok(ratio(1, 2)));
    }

    #[test]
    fn inverse_node_maps_zero_to_zero() {
        let u = SequenceExpr::prefix(vec![int(0); 5], c(2));
        let i = u.clone().inv();
        assert_eq!(i.eval(2), Ok(int(0)));
        assert_eq!(i.eval(9), Ok(ratio(1, 2)));
    }

    #[test]
    fn pseudorandom_terms_are_reproducible_and_bounded() {
        let e = SequenceExpr::rand(7, int(-1), int(2));
        for k in 0..200 {
            let v = e.eval(k).unwrap();
            assert!(v >= int(-1) && v <= int(2));
            assert_eq!(e.eval(k), Ok(v));
        }
        assert_ne!(e.eval(0), e.eval(1));
        assert!(!e.is_tame_syntax());
    }

    #[test]
    fn branch_and_prefix_nodes() {
        let e = SequenceExpr::if_mod(3, 1, n(), -n());
        assert_eq!(e.eval(4), Ok(int(4)));
        assert_eq!(e.eval(5), Ok(int(-5)));
        let p = SequenceExpr::prefix(vec![int(5); 4], n());
        let terms: Vec<_> = (0..7).map(|k| p.eval(k).unwrap()).collect();
        assert_eq!(terms, [5, 5, 5, 5, 4, 5, 6].map(int));
    }

    #[test]
    fn display_is_minimal() {
        let e = SequenceExpr::periodic(vec![int(1), int(-1)]) * (c(1) + c(1) / (n() + c(1)));
        assert_eq!(e.to_string(), "per[1,-1] * (1 + 1 / (n + 1))");
        assert_eq!((n() - (n() - c(1))).to_string(), "n - (n - 1)");
        assert_eq!((-(n().pow(2))).to_string(), "-n^2");
        assert_eq!(SequenceExpr::constant(ratio(-3, 4)).pow(2).to_string(), "(-3/4)^2");
    }
}
