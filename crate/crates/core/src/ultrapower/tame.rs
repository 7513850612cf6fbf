//! Exact sign analysis for the tame fragment.
//!
//! A tame expression is, beyond a finite prefix, a rational function of `n`
//! on each residue class of some modulus `M`. [`reduce`] computes that
//! piecewise form. Each class also carries the "critical" polynomials
//! (intermediate denominators, and arguments of `inv`) whose roots are the
//! only places where the expression can disagree with its reduced rational
//! function. Past the largest such root and past the prefix, the sign on each
//! class is the sign of the ratio of leading coefficients; below that point
//! terms are evaluated directly.

use num::integer::lcm;
use num::{One, Zero};

use super::expr::SequenceExpr;
use super::poly::Poly;
use crate::index_sets::ExactSet;
use crate::rational::{sign, Rational};

/// Moduli above this are handed to the sampled fallback.
const MODULUS_LIMIT: u64 = 10_000;

#[derive(Clone, Debug)]
pub(crate) enum ClassFn {
    /// Undefined at every large index of the class.
    Undefined,
    Rat {
        num: Poly,
        den: Poly,
        critical: Vec<Poly>,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct TameForm {
    pub modulus: u64,
    pub prefix: u64,
    pub classes: Vec<ClassFn>,
}

/// Behaviour of a class function as `n → ∞` along its class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Germ {
    Undefined,
    /// Diverges to `+∞` (`sign = 1`) or `−∞` (`sign = -1`).
    Infinite { sign: i8 },
    /// Tends to `limit`, eventually from the side `side` (0: equal to it).
    Finite { limit: Rational, side: i8 },
}

impl ClassFn {
    fn rat(num: Poly, den: Poly, critical: Vec<Poly>) -> ClassFn {
        // Keep the denominator monic so coefficients stay small.
        let lead = den.lead().expect("nonzero denominator").clone();
        if lead.is_one() {
            return ClassFn::Rat { num, den, critical };
        }
        let inv = lead.recip();
        ClassFn::Rat {
            num: num.scale(&inv),
            den: den.scale(&inv),
            critical,
        }
    }

    fn constant(q: Rational) -> ClassFn {
        ClassFn::Rat {
            num: Poly::constant(q),
            den: Poly::one(),
            critical: Vec::new(),
        }
    }

    fn merged_critical(a: &[Poly], b: &[Poly], extra: &[&Poly]) -> Vec<Poly> {
        let mut out: Vec<Poly> = Vec::with_capacity(a.len() + b.len() + extra.len());
        for p in a.iter().chain(b).chain(extra.iter().copied()) {
            if p.degree().unwrap_or(0) > 0 && !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }

    fn binary(&self, other: &ClassFn, op: BinOp) -> ClassFn {
        let (
            ClassFn::Rat { num: an, den: ad, critical: ac },
            ClassFn::Rat { num: bn, den: bd, critical: bc },
        ) = (self, other)
        else {
            return ClassFn::Undefined;
        };
        match op {
            BinOp::Add | BinOp::Sub => {
                let left = an * bd;
                let right = bn * ad;
                let num = if op == BinOp::Add { &left + &right } else { &left - &right };
                let crit = Self::merged_critical(ac, bc, &[ad, bd]);
                ClassFn::rat(num, ad * bd, crit)
            }
            BinOp::Mul => {
                let crit = Self::merged_critical(ac, bc, &[ad, bd]);
                ClassFn::rat(an * bn, ad * bd, crit)
            }
            BinOp::Div => {
                if bn.is_zero() {
                    return ClassFn::Undefined;
                }
                let crit = Self::merged_critical(ac, bc, &[ad, bd, bn]);
                ClassFn::rat(an * bd, ad * bn, crit)
            }
        }
    }

    fn negate(&self) -> ClassFn {
        match self {
            ClassFn::Undefined => ClassFn::Undefined,
            ClassFn::Rat { num, den, critical } => ClassFn::Rat {
                num: -num,
                den: den.clone(),
                critical: critical.clone(),
            },
        }
    }

    fn inverse_or_zero(&self) -> ClassFn {
        match self {
            ClassFn::Undefined => ClassFn::Undefined,
            ClassFn::Rat { num, den, critical } => {
                let crit = Self::merged_critical(critical, &[], &[den, num]);
                if num.is_zero() {
                    ClassFn::Rat { num: Poly::zero(), den: Poly::one(), critical: crit }
                } else {
                    ClassFn::rat(den.clone(), num.clone(), crit)
                }
            }
        }
    }

    fn power(&self, k: i32) -> ClassFn {
        let mut acc = match self {
            ClassFn::Undefined => return ClassFn::Undefined,
            ClassFn::Rat { den, critical, .. } => ClassFn::Rat {
                num: Poly::one(),
                den: Poly::one(),
                critical: Self::merged_critical(critical, &[], &[den]),
            },
        };
        for _ in 0..k.unsigned_abs() {
            acc = acc.binary(self, BinOp::Mul);
        }
        if k < 0 {
            ClassFn::constant(Rational::one()).binary(&acc, BinOp::Div)
        } else {
            acc
        }
    }

    /// First index from which the class function is defined, agrees with
    /// the expression, and has constant sign.
    fn threshold(&self) -> Option<u64> {
        match self {
            ClassFn::Undefined => Some(0),
            ClassFn::Rat { num, den, critical } => {
                let mut t = den.root_free_threshold()?;
                if !num.is_zero() {
                    t = t.max(num.root_free_threshold()?);
                }
                for p in critical {
                    t = t.max(p.root_free_threshold()?);
                }
                Some(t)
            }
        }
    }

    /// Eventual sign, `None` for an undefined class.
    fn eventual_sign(&self) -> Option<i8> {
        match self {
            ClassFn::Undefined => None,
            ClassFn::Rat { num, den, .. } => Some(match num.lead() {
                None => 0,
                Some(l) => sign(l) * sign(den.lead().expect("nonzero denominator")),
            }),
        }
    }

    pub fn germ(&self) -> Germ {
        let ClassFn::Rat { num, den, .. } = self else {
            return Germ::Undefined;
        };
        let Some(num_deg) = num.degree() else {
            return Germ::Finite { limit: Rational::zero(), side: 0 };
        };
        let den_deg = den.degree().expect("nonzero denominator");
        let den_lead = den.lead().expect("nonzero denominator");
        let ratio = num.lead().expect("nonzero numerator") / den_lead;
        if num_deg > den_deg {
            return Germ::Infinite { sign: sign(&ratio) };
        }
        if num_deg < den_deg {
            return Germ::Finite { limit: Rational::zero(), side: sign(&ratio) };
        }
        let rest = num - &den.scale(&ratio);
        let side = rest.lead().map_or(0, |l| sign(l) * sign(den_lead));
        Germ::Finite { limit: ratio, side }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl TameForm {
    fn uniform(class: ClassFn) -> TameForm {
        TameForm { modulus: 1, prefix: 0, classes: vec![class] }
    }

    fn lift(&self, modulus: u64) -> Vec<ClassFn> {
        (0..modulus)
            .map(|r| self.classes[(r % self.modulus) as usize].clone())
            .collect()
    }

    fn zip(a: &TameForm, b: &TameForm, f: impl Fn(&ClassFn, &ClassFn) -> ClassFn) -> Option<TameForm> {
        let modulus = lcm(a.modulus, b.modulus);
        if modulus > MODULUS_LIMIT {
            return None;
        }
        let classes = (0..modulus)
            .map(|r| {
                f(
                    &a.classes[(r % a.modulus) as usize],
                    &b.classes[(r % b.modulus) as usize],
                )
            })
            .collect();
        Some(TameForm { modulus, prefix: a.prefix.max(b.prefix), classes })
    }

    fn map(&self, f: impl Fn(&ClassFn) -> ClassFn) -> TameForm {
        TameForm {
            modulus: self.modulus,
            prefix: self.prefix,
            classes: self.classes.iter().map(f).collect(),
        }
    }

    pub fn class(&self, residue: u64) -> &ClassFn {
        &self.classes[(residue % self.modulus) as usize]
    }
}

/// Piecewise rational form of `e`, or `None` outside the tame fragment.
pub(crate) fn reduce(e: &SequenceExpr) -> Option<TameForm> {
    use SequenceExpr::*;
    Some(match e {
        Const(q) => TameForm::uniform(ClassFn::constant(q.clone())),
        Index => TameForm::uniform(ClassFn::Rat {
            num: Poly::x(),
            den: Poly::one(),
            critical: Vec::new(),
        }),
        Add(a, b) => TameForm::zip(&reduce(a)?, &reduce(b)?, |x, y| x.binary(y, BinOp::Add))?,
        Sub(a, b) => TameForm::zip(&reduce(a)?, &reduce(b)?, |x, y| x.binary(y, BinOp::Sub))?,
        Mul(a, b) => TameForm::zip(&reduce(a)?, &reduce(b)?, |x, y| x.binary(y, BinOp::Mul))?,
        Div(a, b) => TameForm::zip(&reduce(a)?, &reduce(b)?, |x, y| x.binary(y, BinOp::Div))?,
        Neg(a) => reduce(a)?.map(ClassFn::negate),
        Inv(a) => reduce(a)?.map(ClassFn::inverse_or_zero),
        Pow(a, k) => reduce(a)?.map(|c| c.power(*k)),
        Periodic(values) => {
            let modulus = values.len() as u64;
            if modulus > MODULUS_LIMIT {
                return None;
            }
            TameForm {
                modulus,
                prefix: 0,
                classes: values.iter().cloned().map(ClassFn::constant).collect(),
            }
        }
        Prefix(values, tail) => {
            let mut form = reduce(tail)?;
            form.prefix = form.prefix.max(values.len() as u64);
            form
        }
        IfMod { modulus, residue, then, otherwise } => {
            let a = reduce(then)?;
            let b = reduce(otherwise)?;
            let m = lcm(lcm(*modulus, a.modulus), b.modulus);
            if m > MODULUS_LIMIT {
                return None;
            }
            let (la, lb) = (a.lift(m), b.lift(m));
            let classes = (0..m)
                .map(|r| {
                    if r % modulus == *residue {
                        la[r as usize].clone()
                    } else {
                        lb[r as usize].clone()
                    }
                })
                .collect();
            TameForm { modulus: m, prefix: a.prefix.max(b.prefix), classes }
        }
        Rand { .. } => return None,
    })
}

/// Exact `(negative, zero, positive)` sets of a tame expression. `None` when
/// the expression is not tame or its roots lie beyond the search limit.
pub(crate) fn exact_sign_sets(e: &SequenceExpr, form: &TameForm) -> Option<[ExactSet; 3]> {
    let mut threshold = form.prefix;
    for class in &form.classes {
        threshold = threshold.max(class.threshold()?);
    }
    let signs: Vec<Option<i8>> = form.classes.iter().map(ClassFn::eventual_sign).collect();
    let head: Vec<Option<i8>> = (0..threshold)
        .map(|n| e.eval(n).ok().map(|v| sign(&v)))
        .collect();
    let build = |target: i8| {
        let flags = signs.iter().map(|s| *s == Some(target)).collect();
        ExactSet::from_fn(threshold, form.modulus, flags, |n| head[n as usize] == Some(target))
    };
    Some([build(-1), build(0), build(1)])
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

    fn signs(e: &SequenceExpr) -> [ExactSet; 3] {
        let form = reduce(e).expect("tame");
        exact_sign_sets(e, &form).expect("exact")
    }

    fn check_against_evaluation(e: &SequenceExpr, sets: &[ExactSet; 3], upto: u64) {
        for k in 0..upto {
            let expected = e.eval(k).ok().map(|v| sign(&v));
            let got = [-1i8, 0, 1]
                .into_iter()
                .zip(sets.iter())
                .find(|(_, s)| s.contains(k))
                .map(|(s, _)| s);
            assert_eq!(got, expected, "index {k} of {e}");
        }
    }

    #[test]
    fn positive_infinitesimal() {
        let e = c(1) / (n() + c(1));
        let [neg, zero, pos] = signs(&e);
        assert_eq!(neg, ExactSet::empty());
        assert_eq!(zero, ExactSet::empty());
        assert_eq!(pos, ExactSet::all());
    }

    #[test]
    fn alternating_signs_split_by_parity() {
        let e = SequenceExpr::periodic(vec![int(1), int(-1)]) * (c(1) / (n() + c(1)));
        let sets = signs(&e);
        assert_eq!(sets[0], ExactSet::periodic(2, [1]));
        assert_eq!(sets[1], ExactSet::empty());
        assert_eq!(sets[2], ExactSet::periodic(2, [0]));
        check_against_evaluation(&e, &sets, 51);
    }

    #[test]
    fn finitely_many_roots() {
        let e = (n() - c(3)) * (n() - c(7)) / (n() + c(1)).pow(2);
        let sets = signs(&e);
        assert_eq!(sets[1], ExactSet::finite([3, 7]));
        assert_eq!(sets[0], ExactSet::finite([4, 5, 6]));
        assert_eq!(sets[2], ExactSet::cofinite_except([3, 4, 5, 6, 7]));
        check_against_evaluation(&e, &sets, 21);
        // Leading coefficients 1 and 1: eventually positive.
        assert_eq!(reduce(&e).unwrap().class(0).eventual_sign(), Some(1));
    }

    #[test]
    fn cancelled_singularity_stays_undefined() {
        let e = (n() - c(5)) / (n() - c(5));
        let sets = signs(&e);
        assert!(!sets.iter().any(|s| s.contains(5)));
        check_against_evaluation(&e, &sets, 30);
    }

    #[test]
    fn undefined_residue_class() {
        let e = c(1) / SequenceExpr::periodic(vec![int(1), int(0)]);
        let sets = signs(&e);
        assert_eq!(sets[2], ExactSet::periodic(2, [0]));
        check_against_evaluation(&e, &sets, 20);
    }

    #[test]
    fn inv_node_and_prefix() {
        let u = SequenceExpr::prefix(vec![int(0); 5], c(2));
        let e = u.clone() * u.inv() - c(1);
        let sets = signs(&e);
        assert_eq!(sets[1], ExactSet::tail(5));
        check_against_evaluation(&e, &sets, 20);
    }

    #[test]
    fn germs() {
        let g = |e: SequenceExpr| reduce(&e).unwrap().class(0).germ();
        assert_eq!(g(c(1) / (n() + c(1))), Germ::Finite { limit: int(0), side: 1 });
        assert_eq!(g(n() / (n() + c(1))), Germ::Finite { limit: int(1), side: -1 });
        assert_eq!(g(-n()), Germ::Infinite { sign: -1 });
        assert_eq!(g(c(5)), Germ::Finite { limit: int(5), side: 0 });
        let e = (c(2) * n().pow(2) + c(1)) / (n().pow(2) + c(3));
        assert_eq!(g(e), Germ::Finite { limit: int(2), side: -1 });
        let h = c(1) / (c(2) * n() + c(3)) + ratio(1, 3).into();
        assert_eq!(g(h), Germ::Finite { limit: ratio(1, 3), side: 1 });
    }

    #[test]
    fn rand_is_not_tame() {
        assert!(reduce(&SequenceExpr::rand(1, int(0), int(1))).is_none());
    }
}
