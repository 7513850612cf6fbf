use std::cmp::Ordering;
use std::fmt;

use num::{BigInt, One, Signed};

use super::expr::SequenceExpr;
use super::tame::{self, Germ};
use super::{SignSets, UltraError};
use crate::oracle::SharedOracle;
use crate::rational::{two, Rational};

/// Default precision for standard parts is `1 / DEFAULT_EPS_DENOMINATOR`.
pub const DEFAULT_EPS_DENOMINATOR: u64 = 1_000_000_000;

/// `r = 2^k` for `k = 0..=64`.
pub fn default_schedule() -> Vec<Rational> {
    (0..=64u32)
        .map(|k| Rational::from_integer(BigInt::one() << k))
        .collect()
}

/// A hyperrational `[⟨u_n⟩]` bound to the oracle that decides its order.
#[derive(Clone, Debug)]
pub struct Hyper {
    expr: SequenceExpr,
    oracle: SharedOracle,
}

/// Result of [`Hyper::standard_part`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StandardPart {
    pub value: Rational,
    /// False when `value` is a bisection approximation within `eps`.
    pub exact: bool,
}

impl Hyper {
    pub fn new(expr: SequenceExpr, oracle: &SharedOracle) -> Self {
        Hyper { expr, oracle: oracle.clone() }
    }

    /// The embedding of a standard rational as a constant sequence.
    pub fn standard(q: Rational, oracle: &SharedOracle) -> Self {
        Self::new(SequenceExpr::Const(q), oracle)
    }

    pub fn expr(&self) -> &SequenceExpr {
        &self.expr
    }

    pub fn oracle(&self) -> &SharedOracle {
        &self.oracle
    }

    fn check_same(&self, other: &Hyper) -> Result<(), UltraError> {
        if self.oracle.same_as(&other.oracle) {
            Ok(())
        } else {
            Err(UltraError::MixedOracles)
        }
    }

    fn with(&self, expr: SequenceExpr) -> Hyper {
        Hyper { expr, oracle: self.oracle.clone() }
    }

    pub fn add(&self, other: &Hyper) -> Result<Hyper, UltraError> {
        self.check_same(other)?;
        Ok(self.with(&self.expr + &other.expr))
    }

    pub fn sub(&self, other: &Hyper) -> Result<Hyper, UltraError> {
        self.check_same(other)?;
        Ok(self.with(&self.expr - &other.expr))
    }

    pub fn mul(&self, other: &Hyper) -> Result<Hyper, UltraError> {
        self.check_same(other)?;
        Ok(self.with(&self.expr * &other.expr))
    }

    pub fn neg(&self) -> Hyper {
        self.with(-self.expr.clone())
    }

    /// Multiplicative inverse; the representative is `0` wherever `u_n = 0`.
    pub fn inv(&self) -> Result<Hyper, UltraError> {
        if self.is_zero_class()? {
            return Err(UltraError::DivisionByZeroClass);
        }
        Ok(self.with(self.expr.clone().inv()))
    }

    fn sign_sets(&self) -> SignSets {
        let horizon = self.oracle.lock().horizon();
        self.expr.sign_sets(horizon)
    }

    /// Sign of the class: which of the three sign sets has measure 1.
    pub fn signum(&self) -> Result<Ordering, UltraError> {
        let sets = match tame::reduce(&self.expr) {
            Some(form) => match tame::exact_sign_sets(&self.expr, &form) {
                Some([negative, zero, positive]) => SignSets {
                    negative: negative.into(),
                    zero: zero.into(),
                    positive: positive.into(),
                },
                // Sign changes too far out to tabulate: the finite prefix is
                // invisible to a free ultrafilter, so the eventual sign on the
                // selected class decides.
                None => {
                    let r = self.oracle.residue(form.modulus)?;
                    let s = match form.class(r).germ() {
                        Germ::Undefined => return Err(UltraError::UndefinedClass),
                        Germ::Infinite { sign } => sign,
                        Germ::Finite { limit, .. } if limit.is_positive() => 1,
                        Germ::Finite { limit, .. } if limit.is_negative() => -1,
                        Germ::Finite { side, .. } => side,
                    };
                    return Ok(s.cmp(&0));
                }
            },
            None => self.sign_sets(),
        };
        let mut oracle = self.oracle.lock();
        if oracle.measure(&sets.zero)? == 1 {
            return Ok(Ordering::Equal);
        }
        if oracle.measure(&sets.negative)? == 1 {
            return Ok(Ordering::Less);
        }
        if oracle.measure(&sets.positive)? == 1 {
            return Ok(Ordering::Greater);
        }
        Err(UltraError::UndefinedClass)
    }

    /// `[u] < [v]` iff `{n : u_n < v_n}` has measure 1.
    pub fn compare(&self, other: &Hyper) -> Result<Ordering, UltraError> {
        self.check_same(other)?;
        self.sub(other)?.signum()
    }

    pub fn compare_standard(&self, q: &Rational) -> Result<Ordering, UltraError> {
        self.compare(&Hyper::standard(q.clone(), &self.oracle))
    }

    /// Behaviour along the residue class the oracle selects, for tame
    /// representatives; `None` outside the tame fragment.
    pub fn germ(&self) -> Result<Option<Germ>, UltraError> {
        let Some(form) = tame::reduce(&self.expr) else {
            return Ok(None);
        };
        let r = self.oracle.residue(form.modulus)?;
        Ok(Some(form.class(r).germ()))
    }

    /// A bound `r` from `schedule` with `−r < u < r`, or `None` when the class
    /// is provably infinite.
    pub fn finite_bound(&self, schedule: &[Rational]) -> Result<Option<Rational>, UltraError> {
        match self.germ()? {
            Some(Germ::Infinite { .. }) => return Ok(None),
            Some(Germ::Undefined) => return Err(UltraError::UndefinedClass),
            _ => {}
        }
        for r in schedule {
            if self.compare_standard(r)? == Ordering::Less
                && self.compare_standard(&-r)? == Ordering::Greater
            {
                return Ok(Some(r.clone()));
            }
        }
        Err(UltraError::NotDecidedAtBound {
            largest: schedule.last().map(ToString::to_string).unwrap_or_default(),
        })
    }

    pub fn is_finite(&self, schedule: &[Rational]) -> Result<bool, UltraError> {
        Ok(self.finite_bound(schedule)?.is_some())
    }

    /// The standard part: exact for tame classes, within `eps` otherwise.
    pub fn standard_part(&self, eps: &Rational) -> Result<StandardPart, UltraError> {
        match self.germ()? {
            Some(Germ::Finite { limit, .. }) => Ok(StandardPart { value: limit, exact: true }),
            Some(Germ::Infinite { .. }) => Err(UltraError::NotFinite),
            Some(Germ::Undefined) => Err(UltraError::UndefinedClass),
            None => self.standard_part_by_bisection(eps, &default_schedule()),
        }
    }

    pub fn st(&self, eps: &Rational) -> Result<Rational, UltraError> {
        self.standard_part(eps).map(|p| p.value)
    }

    /// Bisection on `compare(u, mid)` inside the finiteness bound, stopping
    /// once the bracket is no wider than `eps`.
    pub fn standard_part_by_bisection(
        &self,
        eps: &Rational,
        schedule: &[Rational],
    ) -> Result<StandardPart, UltraError> {
        assert!(eps.is_positive(), "eps must be positive");
        let bound = self.finite_bound(schedule)?.ok_or(UltraError::NotFinite)?;
        let (mut lo, mut hi) = (-bound.clone(), bound);
        while &hi - &lo > *eps {
            let mid = (&lo + &hi) / two();
            match self.compare_standard(&mid)? {
                Ordering::Equal => return Ok(StandardPart { value: mid, exact: true }),
                Ordering::Less => hi = mid,
                Ordering::Greater => lo = mid,
            }
        }
        let value = (lo + hi) / two();
        Ok(StandardPart { value, exact: false })
    }

    pub fn is_zero_class(&self) -> Result<bool, UltraError> {
        Ok(self.signum()? == Ordering::Equal)
    }
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[⟨{}⟩]", self.expr)
    }
}

/// Default precision `10^-9`.
pub fn default_eps() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(DEFAULT_EPS_DENOMINATOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleState;
    use crate::rational::{int, ratio};

    fn n() -> SequenceExpr {
        SequenceExpr::index()
    }

    fn c(v: i64) -> SequenceExpr {
        SequenceExpr::int(v)
    }

    fn alt() -> SequenceExpr {
        SequenceExpr::periodic(vec![int(1), int(-1)])
    }

    fn eps() -> Rational {
        default_eps()
    }

    #[test]
    fn sign_changes_past_the_tabulation_limit() {
        let o = SharedOracle::fresh();
        let tiny = Rational::new(BigInt::one(), BigInt::from(10).pow(18));
        let u = Hyper::new(c(1) / (n() + c(1)), &o);
        assert_eq!(u.compare_standard(&tiny).unwrap(), Ordering::Less);
        let shifted = Hyper::new(alt() * (c(1) / (n() + c(1)) - SequenceExpr::Const(tiny)), &o);
        o.force_residue(2, 1).unwrap();
        assert_eq!(shifted.signum().unwrap(), Ordering::Greater);
    }

    #[test]
    fn termwise_ring_identities() {
        let o = SharedOracle::fresh();
        let a = Hyper::new(c(1) / (n() + c(1)), &o);
        let b = Hyper::new(n() / (n() + c(1)), &o);
        let one = Hyper::standard(int(1), &o);
        assert_eq!(a.add(&b).unwrap().compare(&one), Ok(Ordering::Equal));
        let s = Hyper::new(alt(), &o);
        assert_eq!(s.mul(&s).unwrap().compare(&one), Ok(Ordering::Equal));
        assert!(a.add(&a.neg()).unwrap().is_zero_class().unwrap());
    }

    #[test]
    fn mixed_oracles_are_rejected() {
        let a = Hyper::new(n(), &SharedOracle::fresh());
        let b = Hyper::new(n(), &SharedOracle::fresh());
        assert_eq!(a.add(&b).unwrap_err(), UltraError::MixedOracles);
        assert_eq!(a.compare(&b).unwrap_err(), UltraError::MixedOracles);
    }

    #[test]
    fn inverses() {
        let o = SharedOracle::fresh();
        let eps = Hyper::new(c(1) / (n() + c(1)), &o);
        let big = eps.inv().unwrap();
        let expected = Hyper::new(n() + c(1), &o);
        assert_eq!(big.compare(&expected), Ok(Ordering::Equal));
        assert_eq!(big.is_finite(&default_schedule()), Ok(false));
        assert_eq!(
            Hyper::standard(int(0), &o).inv().unwrap_err(),
            UltraError::DivisionByZeroClass
        );
        let u = Hyper::new(SequenceExpr::prefix(vec![int(0); 5], c(2)), &o);
        let product = u.inv().unwrap().mul(&u).unwrap();
        let eq_set = product.sub(&Hyper::standard(int(1), &o)).unwrap().sign_sets().zero;
        assert!(eq_set.is_cofinite_set().unwrap());
        assert_eq!(product.compare(&Hyper::standard(int(1), &o)), Ok(Ordering::Equal));
    }

    #[test]
    fn infinitesimal_order() {
        let o = SharedOracle::fresh();
        let u = Hyper::new(c(1) / (n() + c(1)), &o);
        assert_eq!(u.compare_standard(&int(0)), Ok(Ordering::Greater));
        assert_eq!(u.compare_standard(&ratio(1, 1000)), Ok(Ordering::Less));
        assert_eq!(u.compare(&u), Ok(Ordering::Equal));
    }

    #[test]
    fn alternating_sign_depends_on_the_branch() {
        let base = SharedOracle::fresh();
        let even = base.fork();
        even.force_residue(2, 0).unwrap();
        let odd = base.fork();
        odd.force_residue(2, 1).unwrap();
        assert_eq!(Hyper::new(alt(), &even).compare_standard(&int(0)), Ok(Ordering::Greater));
        assert_eq!(Hyper::new(alt(), &odd).compare_standard(&int(0)), Ok(Ordering::Less));
    }

    #[test]
    fn finiteness() {
        let o = SharedOracle::fresh();
        let s = default_schedule();
        assert_eq!(Hyper::new(n(), &o).is_finite(&s), Ok(false));
        o.force_residue(2, 0).unwrap();
        let u = Hyper::new(c(2) + alt() + c(1) / (n() + c(1)), &o);
        // On evens the terms are 3 + 1/(n+1) <= 4, on odds 1 + 1/(n+1) <= 2.
        assert_eq!(u.finite_bound(&s), Ok(Some(int(4))));
        assert_eq!(Hyper::standard(int(5), &o).is_finite(&s), Ok(true));
    }

    #[test]
    fn standard_parts() {
        let o = SharedOracle::fresh();
        let u = Hyper::new(c(1) + c(1) / (n() + c(1)), &o);
        assert_eq!(u.standard_part(&eps()), Ok(StandardPart { value: int(1), exact: true }));

        let e = (c(2) * n().pow(2) + c(1)) / (n().pow(2) + c(3));
        let v = Hyper::new(e, &o);
        assert_eq!(v.st(&eps()), Ok(int(2)));
        let approx = v.standard_part_by_bisection(&eps(), &default_schedule()).unwrap();
        assert!((approx.value - int(2)).abs() <= eps());

        assert_eq!(Hyper::new(n(), &o).st(&eps()), Err(UltraError::NotFinite));
        let q = ratio(3, 7);
        assert_eq!(Hyper::standard(q.clone(), &o).st(&eps()), Ok(q));
    }

    #[test]
    fn standard_part_follows_the_branch() {
        for (r, expected) in [(0, 1), (1, -1)] {
            let o = SharedOracle::new(OracleState::default());
            o.force_residue(2, r).unwrap();
            let u = Hyper::new(alt() + c(1) / (n() + c(1)), &o);
            assert_eq!(u.st(&eps()), Ok(int(expected)));
        }
    }

    #[test]
    fn non_tame_classes_use_sampling() {
        let o = SharedOracle::new(OracleState::new(4000, 20));
        let u = Hyper::new(SequenceExpr::rand(3, int(0), int(1)), &o);
        assert_eq!(u.compare_standard(&int(2)), Ok(Ordering::Less));
        assert_eq!(u.compare_standard(&int(-1)), Ok(Ordering::Greater));
        assert_eq!(u.finite_bound(&default_schedule()), Ok(Some(int(1))));
        let p = u.standard_part(&ratio(1, 8)).unwrap();
        assert!(!p.exact);
        assert!(p.value >= int(0) && p.value <= int(1));
        o.lock().verify().unwrap();
    }
}
