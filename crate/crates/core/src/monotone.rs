//! Monotone subsequences from the ultrapower.
//!
//! A sequence `⟨u_n⟩` is plugged into the ultrapower as `u = [⟨u_n⟩]` and ℕ
//! is split into `A = {n : u_n < u}`, `B = {n : u_n = u}` and
//! `C = {n : u_n > u}`. Exactly one of the three has measure 1, and it
//! dictates the kind of subsequence: constant (`B`), strictly increasing
//! (`A`), or strictly decreasing (`C`). Extraction then runs the greedy
//! "earliest later term that is closer to `u`" rule.
//!
//! Terms at indices where the expression is undefined are read as `0`.

use std::cmp::Ordering;
use std::fmt;

use num::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::index_sets::{ExactSet, IndexSet, IndexSetError, SampledSet};
use crate::oracle::{OracleError, SharedOracle};
use crate::rational::Rational;
use crate::ultrapower::{default_eps, Germ, Hyper, SequenceExpr, UltraError};

/// Evaluation budget shared across one extraction.
pub const DEFAULT_SEARCH_BOUND: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonotoneError {
    #[error("search bound of {bound} evaluations exhausted after {found} terms")]
    SearchBoundExceeded { bound: u64, found: usize },
    #[error("prefix length must be at least 1")]
    PrefixTooShort,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error(transparent)]
    Ultra(#[from] UltraError),
    #[error(transparent)]
    IndexSet(#[from] IndexSetError),
}

impl From<OracleError> for MonotoneError {
    fn from(e: OracleError) -> Self {
        MonotoneError::Ultra(UltraError::Oracle(e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    /// `B ∈ 𝒰`.
    ConstantCase,
    /// `A ∈ 𝒰`.
    IncreasingCase,
    /// `C ∈ 𝒰`.
    DecreasingCase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    StrictlyIncreasing,
    StrictlyDecreasing,
    Constant,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The partition of ℕ around `u = [⟨u_n⟩]` and the case that holds.
#[derive(Clone, Debug)]
pub struct Trichotomy {
    pub case: Case,
    /// `A = {n : u_n < u}`.
    pub below: IndexSet,
    /// `B = {n : u_n = u}`.
    pub equal: IndexSet,
    /// `C = {n : u_n > u}`.
    pub above: IndexSet,
    pub class: Hyper,
}

impl Trichotomy {
    pub fn seq(&self) -> &SequenceExpr {
        self.class.expr()
    }

    /// `(μ(A), μ(B), μ(C))`, queried on the bound oracle.
    pub fn measures(&self) -> Result<[u8; 3], OracleError> {
        let mut oracle = self.class.oracle().lock();
        Ok([
            oracle.measure(&self.below)?,
            oracle.measure(&self.equal)?,
            oracle.measure(&self.above)?,
        ])
    }
}

/// A finite stretch of a monotone subsequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    pub indices: Vec<u64>,
    pub direction: Direction,
    pub values: Vec<Rational>,
}

impl Extraction {
    /// Indices strictly increase and values follow the direction strictly.
    pub fn is_valid(&self) -> bool {
        let indices_ok = self.indices.windows(2).all(|w| w[0] < w[1]);
        let values_ok = self.values.windows(2).all(|w| match self.direction {
            Direction::StrictlyIncreasing => w[0] < w[1],
            Direction::StrictlyDecreasing => w[0] > w[1],
            Direction::Constant => w[0] == w[1],
        });
        indices_ok && values_ok && self.indices.len() == self.values.len()
    }
}

/// `u_n`, with undefined terms read as `0`.
pub fn term(seq: &SequenceExpr, n: u64) -> Rational {
    seq.eval(n).unwrap_or_else(|_| Rational::zero())
}

/// Where a standard `q` sits relative to a class with the given germ.
fn standard_vs_germ(q: &Rational, germ: &Germ) -> Ordering {
    match germ {
        Germ::Infinite { sign } => {
            if *sign > 0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
        Germ::Finite { limit, side } => match q.cmp(limit) {
            Ordering::Equal => 0.cmp(side),
            other => other,
        },
        Germ::Undefined => unreachable!("undefined germs are rejected before comparison"),
    }
}

/// Splits ℕ into `A`, `B`, `C` around `u = [⟨seq⟩]` and reports which part
/// has measure 1.
///
/// Tame sequences are handled symbolically: the oracle fixes the residue
/// class that carries `u`, the rational function on that class gives `u`'s
/// limit and side, and the three parts are then sign sets of `u_n − limit`.
/// Other sequences fall back to a binary search for the cut among the sampled
/// term values, which usually ends in [`OracleError::AmbiguousAtHorizon`].
pub fn classify(seq: &SequenceExpr, oracle: &SharedOracle) -> Result<Trichotomy, MonotoneError> {
    let class = Hyper::new(seq.clone(), oracle);
    let horizon = oracle.lock().horizon();
    let (below, equal, above) = match class.germ()? {
        Some(germ) => tame_partition(seq, &germ, horizon)?,
        None => sampled_partition(seq, &class, horizon)?,
    };
    let mut guard = oracle.lock();
    let case = if guard.measure(&equal)? == 1 {
        Case::ConstantCase
    } else if guard.measure(&below)? == 1 {
        Case::IncreasingCase
    } else if guard.measure(&above)? == 1 {
        Case::DecreasingCase
    } else {
        return Err(OracleError::InconsistentLedger(format!(
            "none of the trichotomy parts of {seq} has measure 1"
        ))
        .into());
    };
    drop(guard);
    Ok(Trichotomy { case, below, equal, above, class })
}

fn tame_partition(
    seq: &SequenceExpr,
    germ: &Germ,
    horizon: u64,
) -> Result<(IndexSet, IndexSet, IndexSet), MonotoneError> {
    if *germ == Germ::Undefined {
        return Err(UltraError::UndefinedClass.into());
    }
    let (limit, side) = match germ {
        Germ::Finite { limit, side } => (limit.clone(), *side),
        _ => (Rational::zero(), 0),
    };
    let sets = (seq - &SequenceExpr::Const(limit)).sign_sets(horizon);
    let (Some(neg), Some(zero), Some(pos)) = (
        sets.negative.as_exact(),
        sets.zero.as_exact(),
        sets.positive.as_exact(),
    ) else {
        return Err(MonotoneError::PreconditionFailed(format!(
            "sign sets of {seq} are not exact"
        )));
    };
    let defined = neg.union(zero).union(pos);
    let undefined = defined.complement();
    if !undefined.is_finite() {
        return Err(MonotoneError::PreconditionFailed(format!(
            "{seq} is undefined on an infinite set"
        )));
    }
    let (mut a, mut b, mut c) = match germ {
        Germ::Infinite { sign } if *sign > 0 => (defined, ExactSet::empty(), ExactSet::empty()),
        Germ::Infinite { .. } => (ExactSet::empty(), ExactSet::empty(), defined),
        _ => match side.cmp(&0) {
            Ordering::Equal => (neg.clone(), zero.clone(), pos.clone()),
            Ordering::Greater => (neg.union(zero), ExactSet::empty(), pos.clone()),
            Ordering::Less => (neg.clone(), ExactSet::empty(), zero.union(pos)),
        },
    };
    // Undefined terms read as 0 and land wherever 0 sits relative to u.
    match standard_vs_germ(&Rational::zero(), germ) {
        Ordering::Less => a = a.union(&undefined),
        Ordering::Equal => b = b.union(&undefined),
        Ordering::Greater => c = c.union(&undefined),
    }
    Ok((a.into(), b.into(), c.into()))
}

fn sampled_partition(
    seq: &SequenceExpr,
    class: &Hyper,
    horizon: u64,
) -> Result<(IndexSet, IndexSet, IndexSet), MonotoneError> {
    let terms: Vec<Rational> = (0..horizon).map(|n| term(seq, n)).collect();
    let mut values = terms.clone();
    values.sort();
    values.dedup();
    // The predicate "v < u" is downward closed in v: find the first value
    // that is not below u.
    let (mut lo, mut hi) = (0usize, values.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if class.compare_standard(&values[mid])? == Ordering::Greater {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let cut = values.get(lo).cloned();
    let equal_value = match &cut {
        Some(v) if class.compare_standard(v)? == Ordering::Equal => Some(v.clone()),
        _ => None,
    };
    let rel = |n: u64| -> Ordering {
        let v = &terms[n as usize];
        match &cut {
            None => Ordering::Less,
            Some(c) if v < c => Ordering::Less,
            Some(c) if v == c && equal_value.is_some() => Ordering::Equal,
            Some(_) => Ordering::Greater,
        }
    };
    let part = |name: &str, which: Ordering| {
        IndexSet::Sampled(SampledSet::from_fn(format!("{name}⟨{seq}⟩"), horizon, |n| rel(n) == which))
    };
    Ok((part("below", Ordering::Less), part("equal", Ordering::Equal), part("above", Ordering::Greater)))
}

struct Budget {
    bound: u64,
    used: u64,
}

impl Budget {
    fn spend(&mut self, found: usize) -> Result<(), MonotoneError> {
        self.used += 1;
        if self.used > self.bound {
            Err(MonotoneError::SearchBoundExceeded { bound: self.bound, found })
        } else {
            Ok(())
        }
    }
}

fn horizon_to_bound(e: IndexSetError, bound: u64, found: usize) -> MonotoneError {
    match e {
        IndexSetError::ExhaustedAtHorizon { .. } | IndexSetError::BeyondHorizon { .. } => {
            MonotoneError::SearchBoundExceeded { bound, found }
        }
        other => other.into(),
    }
}

/// The first `count` terms of the subsequence promised by the trichotomy.
pub fn extract(tri: &Trichotomy, count: usize, search_bound: u64) -> Result<Extraction, MonotoneError> {
    if count == 0 {
        return Err(MonotoneError::PreconditionFailed("count must be at least 1".into()));
    }
    let seq = tri.seq();
    let (set, direction) = match tri.case {
        Case::ConstantCase => (&tri.equal, Direction::Constant),
        Case::IncreasingCase => (&tri.below, Direction::StrictlyIncreasing),
        Case::DecreasingCase => (&tri.above, Direction::StrictlyDecreasing),
    };
    let mut indices = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    if direction == Direction::Constant {
        for k in 0..count {
            let n = set
                .nth_member(k as u64)
                .map_err(|e| horizon_to_bound(e, search_bound, k))?;
            indices.push(n);
            values.push(term(seq, n));
        }
        return Ok(Extraction { indices, direction, values });
    }
    let mut budget = Budget { bound: search_bound, used: 0 };
    let first = set
        .nth_member(0)
        .map_err(|e| horizon_to_bound(e, search_bound, 0))?;
    indices.push(first);
    values.push(term(seq, first));
    let mut n = first;
    while indices.len() < count {
        n += 1;
        budget.spend(indices.len())?;
        let member = set
            .contains(n)
            .map_err(|e| horizon_to_bound(e, search_bound, indices.len()))?;
        if !member {
            continue;
        }
        let v = term(seq, n);
        let last = values.last().expect("at least one term");
        let better = match direction {
            Direction::StrictlyIncreasing => &v > last,
            _ => &v < last,
        };
        if better {
            indices.push(n);
            values.push(v);
        }
    }
    Ok(Extraction { indices, direction, values })
}

/// Newman's peaks on a finite prefix.
///
/// Index `i < prefix_len` is a prefix-peak when `u_i > u_j` for every
/// `i < j < prefix_len`; the last index always qualifies. With at least two
/// peaks they are returned as a strictly decreasing run. Otherwise no index
/// before the end is a peak, so every term has a larger one after it, and
/// the greedy chain of earliest larger terms from index 0 is returned.
pub fn peaks(seq: &SequenceExpr, prefix_len: usize) -> Result<Extraction, MonotoneError> {
    if prefix_len == 0 {
        return Err(MonotoneError::PrefixTooShort);
    }
    let terms: Vec<Rational> = (0..prefix_len as u64).map(|n| term(seq, n)).collect();
    let mut peak_indices = Vec::new();
    let mut suffix_max: Option<&Rational> = None;
    for i in (0..prefix_len).rev() {
        if suffix_max.is_none_or(|m| terms[i] > *m) {
            peak_indices.push(i);
        }
        suffix_max = Some(suffix_max.map_or(&terms[i], |m| m.max(&terms[i])));
    }
    peak_indices.reverse();
    if peak_indices.len() >= 2 {
        return Ok(Extraction {
            values: peak_indices.iter().map(|&i| terms[i].clone()).collect(),
            indices: peak_indices.into_iter().map(|i| i as u64).collect(),
            direction: Direction::StrictlyDecreasing,
        });
    }
    let mut indices = vec![0u64];
    let mut values = vec![terms[0].clone()];
    for (j, v) in terms.iter().enumerate().skip(1) {
        if v > values.last().expect("nonempty") {
            indices.push(j as u64);
            values.push(v.clone());
        }
    }
    Ok(Extraction { indices, direction: Direction::StrictlyIncreasing, values })
}

/// A strictly decreasing subsequence converging down towards `st(u)`,
/// available whenever `u` is finite and `u > st(u)`.
pub fn extract_decreasing_above_st(
    seq: &SequenceExpr,
    oracle: &SharedOracle,
    count: usize,
    search_bound: u64,
) -> Result<Extraction, MonotoneError> {
    if count == 0 {
        return Err(MonotoneError::PreconditionFailed("count must be at least 1".into()));
    }
    let u = Hyper::new(seq.clone(), oracle);
    let st = match u.standard_part(&default_eps()) {
        Ok(p) => p.value,
        Err(UltraError::NotFinite) => {
            return Err(MonotoneError::PreconditionFailed(format!("{u} is not finite")))
        }
        Err(e) => return Err(e.into()),
    };
    if u.compare_standard(&st)? != Ordering::Greater {
        return Err(MonotoneError::PreconditionFailed(format!(
            "{u} is not above its standard part {st}"
        )));
    }
    let mut budget = Budget { bound: search_bound, used: 0 };
    let mut indices = Vec::with_capacity(count);
    let mut values: Vec<Rational> = Vec::with_capacity(count);
    let mut n = 0u64;
    loop {
        let v = term(seq, n);
        let accept = v > st && values.last().is_none_or(|last| &v < last);
        if accept {
            indices.push(n);
            values.push(v);
            if indices.len() == count {
                break;
            }
        }
        budget.spend(indices.len())?;
        n += 1;
    }
    Ok(Extraction { indices, direction: Direction::StrictlyDecreasing, values })
}
