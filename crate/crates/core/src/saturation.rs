//! Nested interval families, their diagonal witnesses, and Cantor's
//! intersection theorem at desk scale.
//!
//! A family `A_0 ⊇ A_1 ⊇ …` of finite unions of closed intervals has a
//! common point in the ultrapower: pick `c_n ∈ A_n` and take `c = [⟨c_n⟩]`.
//! Then `{n : c_n ∈ A_m}` contains the tail `{n ≥ m}`, so `c ∈ *A_m` for
//! every `m`. When `A_0` is bounded, `c` is finite and `st(c)` is a standard
//! point of every level.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num::Zero;
use thiserror::Error;

use crate::index_sets::{ExactSet, IndexSet};
use crate::oracle::{OracleError, SharedOracle};
use crate::rational::Rational;
use crate::ultrapower::{Germ, Hyper, SequenceExpr, UltraError};

/// Default number of materialized levels.
pub const DEFAULT_DEPTH: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SaturationError {
    #[error("level {level} is not contained in level {}", level - 1)]
    NotNested { level: u64 },
    #[error("level {level} is empty")]
    EmptyLevel { level: u64 },
    #[error("levels {levels:?} have empty intersection")]
    FIPViolated { levels: Vec<u64> },
    #[error("level 0 is unbounded, so no standard common point is guaranteed")]
    NotBounded,
    #[error("depth must be at least 1")]
    NoLevels,
    #[error("membership could not be decided: {0}")]
    MembershipUndecided(OracleError),
    #[error("the class is not in the star of the set")]
    NotInStar,
    #[error("witness {witness} misses level {level} on a tail")]
    WitnessOutsideLevel { level: u64, witness: String },
    #[error("standard part {point} is outside level {level}")]
    NotInLevel { level: u64, point: String },
    #[error(transparent)]
    Ultra(UltraError),
}

impl From<UltraError> for SaturationError {
    fn from(e: UltraError) -> Self {
        match e {
            UltraError::Oracle(o) => SaturationError::MembershipUndecided(o),
            other => SaturationError::Ultra(other),
        }
    }
}

impl From<OracleError> for SaturationError {
    fn from(e: OracleError) -> Self {
        SaturationError::MembershipUndecided(e)
    }
}

/// A closed interval; a missing endpoint stands for `−∞` or `+∞`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        Interval { lo: Some(lo), hi: Some(hi) }
    }

    pub fn point(q: Rational) -> Self {
        Interval::new(q.clone(), q)
    }

    pub fn is_empty(&self) -> bool {
        matches!((&self.lo, &self.hi), (Some(a), Some(b)) if a > b)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn contains(&self, q: &Rational) -> bool {
        self.lo.as_ref().is_none_or(|a| a <= q) && self.hi.as_ref().is_none_or(|b| q <= b)
    }

    /// Membership with both endpoints pushed outwards by `slack`.
    pub fn contains_within(&self, q: &Rational, slack: &Rational) -> bool {
        self.lo.as_ref().is_none_or(|a| &(a - slack) <= q)
            && self.hi.as_ref().is_none_or(|b| q <= &(b + slack))
    }

    fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lo: max_lo(&self.lo, &other.lo),
            hi: min_hi(&self.hi, &other.hi),
        }
    }

    fn is_subset(&self, other: &Interval) -> bool {
        let lo_ok = match (&other.lo, &self.lo) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(b), Some(a)) => b <= a,
        };
        let hi_ok = match (&other.hi, &self.hi) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(b), Some(a)) => a <= b,
        };
        lo_ok && hi_ok
    }

    /// The leftmost point, or the right endpoint when unbounded below.
    fn designated_point(&self) -> Rational {
        self.lo
            .clone()
            .or_else(|| self.hi.clone())
            .unwrap_or_else(Rational::zero)
    }
}

fn max_lo(a: &Option<Rational>, b: &Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y).clone()),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    }
}

fn min_hi(a: &Option<Rational>, b: &Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y).clone()),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    }
}

/// Orders left endpoints with `None` as `−∞`.
fn cmp_lo(a: &Option<Rational>, b: &Option<Rational>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.cmp(y),
    }
}

/// Whether `[_, hi]` reaches `lo` (so the two closed intervals meet).
fn reaches(hi: &Option<Rational>, lo: &Option<Rational>) -> bool {
    match (hi, lo) {
        (None, _) | (_, None) => true,
        (Some(h), Some(l)) => l <= h,
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            Some(a) => write!(f, "[{a}, ")?,
            None => f.write_str("[-inf, ")?,
        }
        match &self.hi {
            Some(b) => write!(f, "{b}]"),
            None => f.write_str("inf]"),
        }
    }
}

/// A finite union of closed intervals, kept sorted with overlapping or
/// touching components merged.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct IntervalSet {
    components: Vec<Interval>,
}

impl IntervalSet {
    pub fn new(components: impl IntoIterator<Item = Interval>) -> Self {
        let mut parts: Vec<Interval> = components.into_iter().filter(|c| !c.is_empty()).collect();
        parts.sort_by(|a, b| cmp_lo(&a.lo, &b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for part in parts {
            match merged.last_mut() {
                Some(last) if reaches(&last.hi, &part.lo) => {
                    last.hi = match (&last.hi, &part.hi) {
                        (Some(x), Some(y)) => Some(x.max(y).clone()),
                        _ => None,
                    };
                }
                _ => merged.push(part),
            }
        }
        IntervalSet { components: merged }
    }

    pub fn interval(lo: Rational, hi: Rational) -> Self {
        Self::new([Interval::new(lo, hi)])
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.components.iter().all(Interval::is_bounded)
    }

    pub fn contains(&self, q: &Rational) -> bool {
        self.components.iter().any(|c| c.contains(q))
    }

    pub fn contains_within(&self, q: &Rational, slack: &Rational) -> bool {
        self.components.iter().any(|c| c.contains_within(q, slack))
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::new(
            self.components
                .iter()
                .flat_map(|a| other.components.iter().map(move |b| a.intersect(b))),
        )
    }

    /// Each component of `self` is connected, and the components of `other`
    /// are separated by gaps, so it suffices to find one container each.
    pub fn is_subset(&self, other: &IntervalSet) -> bool {
        self.components
            .iter()
            .all(|a| other.components.iter().any(|b| a.is_subset(b)))
    }

    /// Leftmost point of the leftmost component.
    pub fn designated_point(&self) -> Option<Rational> {
        self.components.first().map(Interval::designated_point)
    }

    /// `{n : seq_n ∈ self}`, exact when `seq` is tame.
    pub fn membership(&self, seq: &SequenceExpr, horizon: u64) -> IndexSet {
        let mut result: IndexSet = ExactSet::empty().into();
        for c in &self.components {
            let mut inside: IndexSet = seq.defined_set(horizon);
            if let Some(a) = &c.lo {
                let s = (seq - &SequenceExpr::Const(a.clone())).sign_sets(horizon);
                inside = inside.intersect(&s.zero.union(&s.positive));
            }
            if let Some(b) = &c.hi {
                let s = (&SequenceExpr::Const(b.clone()) - seq).sign_sets(horizon);
                inside = inside.intersect(&s.zero.union(&s.positive));
            }
            result = result.union(&inside);
        }
        result
    }
}

impl fmt::Display for IntervalSet {
    /// Prints in the family grammar, `[a, b] u [c, d]`; `{}` when empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("{}");
        }
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(" u ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// One component of a level, with endpoints given as sequences in `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicInterval {
    pub lo: Option<SequenceExpr>,
    pub hi: Option<SequenceExpr>,
}

impl SymbolicInterval {
    pub fn new(lo: SequenceExpr, hi: SequenceExpr) -> Self {
        SymbolicInterval { lo: Some(lo), hi: Some(hi) }
    }

    fn at(&self, n: u64) -> Result<Interval, UltraError> {
        let lo = self.lo.as_ref().map(|e| e.eval(n)).transpose()?;
        let hi = self.hi.as_ref().map(|e| e.eval(n)).transpose()?;
        Ok(Interval { lo, hi })
    }

    /// Sequence tracing this component's designated point.
    fn point_expr(&self) -> SequenceExpr {
        self.lo
            .clone()
            .or_else(|| self.hi.clone())
            .unwrap_or_else(|| SequenceExpr::int(0))
    }
}

impl fmt::Display for SymbolicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            Some(a) => write!(f, "[{a}, ")?,
            None => f.write_str("[-inf, ")?,
        }
        match &self.hi {
            Some(b) => write!(f, "{b}]"),
            None => f.write_str("inf]"),
        }
    }
}

type LevelFn = Arc<dyn Fn(u64) -> IntervalSet + Send + Sync>;

#[derive(Clone)]
enum Source {
    Symbolic(Vec<SymbolicInterval>),
    Generated(LevelFn),
}

/// A sequence of interval sets `A_0, A_1, …` with `depth` levels checked.
#[derive(Clone)]
pub struct NestedFamily {
    source: Source,
    depth: u64,
}

impl fmt::Debug for NestedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Symbolic(_) => write!(f, "NestedFamily({self}, depth {})", self.depth),
            Source::Generated(_) => write!(f, "NestedFamily(<generated>, depth {})", self.depth),
        }
    }
}

impl fmt::Display for NestedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Symbolic(parts) => {
                for (i, c) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" u ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Source::Generated(_) => f.write_str("<generated>"),
        }
    }
}

impl NestedFamily {
    /// Level `n` is the union of the components with endpoints evaluated at
    /// `n`; components whose endpoints cross are dropped at that level.
    pub fn symbolic(components: Vec<SymbolicInterval>, depth: u64) -> Self {
        NestedFamily { source: Source::Symbolic(components), depth }
    }

    pub fn from_fn(f: impl Fn(u64) -> IntervalSet + Send + Sync + 'static, depth: u64) -> Self {
        NestedFamily { source: Source::Generated(Arc::new(f)), depth }
    }

    /// Explicit levels; past the last one the family stays constant.
    pub fn from_levels(levels: Vec<IntervalSet>) -> Self {
        let depth = levels.len() as u64;
        let levels = Arc::new(levels);
        Self::from_fn(
            move |n| levels[(n as usize).min(levels.len().saturating_sub(1))].clone(),
            depth,
        )
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn with_depth(mut self, depth: u64) -> Self {
        self.depth = depth;
        self
    }

    pub fn level(&self, n: u64) -> Result<IntervalSet, SaturationError> {
        match &self.source {
            Source::Symbolic(parts) => {
                let evaluated = parts.iter().map(|p| p.at(n)).collect::<Result<Vec<_>, _>>()?;
                Ok(IntervalSet::new(evaluated))
            }
            Source::Generated(f) => Ok(f(n)),
        }
    }

    /// Levels `0..depth`, checked nonempty and nested.
    pub fn materialize(&self) -> Result<Vec<IntervalSet>, SaturationError> {
        if self.depth == 0 {
            return Err(SaturationError::NoLevels);
        }
        let mut levels: Vec<IntervalSet> = Vec::with_capacity(self.depth as usize);
        for n in 0..self.depth {
            let level = self.level(n)?;
            if level.is_empty() {
                return Err(SaturationError::EmptyLevel { level: n });
            }
            if levels.last().is_some_and(|prev| !level.is_subset(prev)) {
                return Err(SaturationError::NotNested { level: n });
            }
            levels.push(level);
        }
        Ok(levels)
    }
}

/// Membership of the witness in one level.
#[derive(Clone, Debug)]
pub struct LevelMembership {
    pub level: u64,
    /// `{n : c_n ∈ A_level}`.
    pub set: IndexSet,
    /// Whether the set was checked to contain `{n ≥ level}`.
    pub contains_tail: bool,
    pub verdict: u8,
}

/// A common point of every `*A_m`, with the evidence.
#[derive(Clone, Debug)]
pub struct SaturationWitness {
    pub point: Hyper,
    pub levels: Vec<LevelMembership>,
}

impl SaturationWitness {
    pub fn sequence(&self) -> &SequenceExpr {
        self.point.expr()
    }
}

fn tail_contained(set: &IndexSet, start: u64) -> bool {
    match set {
        IndexSet::Exact(e) => ExactSet::tail(start).is_subset(e),
        IndexSet::Sampled(s) => (start..s.horizon()).all(|n| s.contains(n).unwrap_or(false)),
    }
}

/// Candidate witness sequences, symbolic first when one component carries
/// the designated point at every materialized level.
fn witness_candidates(fam: &NestedFamily, levels: &[IntervalSet]) -> Vec<SequenceExpr> {
    let mut out = Vec::new();
    if let Source::Symbolic(parts) = &fam.source {
        let carrier = parts.iter().find(|p| {
            levels.iter().enumerate().all(|(n, level)| match p.at(n as u64) {
                Ok(iv) => !iv.is_empty() && Some(iv.designated_point()) == level.designated_point(),
                Err(_) => false,
            })
        });
        if let Some(p) = carrier {
            out.push(p.point_expr());
        }
    }
    let points: Vec<Rational> = levels
        .iter()
        .map(|l| l.designated_point().expect("levels are nonempty"))
        .collect();
    let last = points.last().expect("at least one level").clone();
    if points.iter().all(|p| *p == last) {
        out.push(SequenceExpr::Const(last));
    } else {
        out.push(SequenceExpr::prefix(points, SequenceExpr::Const(last)));
    }
    out
}

/// The diagonal witness `c = [⟨c_n⟩]`, `c_n` the leftmost point of `A_n`.
///
/// For every materialized level `m` the set `{n : c_n ∈ A_m}` is checked to
/// contain `{n ≥ m}` and is then measured, so the returned class lies in
/// `*A_m` under the given oracle.
pub fn saturation_witness(
    fam: &NestedFamily,
    oracle: &SharedOracle,
) -> Result<SaturationWitness, SaturationError> {
    let levels = fam.materialize()?;
    let horizon = oracle.lock().horizon();
    let mut failure = None;
    'candidates: for seq in witness_candidates(fam, &levels) {
        let mut sets = Vec::with_capacity(levels.len());
        for (m, level) in levels.iter().enumerate() {
            let set = level.membership(&seq, horizon);
            if !tail_contained(&set, m as u64) {
                failure = Some(SaturationError::WitnessOutsideLevel {
                    level: m as u64,
                    witness: seq.to_string(),
                });
                continue 'candidates;
            }
            sets.push(set);
        }
        let mut memberships = Vec::with_capacity(sets.len());
        for (m, set) in sets.into_iter().enumerate() {
            let verdict = oracle.measure(&set)?;
            if verdict != 1 {
                return Err(OracleError::InconsistentLedger(format!(
                    "a superset of tail({m}) measured 0"
                ))
                .into());
            }
            memberships.push(LevelMembership {
                level: m as u64,
                set,
                contains_tail: true,
                verdict,
            });
        }
        return Ok(SaturationWitness { point: Hyper::new(seq, oracle), levels: memberships });
    }
    Err(failure.expect("the tabulated candidate always exists"))
}

/// Witness for a family with the finite intersection property, via the
/// running intersections `A_0 ∩ … ∩ A_n`.
pub fn fip_witness(
    sets: &[IntervalSet],
    oracle: &SharedOracle,
) -> Result<SaturationWitness, SaturationError> {
    if sets.is_empty() {
        return Err(SaturationError::NoLevels);
    }
    let mut running = Vec::with_capacity(sets.len());
    let mut acc = sets[0].clone();
    for (k, s) in sets.iter().enumerate() {
        if k > 0 {
            acc = acc.intersect(s);
        }
        if acc.is_empty() {
            return Err(SaturationError::FIPViolated { levels: (0..=k as u64).collect() });
        }
        running.push(acc.clone());
    }
    saturation_witness(&NestedFamily::from_levels(running), oracle)
}

/// `st(y)` when `y ∈ *k` is finite and its standard part lies in `k`;
/// `None` when `y` is infinite.
pub fn is_nearstandard(
    y: &Hyper,
    k: &IntervalSet,
    schedule: &[Rational],
    eps: &Rational,
) -> Result<Option<Rational>, SaturationError> {
    let oracle = y.oracle();
    let horizon = oracle.lock().horizon();
    if oracle.measure(&k.membership(y.expr(), horizon))? != 1 {
        return Err(SaturationError::NotInStar);
    }
    if matches!(y.germ()?, Some(Germ::Infinite { .. })) || !y.is_finite(schedule)? {
        return Ok(None);
    }
    let st = y.standard_part(eps)?;
    let inside = if st.exact {
        k.contains(&st.value)
    } else {
        k.contains_within(&st.value, eps)
    };
    if !inside {
        return Err(SaturationError::NotInLevel { level: 0, point: st.value.to_string() });
    }
    Ok(Some(st.value))
}

/// Result of [`cantor_intersection`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommonPoint {
    pub value: Rational,
    /// False when `value` is an `eps`-approximation of the standard part.
    pub exact: bool,
}

/// A standard point of every materialized level of a bounded nested family.
pub fn cantor_intersection(
    fam: &NestedFamily,
    oracle: &SharedOracle,
    eps: &Rational,
) -> Result<CommonPoint, SaturationError> {
    if !fam.level(0)?.is_bounded() {
        return Err(SaturationError::NotBounded);
    }
    let witness = saturation_witness(fam, oracle)?;
    let st = witness.point.standard_part(eps)?;
    for n in 0..fam.depth() {
        let level = fam.level(n)?;
        let inside = if st.exact {
            level.contains(&st.value)
        } else {
            level.contains_within(&st.value, eps)
        };
        if !inside {
            return Err(SaturationError::NotInLevel { level: n, point: st.value.to_string() });
        }
    }
    Ok(CommonPoint { value: st.value, exact: st.exact })
}
