//! Subsets of ℕ on which the ultrafilter is decided.
//!
//! Two representations coexist. [`ExactSet`] covers the eventually periodic
//! sets: beyond a threshold `N` membership of `n` is `n mod m ∈ R`, and below
//! `N` a finite list of flipped indices overrides that rule. The Boolean
//! algebra is closed on this class and equality is decidable because every
//! value is kept in a canonical normal form. [`SampledSet`] is a fallback for
//! sets the symbolic machinery cannot describe; it stores membership up to a
//! horizon and refuses to answer past it.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use bitvec::prelude::*;
use num::integer::{gcd, lcm};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default sampling horizon for [`SampledSet`]s.
pub const DEFAULT_HORIZON: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexSetError {
    #[error("finiteness of a sampled set is undecidable")]
    UndecidableOnSampled,
    #[error("only {found} members below the horizon {horizon}, needed {needed}")]
    ExhaustedAtHorizon { needed: u64, found: u64, horizon: u64 },
    #[error("the set is empty")]
    EmptySet,
    #[error("the set is finite with {count} members, member #{k} requested")]
    TooFewMembers { k: u64, count: u64 },
    #[error("index {index} lies at or beyond the sampling horizon {horizon}")]
    BeyondHorizon { index: u64, horizon: u64 },
    #[error("malformed set description: {0}")]
    Malformed(String),
}

/// An eventually periodic subset of ℕ in canonical normal form.
///
/// The periodic rule is `n mod modulus ∈ residues`; `flips` lists the
/// finitely many indices whose membership disagrees with the rule. The
/// threshold is one past the largest flip. Canonical means the modulus is
/// the minimal period of the rule and `flips` holds only genuine deviations,
/// so derived `Eq` is extensional equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExactSet {
    modulus: u64,
    residues: Vec<bool>,
    flips: BTreeSet<u64>,
}

impl ExactSet {
    /// Builds a set from a threshold, a periodic rule, and explicit
    /// membership below the threshold.
    pub fn from_fn(
        threshold: u64,
        modulus: u64,
        residues: Vec<bool>,
        below: impl Fn(u64) -> bool,
    ) -> Self {
        assert!(modulus >= 1, "modulus must be positive");
        assert_eq!(residues.len() as u64, modulus, "one flag per residue");
        let flips = (0..threshold)
            .filter(|&n| below(n) != residues[(n % modulus) as usize])
            .collect();
        let mut set = ExactSet { modulus, residues, flips };
        set.minimize_modulus();
        set
    }

    /// `{n : n mod m ∈ residues}`.
    pub fn periodic(modulus: u64, residues: impl IntoIterator<Item = u64>) -> Self {
        assert!(modulus >= 1, "modulus must be positive");
        let mut flags = vec![false; modulus as usize];
        for r in residues {
            flags[(r % modulus) as usize] = true;
        }
        Self::from_fn(0, modulus, flags, |_| false)
    }

    pub fn residue_class(modulus: u64, residue: u64) -> Self {
        Self::periodic(modulus, [residue])
    }

    pub fn all() -> Self {
        Self::periodic(1, [0])
    }

    pub fn empty() -> Self {
        Self::periodic(1, [])
    }

    pub fn finite(members: impl IntoIterator<Item = u64>) -> Self {
        let members: BTreeSet<u64> = members.into_iter().collect();
        let threshold = members.last().map_or(0, |m| m + 1);
        Self::from_fn(threshold, 1, vec![false], |n| members.contains(&n))
    }

    pub fn cofinite_except(excluded: impl IntoIterator<Item = u64>) -> Self {
        Self::finite(excluded).complement()
    }

    /// `{n : n ≥ start}`.
    pub fn tail(start: u64) -> Self {
        Self::from_fn(start, 1, vec![true], |_| false)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn threshold(&self) -> u64 {
        self.flips.last().map_or(0, |n| n + 1)
    }

    /// Residues of the periodic rule, ascending.
    pub fn residues(&self) -> impl Iterator<Item = u64> + '_ {
        self.residues
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(r, _)| r as u64)
    }

    pub fn has_residue(&self, r: u64) -> bool {
        self.residues[(r % self.modulus) as usize]
    }

    /// Exceptions below the threshold as `(index, membership)` pairs.
    pub fn exceptions(&self) -> impl Iterator<Item = (u64, bool)> + '_ {
        self.flips.iter().map(|&n| (n, !self.periodic_rule(n)))
    }

    fn periodic_rule(&self, n: u64) -> bool {
        self.residues[(n % self.modulus) as usize]
    }

    pub fn contains(&self, n: u64) -> bool {
        self.periodic_rule(n) ^ self.flips.contains(&n)
    }

    pub fn complement(&self) -> Self {
        ExactSet {
            modulus: self.modulus,
            residues: self.residues.iter().map(|b| !b).collect(),
            flips: self.flips.clone(),
        }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Self) -> Self {
        self.complement()
            .intersect(&other.complement())
            .complement()
    }

    fn combine(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Self {
        let modulus = lcm(self.modulus, other.modulus);
        let residues = (0..modulus)
            .map(|r| op(self.periodic_rule(r), other.periodic_rule(r)))
            .collect();
        let threshold = self.threshold().max(other.threshold());
        Self::from_fn(threshold, modulus, residues, |n| {
            op(self.contains(n), other.contains(n))
        })
    }

    pub fn is_finite(&self) -> bool {
        self.residues.iter().all(|b| !b)
    }

    pub fn is_cofinite(&self) -> bool {
        self.residues.iter().all(|&b| b)
    }

    pub fn is_empty(&self) -> bool {
        self.is_finite() && self.flips.is_empty()
    }

    /// Decidable inclusion.
    pub fn is_subset(&self, other: &Self) -> bool {
        self.intersect(&other.complement()).is_empty()
    }

    /// The `k`-th smallest member, counting from zero.
    pub fn nth_member(&self, k: u64) -> Result<u64, IndexSetError> {
        let threshold = self.threshold();
        let head: Vec<u64> = (0..threshold).filter(|&n| self.contains(n)).collect();
        if (k as usize) < head.len() {
            return Ok(head[k as usize]);
        }
        let per_period: Vec<u64> = (threshold..threshold + self.modulus)
            .filter(|&n| self.periodic_rule(n))
            .collect();
        if per_period.is_empty() {
            return Err(if head.is_empty() {
                IndexSetError::EmptySet
            } else {
                IndexSetError::TooFewMembers { k, count: head.len() as u64 }
            });
        }
        let rest = k - head.len() as u64;
        let cycles = rest / per_period.len() as u64;
        let offset = (rest % per_period.len() as u64) as usize;
        Ok(per_period[offset] + cycles * self.modulus)
    }

    /// Members below `bound`, ascending.
    pub fn members_below(&self, bound: u64) -> impl Iterator<Item = u64> + '_ {
        (0..bound).filter(move |&n| self.contains(n))
    }

    fn minimize_modulus(&mut self) {
        let m = self.modulus;
        for d in 1..m {
            if m % d != 0 {
                continue;
            }
            if (0..m).all(|r| self.residues[r as usize] == self.residues[(r % d) as usize]) {
                self.residues.truncate(d as usize);
                self.modulus = d;
                return;
            }
        }
    }
}

impl fmt::Display for ExactSet {
    /// Renders in the CLI set grammar; re-parsing yields the same set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[u64]| {
            xs.iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        let residues: Vec<u64> = self.residues().collect();
        let added: Vec<u64> = self.exceptions().filter(|e| e.1).map(|e| e.0).collect();
        let removed: Vec<u64> = self.exceptions().filter(|e| !e.1).map(|e| e.0).collect();
        if self.is_finite() {
            return write!(f, "finite{{{}}}", list(&added));
        }
        if self.is_cofinite() {
            return write!(f, "cofinite_except{{{}}}", list(&removed));
        }
        let mut out = format!("mod({},{{{}}})", self.modulus, list(&residues));
        if !added.is_empty() {
            out = format!("({out} | finite{{{}}})", list(&added));
        }
        if !removed.is_empty() {
            out = format!("({out} & !finite{{{}}})", list(&removed));
        }
        f.write_str(&out)
    }
}

/// Wire form `{"N":…,"m":…,"R":[…],"E":[[idx,bool],…]}`.
#[derive(Serialize, Deserialize)]
struct ExactRepr {
    #[serde(rename = "N")]
    threshold: u64,
    #[serde(rename = "m")]
    modulus: u64,
    #[serde(rename = "R")]
    residues: Vec<u64>,
    #[serde(rename = "E")]
    exceptions: Vec<(u64, bool)>,
}

impl Serialize for ExactSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ExactRepr {
            threshold: self.threshold(),
            modulus: self.modulus,
            residues: self.residues().collect(),
            exceptions: self.exceptions().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ExactRepr::deserialize(d)?;
        ExactSet::try_from(repr).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<ExactRepr> for ExactSet {
    type Error = IndexSetError;

    fn try_from(repr: ExactRepr) -> Result<Self, Self::Error> {
        if repr.modulus == 0 {
            return Err(IndexSetError::Malformed("modulus must be positive".into()));
        }
        if let Some(r) = repr.residues.iter().find(|&&r| r >= repr.modulus) {
            return Err(IndexSetError::Malformed(format!(
                "residue {r} is not below modulus {}",
                repr.modulus
            )));
        }
        if let Some((i, _)) = repr.exceptions.iter().find(|(i, _)| *i >= repr.threshold) {
            return Err(IndexSetError::Malformed(format!(
                "exception {i} is not below threshold {}",
                repr.threshold
            )));
        }
        let rule = ExactSet::periodic(repr.modulus, repr.residues.iter().copied());
        let overrides: std::collections::BTreeMap<u64, bool> =
            repr.exceptions.into_iter().collect();
        let mut flags = vec![false; repr.modulus as usize];
        for r in repr.residues {
            flags[r as usize] = true;
        }
        Ok(ExactSet::from_fn(repr.threshold, repr.modulus, flags, |n| {
            overrides.get(&n).copied().unwrap_or_else(|| rule.contains(n))
        }))
    }
}

/// A set known only below a horizon.
///
/// Membership bits are materialized once at construction. Identity for
/// caching purposes is the label plus the horizon.
#[derive(Clone)]
pub struct SampledSet {
    label: Arc<str>,
    bits: Arc<BitVec<u8, Lsb0>>,
}

impl SampledSet {
    pub fn from_fn(label: impl Into<String>, horizon: u64, member: impl Fn(u64) -> bool) -> Self {
        let bits: BitVec<u8, Lsb0> = (0..horizon).map(member).collect();
        SampledSet {
            label: Arc::from(label.into()),
            bits: Arc::new(bits),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn horizon(&self) -> u64 {
        self.bits.len() as u64
    }

    pub fn contains(&self, n: u64) -> Result<bool, IndexSetError> {
        self.bits
            .get(n as usize)
            .map(|b| *b)
            .ok_or(IndexSetError::BeyondHorizon { index: n, horizon: self.horizon() })
    }

    /// Members below the horizon, ascending.
    pub fn witnesses(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits.iter_ones().map(|i| i as u64)
    }

    pub fn complement(&self) -> Self {
        SampledSet {
            label: Arc::from(format!("!{}", self.label)),
            bits: Arc::new(!(*self.bits).clone()),
        }
    }

    fn combine(&self, other: &IndexSet, symbol: &str, op: impl Fn(bool, bool) -> bool) -> Self {
        let horizon = match other {
            IndexSet::Sampled(s) => self.horizon().min(s.horizon()),
            IndexSet::Exact(_) => self.horizon(),
        };
        let label = format!("({} {symbol} {})", self.label, other.label());
        SampledSet::from_fn(label, horizon, |n| {
            op(self.bits[n as usize], other.contains(n).unwrap_or(false))
        })
    }
}

impl PartialEq for SampledSet {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.bits == other.bits
    }
}

impl Eq for SampledSet {}

impl fmt::Debug for SampledSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledSet")
            .field("label", &self.label)
            .field("horizon", &self.horizon())
            .field("members", &self.bits.count_ones())
            .finish()
    }
}

/// Wire form `{"label":…,"H":…,"bits":"<hex>"}`.
#[derive(Serialize, Deserialize)]
struct SampledRepr {
    label: String,
    #[serde(rename = "H")]
    horizon: u64,
    bits: String,
}

impl Serialize for SampledSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SampledRepr {
            label: self.label.to_string(),
            horizon: self.horizon(),
            bits: hex::encode(self.bits.as_raw_slice()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SampledSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = SampledRepr::deserialize(d)?;
        let bytes = hex::decode(&repr.bits).map_err(serde::de::Error::custom)?;
        let mut bits = BitVec::<u8, Lsb0>::from_vec(bytes);
        if (bits.len() as u64) < repr.horizon {
            return Err(serde::de::Error::custom("bit string shorter than horizon"));
        }
        bits.truncate(repr.horizon as usize);
        Ok(SampledSet {
            label: Arc::from(repr.label),
            bits: Arc::new(bits),
        })
    }
}

/// A subset of ℕ: exact normal form or horizon-sampled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexSet {
    Exact(ExactSet),
    Sampled(SampledSet),
}

impl IndexSet {
    pub fn contains(&self, n: u64) -> Result<bool, IndexSetError> {
        match self {
            IndexSet::Exact(e) => Ok(e.contains(n)),
            IndexSet::Sampled(s) => s.contains(n),
        }
    }

    pub fn horizon(&self) -> Option<u64> {
        match self {
            IndexSet::Exact(_) => None,
            IndexSet::Sampled(s) => Some(s.horizon()),
        }
    }

    pub fn as_exact(&self) -> Option<&ExactSet> {
        match self {
            IndexSet::Exact(e) => Some(e),
            IndexSet::Sampled(_) => None,
        }
    }

    /// Printable description, also used as the identity of sampled sets.
    pub fn label(&self) -> String {
        match self {
            IndexSet::Exact(e) => e.to_string(),
            IndexSet::Sampled(s) => s.label().to_string(),
        }
    }

    pub fn complement(&self) -> IndexSet {
        match self {
            IndexSet::Exact(e) => IndexSet::Exact(e.complement()),
            IndexSet::Sampled(s) => IndexSet::Sampled(s.complement()),
        }
    }

    pub fn intersect(&self, other: &IndexSet) -> IndexSet {
        match (self, other) {
            (IndexSet::Exact(a), IndexSet::Exact(b)) => IndexSet::Exact(a.intersect(b)),
            (IndexSet::Sampled(a), b) => IndexSet::Sampled(a.combine(b, "&", |x, y| x && y)),
            (a, IndexSet::Sampled(b)) => IndexSet::Sampled(b.combine(a, "&", |x, y| x && y)),
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        match (self, other) {
            (IndexSet::Exact(a), IndexSet::Exact(b)) => IndexSet::Exact(a.union(b)),
            (IndexSet::Sampled(a), b) => IndexSet::Sampled(a.combine(b, "|", |x, y| x || y)),
            (a, IndexSet::Sampled(b)) => IndexSet::Sampled(b.combine(a, "|", |x, y| x || y)),
        }
    }

    pub fn is_finite_set(&self) -> Result<bool, IndexSetError> {
        self.as_exact()
            .map(ExactSet::is_finite)
            .ok_or(IndexSetError::UndecidableOnSampled)
    }

    pub fn is_cofinite_set(&self) -> Result<bool, IndexSetError> {
        self.as_exact()
            .map(ExactSet::is_cofinite)
            .ok_or(IndexSetError::UndecidableOnSampled)
    }

    pub fn nth_member(&self, k: u64) -> Result<u64, IndexSetError> {
        match self {
            IndexSet::Exact(e) => e.nth_member(k),
            IndexSet::Sampled(s) => {
                let mut found = 0;
                for w in s.witnesses() {
                    if found == k {
                        return Ok(w);
                    }
                    found += 1;
                }
                Err(if found == 0 {
                    IndexSetError::EmptySet
                } else {
                    IndexSetError::ExhaustedAtHorizon {
                        needed: k + 1,
                        found,
                        horizon: s.horizon(),
                    }
                })
            }
        }
    }
}

impl From<ExactSet> for IndexSet {
    fn from(e: ExactSet) -> Self {
        IndexSet::Exact(e)
    }
}

impl From<SampledSet> for IndexSet {
    fn from(s: SampledSet) -> Self {
        IndexSet::Sampled(s)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Residues `r` modulo `m` that are compatible with residue `s` modulo `d`.
pub(crate) fn compatible(m: u64, r: u64, d: u64, s: u64) -> bool {
    let g = gcd(m, d);
    r % g == s % g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn evens() -> ExactSet {
        ExactSet::periodic(2, [0])
    }

    #[test]
    fn complement_of_residue_class() {
        assert_eq!(evens().complement(), ExactSet::periodic(2, [1]));
        assert_eq!(ExactSet::all().complement(), ExactSet::empty());
    }

    #[test]
    fn double_complement_with_exception() {
        let base = ExactSet::periodic(3, [0]).union(&ExactSet::finite([5]));
        let back = base.complement().complement();
        assert_eq!(back, base);
        for n in 0..=100 {
            assert_eq!(back.contains(n), n % 3 == 0 || n == 5, "index {n}");
        }
    }

    #[test]
    fn intersections_by_crt() {
        let threes = ExactSet::periodic(3, [0]);
        assert_eq!(evens().intersect(&threes), ExactSet::periodic(6, [0]));
        assert_eq!(evens().intersect(&evens().complement()), ExactSet::empty());

        let a = ExactSet::residue_class(4, 1);
        let b = ExactSet::residue_class(6, 3);
        let fitted: Vec<u64> = (0..=200).filter(|&n| n % 4 == 1 && n % 6 == 3).collect();
        assert_eq!(fitted.first(), Some(&9));
        assert!(fitted.windows(2).all(|w| w[1] - w[0] == 12));
        assert_eq!(a.intersect(&b), ExactSet::residue_class(12, 9));
    }

    #[test]
    fn finiteness() {
        let f = ExactSet::finite([2, 5, 7]);
        assert!(f.is_finite());
        assert_eq!(f.threshold(), 8);
        assert_eq!(f.exceptions().count(), 3);
        assert!(ExactSet::cofinite_except([0]).is_cofinite());
        assert!(!evens().is_finite() && !evens().is_cofinite());
        let sampled = IndexSet::Sampled(SampledSet::from_fn("s", 10, |n| n < 3));
        assert_eq!(sampled.is_finite_set(), Err(IndexSetError::UndecidableOnSampled));
        assert_eq!(sampled.is_cofinite_set(), Err(IndexSetError::UndecidableOnSampled));
    }

    #[test]
    fn nth_members() {
        assert_eq!(evens().nth_member(3), Ok(6));
        let odds_without_one = ExactSet::periodic(2, [1]).intersect(&ExactSet::cofinite_except([1]));
        let brute: Vec<u64> = (0..=10).filter(|&n| n % 2 == 1 && n != 1).collect();
        assert_eq!(odds_without_one.nth_member(0), Ok(brute[0]));
        assert_eq!(odds_without_one.nth_member(0), Ok(3));
        assert_eq!(ExactSet::empty().nth_member(0), Err(IndexSetError::EmptySet));
        assert_eq!(
            ExactSet::finite([4, 9]).nth_member(2),
            Err(IndexSetError::TooFewMembers { k: 2, count: 2 })
        );
        let sampled = IndexSet::Sampled(SampledSet::from_fn("s", 10, |n| n % 4 == 0));
        assert_eq!(sampled.nth_member(2), Ok(8));
        assert!(matches!(
            sampled.nth_member(3),
            Err(IndexSetError::ExhaustedAtHorizon { needed: 4, found: 3, horizon: 10 })
        ));
    }

    #[test]
    fn canonical_forms_are_minimal() {
        let s = ExactSet::periodic(12, [0, 2, 4, 6, 8, 10]);
        assert_eq!(s.modulus(), 2);
        let t = ExactSet::from_fn(20, 1, vec![true], |_| true);
        assert_eq!(t.threshold(), 0);
        assert_eq!(t, ExactSet::all());
    }

    #[test]
    fn sampled_respects_horizon() {
        let s = SampledSet::from_fn("lt", 5, |n| n < 2);
        assert_eq!(s.contains(1), Ok(true));
        assert_eq!(s.contains(5), Err(IndexSetError::BeyondHorizon { index: 5, horizon: 5 }));
        let c = IndexSet::Sampled(s.clone()).complement();
        assert_eq!(c.horizon(), Some(5));
        let shorter = SampledSet::from_fn("x", 3, |_| true);
        let both = IndexSet::Sampled(s).intersect(&IndexSet::Sampled(shorter));
        assert_eq!(both.horizon(), Some(3));
    }

    #[test]
    fn serde_forms() {
        let s = ExactSet::periodic(3, [0]).union(&ExactSet::finite([5]));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"N":6,"m":3,"R":[0],"E":[[5,true]]}"#);
        let back: ExactSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"N":2,"m":3,"R":[0],"E":[[5,true]]}"#;
        assert!(serde_json::from_str::<ExactSet>(bad).is_err());

        let sampled = IndexSet::Sampled(SampledSet::from_fn("odd", 13, |n| n % 2 == 1));
        let json = serde_json::to_string(&sampled).unwrap();
        let back: IndexSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sampled);
    }

    #[test]
    fn compatibility_by_gcd() {
        assert!(compatible(4, 3, 6, 1));
        assert!(!compatible(4, 3, 6, 2));
        assert!(compatible(5, 4, 3, 2));
    }
}
