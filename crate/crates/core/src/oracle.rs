//! A free ultrafilter on ℕ, built one decision at a time.
//!
//! Eventually periodic sets are decided by a residue tower: a compatible
//! choice of residue `r_m` for every modulus `m` queried so far. That choice
//! is a point of the profinite integers, and the sets it puts in the
//! ultrafilter are exactly those whose periodic rule contains `r_m`. Finite
//! sets always get 0 and cofinite sets always get 1, so the filter is free.
//!
//! Sampled sets cannot be decided symbolically. They are stipulated: the
//! oracle keeps a core, the intersection of every stipulated verdict-1 side,
//! and gives measure 1 to whichever side of the queried set meets the core in
//! more witnesses below the horizon. If neither side reaches the witness quota
//! the query fails with [`OracleError::AmbiguousAtHorizon`] instead of
//! guessing.
//!
//! The constructed ultrafilter depends on query order. Replaying the same
//! queries from the same state reproduces the same ledger.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::index_sets::{compatible, ExactSet, IndexSet, SampledSet, DEFAULT_HORIZON};

pub const DEFAULT_WITNESS_QUOTA: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("cannot decide {set}: best side has {best} witnesses below horizon {horizon}, quota is {quota}")]
    AmbiguousAtHorizon {
        set: String,
        horizon: u64,
        quota: u64,
        best: u64,
    },
    #[error("oracle invariant violated: {0}")]
    InconsistentLedger(String),
    #[error("residue {residue} mod {modulus} conflicts with committed residue {committed} mod {against}")]
    IncompatibleResidue {
        modulus: u64,
        residue: u64,
        against: u64,
        committed: u64,
    },
    #[error("residue {residue} mod {modulus} leaves only {witnesses} witnesses in the stipulated core")]
    ConflictsWithLedger {
        modulus: u64,
        residue: u64,
        witnesses: u64,
    },
    #[error("residue {residue} is not a residue modulo {modulus}")]
    InvalidResidue { modulus: u64, residue: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    Cofinite,
    Finite,
    Residue,
    Stipulated,
}

/// One ledger entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub set: IndexSet,
    pub verdict: u8,
    pub reason: Reason,
    pub witness_count: u64,
}

/// The partial ultrafilter.
#[derive(Clone, Debug)]
pub struct OracleState {
    tower: BTreeMap<u64, u64>,
    ledger: Vec<Decision>,
    horizon: u64,
    quota: u64,
    exact_cache: HashMap<ExactSet, usize>,
    sampled_cache: HashMap<(String, u64), usize>,
    // Intersection of the measure-1 sides of all stipulated decisions,
    // restricted to indices below the horizon.
    core: BitVec,
    stipulations: usize,
}

impl Default for OracleState {
    fn default() -> Self {
        Self::new(DEFAULT_HORIZON, DEFAULT_WITNESS_QUOTA)
    }
}

impl OracleState {
    pub fn new(horizon: u64, witness_quota: u64) -> Self {
        OracleState {
            tower: BTreeMap::new(),
            ledger: Vec::new(),
            horizon,
            quota: witness_quota,
            exact_cache: HashMap::new(),
            sampled_cache: HashMap::new(),
            core: bitvec![1; horizon as usize],
            stipulations: 0,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn witness_quota(&self) -> u64 {
        self.quota
    }

    pub fn tower(&self) -> &BTreeMap<u64, u64> {
        &self.tower
    }

    pub fn ledger(&self) -> &[Decision] {
        &self.ledger
    }

    /// An independent copy; later queries on either side do not leak.
    pub fn fork(&self) -> Self {
        self.clone()
    }

    /// Decides `s`, committing residues or stipulating as needed.
    pub fn measure(&mut self, s: &IndexSet) -> Result<u8, OracleError> {
        match s {
            IndexSet::Exact(e) => self.measure_exact(e),
            IndexSet::Sampled(sampled) => self.measure_sampled(sampled),
        }
    }

    fn measure_exact(&mut self, e: &ExactSet) -> Result<u8, OracleError> {
        if let Some(&i) = self.exact_cache.get(e) {
            return Ok(self.ledger[i].verdict);
        }
        let (verdict, reason) = if e.is_finite() {
            (0, Reason::Finite)
        } else if e.is_cofinite() {
            (1, Reason::Cofinite)
        } else {
            let r = self.residue(e.modulus())?;
            (u8::from(e.has_residue(r)), Reason::Residue)
        };
        self.exact_cache.insert(e.clone(), self.ledger.len());
        self.ledger.push(Decision {
            set: IndexSet::Exact(e.clone()),
            verdict,
            reason,
            witness_count: 0,
        });
        Ok(verdict)
    }

    fn measure_sampled(&mut self, s: &SampledSet) -> Result<u8, OracleError> {
        let key = (s.label().to_string(), s.horizon());
        if let Some(&i) = self.sampled_cache.get(&key) {
            return Ok(self.ledger[i].verdict);
        }
        let limit = s.horizon().min(self.horizon);
        let (mut inside, mut outside) = (0u64, 0u64);
        for n in 0..limit {
            if self.in_core(n) {
                if s.contains(n).unwrap_or(false) {
                    inside += 1;
                } else {
                    outside += 1;
                }
            }
        }
        let verdict = u8::from(inside >= outside);
        let best = inside.max(outside);
        if best < self.quota {
            return Err(OracleError::AmbiguousAtHorizon {
                set: s.label().to_string(),
                horizon: limit,
                quota: self.quota,
                best,
            });
        }
        self.apply_stipulation(s, verdict);
        self.sampled_cache.insert(key, self.ledger.len());
        self.ledger.push(Decision {
            set: IndexSet::Sampled(s.clone()),
            verdict,
            reason: Reason::Stipulated,
            witness_count: best,
        });
        let remaining = self.core_witnesses();
        if remaining < self.quota {
            return Err(OracleError::InconsistentLedger(format!(
                "core shrank to {remaining} witnesses after stipulating {}",
                s.label()
            )));
        }
        Ok(verdict)
    }

    fn apply_stipulation(&mut self, s: &SampledSet, verdict: u8) {
        let limit = s.horizon().min(self.horizon) as usize;
        for n in 0..self.core.len() {
            let keep = n < limit && s.contains(n as u64).unwrap_or(false) == (verdict == 1);
            if !keep {
                self.core.set(n, false);
            }
        }
        self.stipulations += 1;
    }

    fn in_tower_class(&self, n: u64) -> bool {
        self.tower.iter().all(|(&m, &r)| n % m == r)
    }

    fn in_core(&self, n: u64) -> bool {
        self.core[n as usize] && self.in_tower_class(n)
    }

    fn core_witnesses(&self) -> u64 {
        (0..self.horizon).filter(|&n| self.in_core(n)).count() as u64
    }

    fn class_witnesses(&self, m: u64, r: u64) -> u64 {
        (0..self.horizon)
            .filter(|&n| n % m == r && self.in_core(n))
            .count() as u64
    }

    fn first_conflict(&self, m: u64, r: u64) -> Option<(u64, u64)> {
        self.tower
            .iter()
            .find(|(&d, &s)| !compatible(m, r, d, s))
            .map(|(&d, &s)| (d, s))
    }

    /// The committed residue modulo `m`, committing the divisor chain
    /// bottom-up with the smallest admissible residue at each step.
    pub fn residue(&mut self, m: u64) -> Result<u64, OracleError> {
        if m <= 1 {
            return Ok(0);
        }
        if let Some(&r) = self.tower.get(&m) {
            return Ok(r);
        }
        for d in (2..=m).filter(|d| m % d == 0) {
            if self.tower.contains_key(&d) {
                continue;
            }
            let mut best = 0;
            let mut chosen = None;
            for r in 0..d {
                if self.first_conflict(d, r).is_some() {
                    continue;
                }
                if self.stipulations == 0 {
                    chosen = Some(r);
                    break;
                }
                let w = self.class_witnesses(d, r);
                best = best.max(w);
                if w >= self.quota {
                    chosen = Some(r);
                    break;
                }
            }
            match chosen {
                Some(r) => {
                    self.tower.insert(d, r);
                }
                None if self.stipulations > 0 => {
                    return Err(OracleError::AmbiguousAtHorizon {
                        set: format!("residue class modulo {d}"),
                        horizon: self.horizon,
                        quota: self.quota,
                        best,
                    })
                }
                None => {
                    return Err(OracleError::InconsistentLedger(format!(
                        "no residue modulo {d} is compatible with the tower"
                    )))
                }
            }
        }
        Ok(self.tower[&m])
    }

    /// Pins `r_m = r` and every divisor residue it implies.
    pub fn force_residue(&mut self, m: u64, r: u64) -> Result<(), OracleError> {
        if m == 0 || r >= m {
            return Err(OracleError::InvalidResidue { modulus: m, residue: r });
        }
        if let Some((against, committed)) = self.first_conflict(m, r) {
            return Err(OracleError::IncompatibleResidue {
                modulus: m,
                residue: r,
                against,
                committed,
            });
        }
        if self.stipulations > 0 {
            let witnesses = self.class_witnesses(m, r);
            if witnesses < self.quota {
                return Err(OracleError::ConflictsWithLedger {
                    modulus: m,
                    residue: r,
                    witnesses,
                });
            }
        }
        for d in (2..=m).filter(|d| m % d == 0) {
            self.tower.insert(d, r % d);
        }
        Ok(())
    }

    /// Re-issues `queries` in order and returns the verdicts.
    pub fn replay<'a>(
        &mut self,
        queries: impl IntoIterator<Item = &'a IndexSet>,
    ) -> Result<Vec<u8>, OracleError> {
        queries.into_iter().map(|q| self.measure(q)).collect()
    }

    /// SHA-256 of the serialized ledger, hex encoded.
    pub fn ledger_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.ledger).expect("ledger serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Checks tower compatibility, residue verdicts, and the core quota.
    pub fn verify(&self) -> Result<(), OracleError> {
        for (&m, &r) in &self.tower {
            if r >= m {
                return Err(OracleError::InconsistentLedger(format!("r_{m} = {r} out of range")));
            }
            if let Some((d, s)) = self.first_conflict(m, r) {
                return Err(OracleError::InconsistentLedger(format!(
                    "r_{m} = {r} incompatible with r_{d} = {s}"
                )));
            }
        }
        for decision in &self.ledger {
            let expected = match (&decision.set, decision.reason) {
                (IndexSet::Exact(e), Reason::Finite) if e.is_finite() => 0,
                (IndexSet::Exact(e), Reason::Cofinite) if e.is_cofinite() => 1,
                (IndexSet::Exact(e), Reason::Residue) => match self.tower.get(&e.modulus()) {
                    Some(&r) => u8::from(e.has_residue(r)),
                    None => {
                        return Err(OracleError::InconsistentLedger(format!(
                            "no residue committed for modulus {}",
                            e.modulus()
                        )))
                    }
                },
                (IndexSet::Sampled(_), Reason::Stipulated) => decision.verdict,
                _ => {
                    return Err(OracleError::InconsistentLedger(format!(
                        "reason {:?} does not fit {}",
                        decision.reason, decision.set
                    )))
                }
            };
            if expected != decision.verdict {
                return Err(OracleError::InconsistentLedger(format!(
                    "ledger verdict for {} disagrees with the tower",
                    decision.set
                )));
            }
        }
        if self.stipulations > 0 && self.core_witnesses() < self.quota {
            return Err(OracleError::InconsistentLedger("stipulated core below quota".into()));
        }
        Ok(())
    }
}

/// Wire form `{"tower":[[m,r],…],"ledger":[…],"H":…,"W":…}`.
#[derive(Serialize, Deserialize)]
struct StateRepr {
    tower: Vec<(u64, u64)>,
    ledger: Vec<Decision>,
    #[serde(rename = "H")]
    horizon: u64,
    #[serde(rename = "W")]
    quota: u64,
}

impl Serialize for OracleState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StateRepr {
            tower: self.tower.iter().map(|(&m, &r)| (m, r)).collect(),
            ledger: self.ledger.clone(),
            horizon: self.horizon,
            quota: self.quota,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OracleState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = StateRepr::deserialize(d)?;
        let mut state = OracleState::new(repr.horizon, repr.quota);
        state.tower = repr.tower.into_iter().collect();
        for decision in repr.ledger {
            match &decision.set {
                IndexSet::Exact(e) => {
                    state.exact_cache.insert(e.clone(), state.ledger.len());
                }
                IndexSet::Sampled(s) => {
                    state.apply_stipulation(s, decision.verdict);
                    state
                        .sampled_cache
                        .insert((s.label().to_string(), s.horizon()), state.ledger.len());
                }
            }
            state.ledger.push(decision);
        }
        state.verify().map_err(serde::de::Error::custom)?;
        Ok(state)
    }
}

/// A handle shared by every [`crate::Hyper`] bound to the same oracle.
///
/// Queries through one handle are serialized by the mutex; two handles are
/// the same oracle only if they point at the same state.
#[derive(Clone, Debug)]
pub struct SharedOracle(Arc<Mutex<OracleState>>);

impl SharedOracle {
    pub fn new(state: OracleState) -> Self {
        SharedOracle(Arc::new(Mutex::new(state)))
    }

    pub fn fresh() -> Self {
        Self::new(OracleState::default())
    }

    pub fn lock(&self) -> MutexGuard<'_, OracleState> {
        self.0.lock().expect("oracle mutex poisoned")
    }

    pub fn same_as(&self, other: &SharedOracle) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn snapshot(&self) -> OracleState {
        self.lock().clone()
    }

    pub fn fork(&self) -> SharedOracle {
        Self::new(self.snapshot())
    }

    pub fn measure(&self, s: &IndexSet) -> Result<u8, OracleError> {
        self.lock().measure(s)
    }

    pub fn residue(&self, m: u64) -> Result<u64, OracleError> {
        self.lock().residue(m)
    }

    pub fn force_residue(&self, m: u64, r: u64) -> Result<(), OracleError> {
        self.lock().force_residue(m, r)
    }
}
