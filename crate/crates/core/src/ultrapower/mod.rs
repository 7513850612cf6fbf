//! The ultrapower `*ℚ = ℚ^ℕ / 𝒰`.
//!
//! Sequences are [`SequenceExpr`] trees evaluated exactly. Ring operations
//! on classes are termwise and never touch the oracle; equality and order go
//! through the sign sets of a difference, measured by the oracle bound to
//! the [`Hyper`] values involved.

mod expr;
mod hyper;
mod poly;
mod tame;

use thiserror::Error;

pub use expr::SequenceExpr;
pub use hyper::{default_eps, default_schedule, Hyper, StandardPart, DEFAULT_EPS_DENOMINATOR};
pub use tame::Germ;

use crate::index_sets::{IndexSet, SampledSet};
use crate::oracle::OracleError;
use crate::rational::sign;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UltraError {
    #[error("sequence is undefined at index {index}")]
    UndefinedAtIndex { index: u64 },
    #[error("operands are bound to different oracles")]
    MixedOracles,
    #[error("the class is zero and has no inverse")]
    DivisionByZeroClass,
    #[error("no bound in the schedule (up to {largest}) decides finiteness")]
    NotDecidedAtBound { largest: String },
    #[error("the class is not finite")]
    NotFinite,
    #[error("the sequence is undefined on a set of measure 1")]
    UndefinedClass,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// `({n : e_n < 0}, {n : e_n = 0}, {n : e_n > 0})`. Indices where `e` is
/// undefined belong to none of the three.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignSets {
    pub negative: IndexSet,
    pub zero: IndexSet,
    pub positive: IndexSet,
}

impl SignSets {
    pub fn defined(&self) -> IndexSet {
        self.negative.union(&self.zero).union(&self.positive)
    }

    pub fn is_exact(&self) -> bool {
        self.negative.as_exact().is_some()
    }
}

impl SequenceExpr {
    /// Sign sets, exact for tame expressions and sampled below `horizon`
    /// otherwise.
    pub fn sign_sets(&self, horizon: u64) -> SignSets {
        if let Some([negative, zero, positive]) =
            tame::reduce(self).and_then(|form| tame::exact_sign_sets(self, &form))
        {
            return SignSets {
                negative: negative.into(),
                zero: zero.into(),
                positive: positive.into(),
            };
        }
        let signs: Vec<Option<i8>> = (0..horizon)
            .map(|n| self.eval(n).ok().map(|v| sign(&v)))
            .collect();
        let part = |name: &str, target: i8| {
            IndexSet::Sampled(SampledSet::from_fn(format!("{name}⟨{self}⟩"), horizon, |n| {
                signs[n as usize] == Some(target)
            }))
        };
        SignSets {
            negative: part("neg", -1),
            zero: part("zero", 0),
            positive: part("pos", 1),
        }
    }

    /// Indices where every term is defined.
    pub fn defined_set(&self, horizon: u64) -> IndexSet {
        self.sign_sets(horizon).defined()
    }

    /// Whether sign sets come out exact.
    pub fn is_tame(&self) -> bool {
        tame::reduce(self).is_some_and(|form| tame::exact_sign_sets(self, &form).is_some())
    }

    /// Modulus of the piecewise rational form, when tame.
    pub fn tame_modulus(&self) -> Option<u64> {
        tame::reduce(self).map(|f| f.modulus)
    }

    /// Germ at infinity along residue class `residue` of [`Self::tame_modulus`].
    pub fn germ_on_class(&self, residue: u64) -> Option<Germ> {
        tame::reduce(self).map(|f| f.class(residue).germ())
    }
}
