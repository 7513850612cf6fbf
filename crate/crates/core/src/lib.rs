//! Executable ultrapower arithmetic over the rationals.
//!
//! The crate builds a free ultrafilter on ℕ lazily, one decision at a time,
//! and uses it to compare classes of rational sequences. On top of that sit
//! the monotone-subsequence trichotomy, a peak-based cross-check, standard
//! parts, and diagonal witnesses for nested interval families.
//!
//! Module map:
//!
//! * [`index_sets`]: eventually periodic subsets of ℕ plus horizon-sampled sets.
//! * [`oracle`]: the partial ultrafilter (residue tower and decision ledger).
//! * [`ultrapower`]: sequence expressions, tame sign analysis, hyperrationals.
//! * [`monotone`]: trichotomy classification, extraction, peaks.
//! * [`saturation`]: interval sets, nested families, Cantor intersections.
//! * [`corpus`]: seeded generators for tame sequences and nested families.
//! * [`dsl`]: text grammars for sequences, index sets and interval families.

pub mod corpus;
pub mod dsl;
pub mod index_sets;
pub mod monotone;
pub mod oracle;
pub mod rational;
pub mod saturation;
pub mod ultrapower;

pub use index_sets::{ExactSet, IndexSet, IndexSetError, SampledSet};
pub use monotone::{Case, Direction, Extraction, MonotoneError, Trichotomy};
pub use oracle::{Decision, OracleError, OracleState, Reason, SharedOracle};
pub use rational::Rational;
pub use saturation::{Interval, IntervalSet, NestedFamily, SaturationError};
pub use ultrapower::{Hyper, SequenceExpr, SignSets, UltraError};
