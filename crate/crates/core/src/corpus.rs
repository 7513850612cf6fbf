//! Seeded generators of tame sequences and nested interval families, used
//! by the property suites and handy for benchmarking.
//!
//! Generated sequences are defined at every index: denominators are built
//! from factors such as `n + k` with `k ≥ 1` or nonzero periodic patterns.
//! Periods stay within `{1, 2, 3, 4, 6}` so combined moduli stay small.

use rand::Rng;

use crate::rational::{int, ratio, Rational};
use crate::saturation::{NestedFamily, SymbolicInterval};
use crate::ultrapower::SequenceExpr;

const PERIODS: [usize; 5] = [1, 2, 3, 4, 6];

/// A small rational `p/q` with `|p| ≤ 5`, `1 ≤ q ≤ 4`.
pub fn small_rational(rng: &mut impl Rng) -> Rational {
    ratio(rng.gen_range(-5..=5), rng.gen_range(1..=4))
}

fn nonzero_rational(rng: &mut impl Rng) -> Rational {
    let p = rng.gen_range(1..=5) * if rng.gen_bool(0.5) { 1 } else { -1 };
    ratio(p, rng.gen_range(1..=4))
}

fn pattern(rng: &mut impl Rng, nonzero: bool) -> Vec<Rational> {
    let len = PERIODS[rng.gen_range(0..PERIODS.len())];
    (0..len)
        .map(|_| if nonzero { nonzero_rational(rng) } else { small_rational(rng) })
        .collect()
}

/// A sequence that never vanishes.
fn denominator(rng: &mut impl Rng) -> SequenceExpr {
    let n = SequenceExpr::index;
    match rng.gen_range(0..4) {
        0 => n() + SequenceExpr::Const(int(rng.gen_range(1..=5))),
        1 => n().pow(2) + SequenceExpr::Const(int(rng.gen_range(1..=5))),
        2 => SequenceExpr::periodic(pattern(rng, true)),
        _ => (n() + SequenceExpr::int(1)) * (n() + SequenceExpr::Const(int(rng.gen_range(2..=6)))),
    }
}

fn leaf(rng: &mut impl Rng) -> SequenceExpr {
    let n = SequenceExpr::index;
    match rng.gen_range(0..5) {
        0 => SequenceExpr::Const(small_rational(rng)),
        1 => n(),
        2 => SequenceExpr::periodic(pattern(rng, false)),
        3 => SequenceExpr::Const(small_rational(rng)) / denominator(rng),
        _ => n() * SequenceExpr::Const(nonzero_rational(rng)) / denominator(rng),
    }
}

/// A random tame sequence of nesting depth at most `depth`.
pub fn tame_sequence(rng: &mut impl Rng, depth: u32) -> SequenceExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        return leaf(rng);
    }
    let d = depth - 1;
    match rng.gen_range(0..8) {
        0 => tame_sequence(rng, d) + tame_sequence(rng, d),
        1 => tame_sequence(rng, d) - tame_sequence(rng, d),
        2 => tame_sequence(rng, d) * tame_sequence(rng, d),
        3 => tame_sequence(rng, d) / denominator(rng),
        4 => -tame_sequence(rng, d),
        5 => tame_sequence(rng, d).pow(rng.gen_range(1..=3)),
        6 => {
            let modulus = rng.gen_range(2..=4);
            let residue = rng.gen_range(0..modulus);
            SequenceExpr::if_mod(modulus, residue, tame_sequence(rng, d), tame_sequence(rng, d))
        }
        _ => {
            let len = rng.gen_range(1..=6);
            let values = (0..len).map(|_| small_rational(rng)).collect();
            SequenceExpr::prefix(values, tame_sequence(rng, d))
        }
    }
}

/// A nested family of closed intervals shrinking onto a random
/// `[a, b]`, with endpoints `a − s/(n+k)` and `b + t/(n+j)`.
pub fn shrinking_family(rng: &mut impl Rng, depth: u64) -> NestedFamily {
    let a = small_rational(rng);
    let b = &a + ratio(rng.gen_range(0..=3), rng.gen_range(1..=4));
    let lo = SequenceExpr::Const(a) - slack(rng);
    let hi = SequenceExpr::Const(b) + slack(rng);
    NestedFamily::symbolic(vec![SymbolicInterval::new(lo, hi)], depth)
}

fn slack(rng: &mut impl Rng) -> SequenceExpr {
    let scale = SequenceExpr::Const(ratio(rng.gen_range(1..=5), rng.gen_range(1..=3)));
    let shift = SequenceExpr::Const(int(rng.gen_range(1..=4)));
    scale / (SequenceExpr::index() + shift)
}

/// A nested family of interval unions given level by level: each level
/// keeps a random closed subinterval of every component of the previous one
/// and drops components at random, keeping at least one.
pub fn random_nested_levels(rng: &mut impl Rng, depth: u64) -> NestedFamily {
    use crate::saturation::{Interval, IntervalSet};
    let start = small_rational(rng);
    let mut components: Vec<(Rational, Rational)> = (0..rng.gen_range(1..=3))
        .map(|k| {
            let lo = &start + int(3 * k);
            let hi = &lo + ratio(rng.gen_range(1..=8), rng.gen_range(1..=3));
            (lo, hi)
        })
        .collect();
    let mut levels = Vec::with_capacity(depth as usize);
    for _ in 0..depth {
        levels.push(IntervalSet::new(components.iter().map(|(a, b)| Interval::new(a.clone(), b.clone()))));
        let mut next = Vec::new();
        for (lo, hi) in &components {
            let width = hi - lo;
            let cut_lo = lo + &width * ratio(rng.gen_range(0..=3), 8);
            let cut_hi = hi - &width * ratio(rng.gen_range(0..=3), 8);
            next.push((cut_lo, cut_hi));
        }
        if next.len() > 1 && rng.gen_bool(0.2) {
            next.remove(rng.gen_range(0..next.len()));
        }
        components = next;
    }
    NestedFamily::from_levels(levels)
}
