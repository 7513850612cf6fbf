//! Small helpers around [`num::BigRational`].

use num::{BigInt, BigRational, One, Signed, Zero};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Exact textual form: `p` for integers, `p/q` otherwise.
pub fn format(q: &Rational) -> String {
    q.to_string()
}

/// Decimal approximation used for human-facing annotations only.
pub fn approx(q: &Rational) -> f64 {
    use num::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

/// Parses `p`, `p/q`, decimal (`0.25`) and scientific (`1e-9`, `2.5E3`)
/// literals into an exact rational. Signs are allowed on `p` only.
pub fn parse_literal(text: &str) -> Option<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_decimal(p.trim())?;
        let q = parse_decimal(q.trim())?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = match digits.split_once('.') {
        Some((w, f)) => (w, f),
        None => (digits, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{whole}{frac}");
    let numer: BigInt = if all_digits.is_empty() {
        BigInt::zero()
    } else {
        all_digits.parse().ok()?
    };
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = Rational::from_integer(numer);
    if scale >= 0 {
        value *= Rational::from_integer(num::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Sign as -1, 0 or 1.
pub fn sign(q: &Rational) -> i8 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

pub fn two() -> Rational {
    Rational::one() + Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        assert_eq!(parse_literal("3/4"), Some(ratio(3, 4)));
        assert_eq!(parse_literal("-6/8"), Some(ratio(-3, 4)));
        assert_eq!(parse_literal("0.25"), Some(ratio(1, 4)));
        assert_eq!(parse_literal("1e-9"), Some(ratio(1, 1_000_000_000)));
        assert_eq!(parse_literal("2.5E3"), Some(int(2500)));
        assert_eq!(parse_literal("1/0"), None);
        assert_eq!(parse_literal("abc"), None);
        assert_eq!(parse_literal(""), None);
    }

    #[test]
    fn exact_formatting() {
        assert_eq!(format(&ratio(2, 4)), "1/2");
        assert_eq!(format(&int(-7)), "-7");
    }
}
