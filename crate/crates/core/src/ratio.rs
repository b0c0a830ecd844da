//! Exact rational helpers shared by the planners.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// `max(v, 0)`.
pub fn pos(v: Rational) -> Rational {
    if v.is_negative() {
        Rational::zero()
    } else {
        v
    }
}

pub fn floor_i64(v: &Rational) -> i64 {
    v.floor().to_integer().to_i64().expect("floor fits in i64")
}

pub fn ceil_i64(v: &Rational) -> i64 {
    v.ceil().to_integer().to_i64().expect("ceil fits in i64")
}

pub fn is_integer(v: &Rational) -> bool {
    v.is_integer()
}

pub fn in_unit_interval(v: &Rational) -> bool {
    !v.is_negative() && *v <= Rational::one()
}

pub fn to_f64(v: &Rational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// `"p/q"`, or `"p"` for integers.
pub fn to_fraction_string(v: &Rational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// `"p/q (d.dddd)"` for human-facing output.
pub fn describe(v: &Rational) -> String {
    format!("{} ({:.4})", to_fraction_string(v), to_f64(v))
}

/// Parses `"3/7"`, `"-2"`, `"0.37"` or `"1e-2"`-free decimals exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidConstraints(format!("cannot parse {s:?} as an exact number"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, fraction) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && fraction.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(fraction.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{fraction}");
    let numer: BigInt = digits.parse().map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), fraction.len());
    let v = Rational::new(numer, denom);
    Ok(if neg { -v } else { v })
}

/// Least common multiple of the denominators of `values`.
pub fn lcm_denominators<'a, I: IntoIterator<Item = &'a Rational>>(values: I) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Truncates to `digits` decimal places.
pub fn truncate_decimal(v: &Rational, digits: u32) -> Rational {
    let scale = Rational::from_integer(num_traits::pow(BigInt::from(10), digits as usize));
    (v * &scale).trunc() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.37").unwrap(), frac(37, 100));
        assert_eq!(parse_rational("430/37").unwrap(), frac(430, 37));
        assert_eq!(parse_rational("1").unwrap(), int(1));
        assert_eq!(parse_rational(".5").unwrap(), frac(1, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), frac(-1, 4));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1e-3").is_err());
    }

    #[test]
    fn fraction_strings() {
        assert_eq!(to_fraction_string(&frac(860, 100)), "43/5");
        assert_eq!(to_fraction_string(&int(4)), "4");
        assert_eq!(describe(&frac(154, 25)), "154/25 (6.1600)");
    }

    #[test]
    fn floor_ceil_truncate() {
        let k = frac(100, 37);
        assert_eq!(floor_i64(&k), 2);
        assert_eq!(ceil_i64(&k), 3);
        assert_eq!(truncate_decimal(&k, 1), frac(27, 10));
        assert_eq!(truncate_decimal(&int(3), 1), int(3));
        assert_eq!(pos(frac(-1, 3)), int(0));
    }
}
