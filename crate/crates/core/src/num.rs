//! Exact rational arithmetic helpers.
//!
//! All belief math in this crate runs on arbitrary-precision rationals so
//! feasibility decisions and invariants are noise-free; floating point only
//! appears in Monte-Carlo estimators and report output.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Shorthand for `n/d` as an exact rational.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

/// 2^-b as an exact rational.
pub fn pow2_neg(b: u32) -> Rat {
    Rat::new(BigInt::one(), BigInt::one() << b)
}

/// 2^b as an exact rational.
pub fn pow2(b: u32) -> Rat {
    Rat::from_integer(BigInt::one() << b)
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or("nan".parse().unwrap())
}

/// Parses "p/q", integer, or decimal literals ("0.25") into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::ConfigInvalid(format!("cannot parse rational from {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let num: BigInt = frac.parse().map_err(|_| bad())?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(Rat::from_integer(int) + Rat::new(num * sign, den));
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rat::from_integer(n))
}

/// Canonical "p/q" rendering (integers render without the denominator).
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest multiple of 2^-b, halves rounding up (deterministic).
pub fn round_to_grid(value: &Rat, b: u32) -> Rat {
    let scaled = value * pow2(b);
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let grid = if frac >= rat(1, 2) {
        floor + Rat::one()
    } else {
        floor
    };
    grid * pow2_neg(b)
}

/// |r| for rationals.
pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_decimal() {
        assert_eq!(parse_rat("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rat("-7").unwrap(), rat_int(-7));
        assert_eq!(parse_rat("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rat("-0.5").unwrap(), rat(-1, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn round_trip_format() {
        for s in ["2/3", "-5/7", "4", "0"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(parse_rat(&fmt_rat(&r)).unwrap(), r);
        }
    }

    #[test]
    fn grid_rounding() {
        // 0.3 at b=2 grid (quarters): 1.2 scaled, rounds to 1/4.
        assert_eq!(round_to_grid(&rat(3, 10), 2), rat(1, 4));
        // Ties round up: 3/8 at quarters -> 1/2.
        assert_eq!(round_to_grid(&rat(3, 8), 2), rat(1, 2));
    }
}
