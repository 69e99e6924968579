//! Exact rational scalars.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::{Error, Result};

/// Exact rational number used for every field component and matrix entry.
pub type Q = BigRational;

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn frac(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Parses `"p/q"` or `"p"`.
pub fn parse(text: &str) -> Result<Q> {
    let bad = || Error::invalid("rational", format!("cannot parse `{text}`"));
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(text.parse().map_err(|_| bad())?)),
    }
}

/// Formats as `"p/q"`, always with an explicit denominator.
pub fn format(value: &Q) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn to_f64(value: &Q) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}

/// Uniform-ish random rational with `|num| <= max_num` and `1 <= den <= max_den`.
pub fn random<R: Rng + ?Sized>(rng: &mut R, max_num: i64, max_den: i64) -> Q {
    let num = rng.random_range(-max_num..=max_num);
    let den = rng.random_range(1..=max_den);
    frac(num, den)
}

/// Random nonzero rational.
pub fn random_nonzero<R: Rng + ?Sized>(rng: &mut R, max_num: i64, max_den: i64) -> Q {
    loop {
        let value = random(rng, max_num, max_den);
        if !value.is_zero() {
            return value;
        }
    }
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<Q> {
    (0..len).map(|_| random(rng, 5, 4)).collect()
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn is_zero_vector(v: &[Q]) -> bool {
    v.iter().all(Zero::is_zero)
}

pub fn abs(value: &Q) -> Q {
    value.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse("-1/2").unwrap(), frac(-1, 2));
        assert_eq!(parse("3").unwrap(), int(3));
        assert_eq!(parse(" 4/8 ").unwrap(), frac(1, 2));
        assert_eq!(format(&frac(-2, 4)), "-1/2");
        assert_eq!(format(&int(5)), "5/1");
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }
}
