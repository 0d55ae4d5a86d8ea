//! Scalar fields: exact rationals (the default) and binary floats.
//!
//! Every algorithm in the crate is generic over [`Field`]. The rational
//! implementation is exact; the float implementation treats magnitudes at or
//! below [`FLOAT_TOLERANCE`] (relative to the operands' scale) as zero.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar; always stored in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Comparison tolerance for float mode, 2^-40.
pub const FLOAT_TOLERANCE: f64 = 9.094947017729282e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarMode {
    Rational,
    Float,
}

impl Display for ScalarMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarMode::Rational => f.write_str("rational"),
            ScalarMode::Float => f.write_str("float"),
        }
    }
}

pub trait Field:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const MODE: ScalarMode;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    /// `n / d`; panics if `d == 0`.
    fn from_ratio(n: i64, d: i64) -> Self;
    /// `2^exp`, exact in rational mode.
    fn pow2(exp: i32) -> Self;
    fn magnitude(&self) -> Self;
    /// Exact zero test in rational mode; `|x| <= tau` in float mode.
    fn is_zero(&self) -> bool;
    /// `|self| <= tau * max(1, |scale|)` in float mode, exact zero test otherwise.
    fn negligible_against(&self, scale: &Self) -> bool;
    fn to_f64(&self) -> f64;
    /// Canonical text form: `p/q` for rationals, shortest round-trip decimal for floats.
    fn canonical(&self) -> String;
    fn parse_scalar(s: &str) -> Result<Self>;

    fn is_exact() -> bool {
        Self::MODE == ScalarMode::Rational
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn binomial(n: u64, k: u64) -> Self {
        if k > n {
            return Self::zero();
        }
        let mut acc = Self::one();
        for i in 0..k {
            acc = acc * Self::from_i64((n - i) as i64) / Self::from_i64((i + 1) as i64);
        }
        acc
    }
}

impl Field for Rational {
    const MODE: ScalarMode = ScalarMode::Rational;

    fn zero() -> Self {
        Zero::zero()
    }

    fn one() -> Self {
        One::one()
    }

    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn pow2(exp: i32) -> Self {
        let p = BigInt::one() << exp.unsigned_abs();
        if exp >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    }

    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn negligible_against(&self, _scale: &Self) -> bool {
        Zero::is_zero(self)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn canonical(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn parse_scalar(s: &str) -> Result<Self> {
        parse_rational(s)
    }
}

impl Field for f64 {
    const MODE: ScalarMode = ScalarMode::Float;

    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_i64(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        n as f64 / d as f64
    }

    fn pow2(exp: i32) -> Self {
        2f64.powi(exp)
    }

    fn magnitude(&self) -> Self {
        f64::abs(*self)
    }

    fn is_zero(&self) -> bool {
        f64::abs(*self) <= FLOAT_TOLERANCE
    }

    fn negligible_against(&self, scale: &Self) -> bool {
        f64::abs(*self) <= FLOAT_TOLERANCE * f64::abs(*scale).max(1.0)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn canonical(&self) -> String {
        // Display for f64 is the shortest string that round-trips.
        format!("{self}")
    }

    fn parse_scalar(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: f64 = n.trim().parse().map_err(|_| Error::Parse(format!("bad float numerator in {s:?}")))?;
            let d: f64 = d.trim().parse().map_err(|_| Error::Parse(format!("bad float denominator in {s:?}")))?;
            if d == 0.0 {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(n / d);
        }
        s.parse().map_err(|_| Error::Parse(format!("bad float {s:?}")))
    }
}

/// Parses `p/q`, an integer, or a finite decimal (`-0.125`) into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty scalar".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d = BigInt::from_str(d.trim()).map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad decimal {s:?}")));
        }
        let n = BigInt::from_str(&digits).map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(n, d);
        return Ok(if negative { -r } else { r });
    }
    BigInt::from_str(s)
        .map(BigRational::from_integer)
        .map_err(|_| Error::Parse(format!("bad rational {s:?}")))
}

/// Serde adapters writing scalars in canonical text form.
pub mod text {
    use super::Field;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Field, Z: Serializer>(v: &S, z: Z) -> Result<Z::Ok, Z::Error> {
        z.serialize_str(&v.canonical())
    }

    pub fn deserialize<'de, S: Field, D: Deserializer<'de>>(d: D) -> Result<S, D::Error> {
        let s = String::deserialize(d)?;
        S::parse_scalar(&s).map_err(D::Error::custom)
    }
}

pub mod text_vec {
    use super::Field;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Field, Z: Serializer>(v: &[S], z: Z) -> Result<Z::Ok, Z::Error> {
        v.iter().map(Field::canonical).collect::<Vec<_>>().serialize(z)
    }

    pub fn deserialize<'de, S: Field, D: Deserializer<'de>>(d: D) -> Result<Vec<S>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| S::parse_scalar(s).map_err(D::Error::custom))
            .collect()
    }
}

pub mod text_vec2 {
    use super::Field;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Field, Z: Serializer>(v: &[Vec<S>], z: Z) -> Result<Z::Ok, Z::Error> {
        v.iter()
            .map(|row| row.iter().map(Field::canonical).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(z)
    }

    pub fn deserialize<'de, S: Field, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<S>>, D::Error> {
        Vec::<Vec<String>>::deserialize(d)?
            .iter()
            .map(|row| row.iter().map(|s| S::parse_scalar(s).map_err(D::Error::custom)).collect())
            .collect()
    }
}

/// Shorthand for building exact test and example values.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_canonical_form() {
        assert_eq!(q(2, -4).canonical(), "-1/2");
        assert_eq!(q(3, 1).canonical(), "3/1");
        assert_eq!(q(0, 5).canonical(), "0/1");
    }

    #[test]
    fn rational_parsing_accepts_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("6/-8").unwrap(), q(-3, 4));
        assert_eq!(parse_rational("7").unwrap(), q(7, 1));
        assert_eq!(parse_rational("-0.125").unwrap(), q(-1, 8));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn float_round_trip() {
        for x in [0.1, -2.5e-17, 1.0 / 3.0, 12345.678] {
            let s = x.canonical();
            assert_eq!(f64::parse_scalar(&s).unwrap(), x);
        }
    }

    #[test]
    fn pow2_and_binomial() {
        assert_eq!(Rational::pow2(-3), q(1, 8));
        assert_eq!(Rational::pow2(4), q(16, 1));
        assert_eq!(Rational::binomial(6, 2), q(15, 1));
        assert_eq!(Rational::binomial(3, 5), q(0, 1));
    }

    #[test]
    fn float_zero_uses_tolerance() {
        assert!(Field::is_zero(&1e-13));
        assert!(!Field::is_zero(&1e-11));
        assert!(1e-6.negligible_against(&1e7));
    }
}
