//! Exact rational arithmetic and the extended time axis `[0, ∞]`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

pub type Rational = BigRational;

/// `n/d` as an exact rational. Panics on `d == 0`.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Always emits `p/q`, including for integers (`3/1`).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational, ParseError> {
    let trimmed = s.trim();
    Rational::from_str(trimmed).map_err(|_| ParseError::Rational(s.to_string()))
}

pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Best rational with denominator `den` for a float; used only at the
/// float/exact boundary (scenario files, demo sliders).
pub fn from_f64_rounded(x: f64, den: i64) -> Rational {
    q((x * den as f64).round() as i64, den)
}

pub fn abs_diff(a: &Rational, b: &Rational) -> Rational {
    (a - b).abs()
}

/// serde adapter: `Rational` <-> `"p/q"`.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = String::deserialize(d)?;
        parse_rational(&raw).map_err(serde::de::Error::custom)
    }
}

/// serde adapter for `Vec<Rational>`.
pub mod serde_q_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&format_rational(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// A point of `[0, ∞]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TimePoint {
    Finite(Rational),
    Infinity,
}

impl TimePoint {
    pub fn finite(r: Rational) -> Self {
        TimePoint::Finite(r)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, TimePoint::Finite(_))
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            TimePoint::Finite(r) => Some(r),
            TimePoint::Infinity => None,
        }
    }

    /// `self <= t` for a finite `t`.
    pub fn le(&self, t: &Rational) -> bool {
        match self {
            TimePoint::Finite(r) => r <= t,
            TimePoint::Infinity => false,
        }
    }

    pub fn lt(&self, t: &Rational) -> bool {
        match self {
            TimePoint::Finite(r) => r < t,
            TimePoint::Infinity => false,
        }
    }

    pub fn min(a: &TimePoint, b: &TimePoint) -> TimePoint {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn max(a: &TimePoint, b: &TimePoint) -> TimePoint {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

impl PartialOrd for TimePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TimePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (TimePoint::Finite(a), TimePoint::Finite(b)) => a.cmp(b),
            (TimePoint::Finite(_), TimePoint::Infinity) => Ordering::Less,
            (TimePoint::Infinity, TimePoint::Finite(_)) => Ordering::Greater,
            (TimePoint::Infinity, TimePoint::Infinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimePoint::Finite(r) => write!(f, "{}", format_rational(r)),
            TimePoint::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for TimePoint {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "Infinity" | "infinity" | "∞" => Ok(TimePoint::Infinity),
            other => parse_rational(other).map(TimePoint::Finite),
        }
    }
}

impl Serialize for TimePoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_dominates_every_finite_time() {
        assert!(TimePoint::Infinity > TimePoint::Finite(int(1_000_000)));
        assert!(TimePoint::Finite(q(1, 3)) < TimePoint::Finite(q(1, 2)));
        assert_eq!(
            TimePoint::min(&TimePoint::Infinity, &TimePoint::Finite(zero())),
            TimePoint::Finite(zero())
        );
    }

    #[test]
    fn rationals_round_trip_as_p_over_q() {
        let r = q(-6, 4);
        assert_eq!(format_rational(&r), "-3/2");
        assert_eq!(parse_rational("-3/2").unwrap(), r);
        assert_eq!(format_rational(&int(2)), "2/1");
        assert_eq!(parse_rational("2").unwrap(), int(2));
        assert!(parse_rational("1/0").is_err() || parse_rational("x").is_err());
    }

    #[test]
    fn time_points_parse_infinity_markers() {
        assert_eq!("inf".parse::<TimePoint>().unwrap(), TimePoint::Infinity);
        assert_eq!(
            "5/2".parse::<TimePoint>().unwrap(),
            TimePoint::Finite(q(5, 2))
        );
    }
}
