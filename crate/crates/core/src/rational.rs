//! Rational helpers shared across the crate.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

/// `n / d` as an exact rational.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.375"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    if let Some((int, frac)) = s.split_once('.') {
        if frac.chars().all(|c| c.is_ascii_digit()) && !s.contains('/') {
            let neg = int.starts_with('-');
            let int_abs = int.trim_start_matches(['-', '+']);
            let digits = format!("{}{}", if int_abs.is_empty() { "0" } else { int_abs }, frac);
            let num = BigInt::from_str(&digits)
                .map_err(|_| Error::InvalidInput(format!("bad rational {s:?}")))?;
            let den = num_traits::pow(BigInt::from(10), frac.len());
            let v = Q::new(num, den);
            return Ok(if neg { -v } else { v });
        }
    }
    Q::from_str(s).map_err(|_| Error::InvalidInput(format!("bad rational {s:?}")))
}

/// Least common multiple of all denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Q>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// The rational with the smallest denominator (then smallest numerator in
/// absolute value) inside the closed interval `[lo, hi]`, `0 <= lo <= hi`.
pub fn simplest_between(lo: &Q, hi: &Q) -> Q {
    debug_assert!(lo <= hi);
    if lo.is_negative() {
        if hi.is_negative() {
            return -simplest_between(&-hi, &-lo);
        }
        return Q::zero();
    }
    let fl = lo.floor();
    if fl == *lo {
        return fl;
    }
    if &fl + Q::one() <= *hi {
        return lo.ceil();
    }
    // lo and hi share the integer part; recurse on reciprocals of the
    // fractional parts.
    let frac_lo = lo - &fl;
    let frac_hi = hi - &fl;
    let inner = simplest_between(&frac_hi.recip(), &frac_lo.recip());
    fl + inner.recip()
}

pub mod serde_q {
    //! Serialize rationals as `"p/q"` strings.
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_q(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_q_opt {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_some(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| super::parse_q(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub mod serde_q_vec {
    use super::Q;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| super::parse_q(s).map_err(serde::de::Error::custom))
            .collect()
    }
}
