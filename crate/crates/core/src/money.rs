//! Money amounts and the decimal-string encodings used in documents and reports.
//!
//! Amounts are held as `f64`. Datasets store them as shortest round-trip
//! decimal strings; reports round money to cents and ratios to four places,
//! and only at emission.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// An amount of money in the context's base currency unless stated otherwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Money(f64);

impl Money {
    pub const ZERO: Money = Money(0.0);

    pub const fn new(value: f64) -> Self {
        Money(value)
    }

    pub const fn value(self) -> f64 {
        self.0
    }

    /// Value rounded half away from zero to the cent.
    pub fn round_cents(self) -> f64 {
        (self.0 * 100.0).round() / 100.0
    }

    pub fn abs(self) -> Self {
        Money(self.0.abs())
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fixed(self.0, 2))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Mul<f64> for Money {
    type Output = Money;
    fn mul(self, rhs: f64) -> Money {
        Money(self.0 * rhs)
    }
}

impl Div<f64> for Money {
    type Output = Money;
    fn div(self, rhs: f64) -> Money {
        Money(self.0 / rhs)
    }
}

impl Div for Money {
    type Output = f64;
    fn div(self, rhs: Money) -> f64 {
        self.0 / rhs.0
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl From<f64> for Money {
    fn from(value: f64) -> Self {
        Money(value)
    }
}

/// Fixed-point rendering with `places` decimals; never emits a negative zero.
pub fn fixed(value: f64, places: usize) -> String {
    let s = format!("{value:.places$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn parse_decimal<E: de::Error>(s: &str) -> Result<f64, E> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| E::custom(format!("invalid decimal string {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(E::custom(format!("non-finite decimal {s:?}")))
    }
}

struct DecimalVisitor;

impl Visitor<'_> for DecimalVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a decimal string or number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_decimal(v)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(E::custom("non-finite number"))
        }
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        // Shortest representation that parses back to the same f64.
        s.serialize_str(&format!("{}", self.0))
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(DecimalVisitor).map(Money)
    }
}

/// Money rounded to cents, as a decimal string.
pub mod cents {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Money, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fixed(m.0, 2))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Money, D::Error> {
        d.deserialize_any(DecimalVisitor).map(Money)
    }
}

/// A series of cent-rounded amounts.
pub mod cents_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Money], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for m in v {
            seq.serialize_element(&fixed(m.0, 2))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Money>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| parse_decimal::<D::Error>(s).map(Money))
            .collect()
    }
}

macro_rules! fixed_module {
    ($(#[$doc:meta])* $name:ident, $places:expr) => {
        $(#[$doc])*
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&fixed(*v, $places))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                d.deserialize_any(DecimalVisitor)
            }
        }
    };
}

macro_rules! opt_fixed_module {
    ($(#[$doc:meta])* $name:ident, $places:expr) => {
        $(#[$doc])*
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
                match v {
                    Some(x) => s.serialize_str(&fixed(*x, $places)),
                    None => s.serialize_none(),
                }
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
                let raw: Option<String> = Option::deserialize(d)?;
                raw.map(|s| parse_decimal::<D::Error>(&s)).transpose()
            }
        }
    };
}

fixed_module!(
    /// Decimal string with two places.
    fixed2,
    2
);
fixed_module!(
    /// Decimal string with four places.
    fixed4,
    4
);
opt_fixed_module!(
    /// Optional two-place decimal; `null` when undefined.
    opt_fixed2,
    2
);
opt_fixed_module!(
    /// Ratios: four places, `null` when undefined.
    ratio,
    4
);
