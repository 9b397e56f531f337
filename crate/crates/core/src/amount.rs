//! Exact rational quantities.
//!
//! Every capacity, share, load and simulated time in the crate is an
//! [`Amount`]. Conservation checks compare amounts with tolerance zero, so
//! floating point never enters the accounting path; `f64` is produced only
//! for human-facing summaries.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational number backed by `Ratio<i128>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(Ratio<i128>);

impl Amount {
    pub const ZERO: Amount = Amount(Ratio::new_raw(0, 1));
    pub const ONE: Amount = Amount(Ratio::new_raw(1, 1));

    pub fn from_int(value: i64) -> Self {
        Amount(Ratio::from_integer(value as i128))
    }

    /// Builds `numer / denom`.
    ///
    /// Panics when `denom` is zero.
    pub fn new(numer: i64, denom: i64) -> Self {
        Amount(Ratio::new(numer as i128, denom as i128))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn floor(&self) -> Amount {
        Amount(self.0.floor())
    }

    /// Largest multiple of `step` that does not exceed `self`.
    pub fn floor_to(&self, step: Amount) -> Amount {
        assert!(step.is_positive(), "granularity must be positive");
        Amount((self.0 / step.0).floor() * step.0)
    }

    pub fn min(self, other: Amount) -> Amount {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Amount) -> Amount {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Clamps into `[lo, hi]`; `lo` wins when the bounds cross.
    pub fn clamp_between(self, lo: Amount, hi: Amount) -> Amount {
        self.min(hi).max(lo)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_ratio(&self) -> Ratio<i128> {
        self.0
    }
}

impl From<i64> for Amount {
    fn from(value: i64) -> Self {
        Amount::from_int(value)
    }
}

impl From<Ratio<i128>> for Amount {
    fn from(value: Ratio<i128>) -> Self {
        Amount(value)
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl Mul for Amount {
    type Output = Amount;
    fn mul(self, rhs: Amount) -> Amount {
        Amount(self.0 * rhs.0)
    }
}

impl Div for Amount {
    type Output = Amount;
    fn div(self, rhs: Amount) -> Amount {
        Amount(self.0 / rhs.0)
    }
}

impl Neg for Amount {
    type Output = Amount;
    fn neg(self) -> Amount {
        Amount(-self.0)
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 = self.0 + rhs.0;
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        self.0 = self.0 - rhs.0;
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |acc, x| acc + *x)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount `{0}`: expected an integer, a fraction `a/b` or a decimal `x.y`")]
pub struct ParseAmountError(String);

impl FromStr for Amount {
    type Err = ParseAmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseAmountError(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| err())?;
            let d: i128 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Amount(Ratio::new(n, d)));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let negative = int.starts_with('-');
            let int_part: i128 = if int.is_empty() || int == "-" {
                0
            } else {
                int.parse().map_err(|_| err())?
            };
            let scale = 10i128.pow(frac.len() as u32);
            let frac_part: i128 = frac.parse().map_err(|_| err())?;
            let magnitude = int_part.abs() * scale + frac_part;
            let numer = if negative { -magnitude } else { magnitude };
            return Ok(Amount(Ratio::new(numer, scale)));
        }
        let n: i128 = s.parse().map_err(|_| err())?;
        Ok(Amount(Ratio::from_integer(n)))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            if let Some(v) = self.0.numer().to_i64() {
                return serializer.serialize_i64(v);
            }
        }
        serializer.collect_str(self)
    }
}

struct AmountVisitor;

impl Visitor<'_> for AmountVisitor {
    type Value = Amount;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer or a string holding an exact rational")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Amount, E> {
        Ok(Amount::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Amount, E> {
        Ok(Amount(Ratio::from_integer(v as i128)))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Amount, E> {
        // Accept floats only when they print as a short decimal, so `2.5`
        // means exactly 5/2 rather than its binary approximation.
        if !v.is_finite() {
            return Err(E::custom("non-finite amount"));
        }
        format!("{v}").parse().map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Amount, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(AmountVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!("14".parse::<Amount>().unwrap(), Amount::from_int(14));
        assert_eq!("7/2".parse::<Amount>().unwrap(), Amount::new(7, 2));
        assert_eq!("2.5".parse::<Amount>().unwrap(), Amount::new(5, 2));
        assert_eq!("-0.25".parse::<Amount>().unwrap(), Amount::new(-1, 4));
        assert!("1/0".parse::<Amount>().is_err());
        assert!("abc".parse::<Amount>().is_err());
    }

    #[test]
    fn floor_to_granularity() {
        assert_eq!(Amount::from_int(14).floor_to(Amount::from_int(4)), Amount::from_int(12));
        assert_eq!(Amount::new(9, 2).floor_to(Amount::new(1, 2)), Amount::new(9, 2));
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_string(&vec![Amount::from_int(3), Amount::new(1, 3)]).unwrap();
        assert_eq!(v, r#"[3,"1/3"]"#);
        let back: Vec<Amount> = serde_json::from_str(r#"[3, "1/3", 2.5]"#).unwrap();
        assert_eq!(back, vec![Amount::from_int(3), Amount::new(1, 3), Amount::new(5, 2)]);
    }
}
