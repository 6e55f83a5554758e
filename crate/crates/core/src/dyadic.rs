//! Exact nonnegative dyadic rationals `mantissa / 2^scale`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A nonnegative dyadic rational kept in canonical form: the mantissa is odd,
/// or it is zero with scale zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicMass {
    mantissa: BigUint,
    scale: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DyadicParseError {
    #[error("expected `m/2^s`, `p/q` with q a power of two, or an integer; got `{0}`")]
    Malformed(String),
    #[error("denominator of `{0}` is not a power of two")]
    NotDyadic(String),
}

impl DyadicMass {
    pub fn zero() -> Self {
        DyadicMass { mantissa: BigUint::zero(), scale: 0 }
    }

    pub fn one() -> Self {
        DyadicMass { mantissa: BigUint::one(), scale: 0 }
    }

    /// `2^(-exponent)`.
    pub fn pow2_neg(exponent: u64) -> Self {
        DyadicMass { mantissa: BigUint::one(), scale: exponent }
    }

    /// Builds `mantissa / 2^scale` and normalizes it.
    pub fn new(mantissa: BigUint, scale: u64) -> Self {
        if mantissa.is_zero() {
            return Self::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0).min(scale);
        DyadicMass { mantissa: mantissa >> tz, scale: scale - tz }
    }

    pub fn mantissa(&self) -> &BigUint {
        &self.mantissa
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn half(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        DyadicMass { mantissa: self.mantissa.clone(), scale: self.scale + 1 }
    }

    /// Multiplies by `2^(-k)`.
    pub fn shr(&self, k: u64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        DyadicMass { mantissa: self.mantissa.clone(), scale: self.scale + k }
    }

    /// Multiplies by `2^k`, moving the binary point to the right.
    pub fn shl(&self, k: u64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        if k <= self.scale {
            DyadicMass { mantissa: self.mantissa.clone(), scale: self.scale - k }
        } else {
            DyadicMass { mantissa: &self.mantissa << (k - self.scale), scale: 0 }
        }
    }

    /// `self - other`, or `None` when the result would be negative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let s = self.scale.max(other.scale);
        let a = &self.mantissa << (s - self.scale);
        let b = &other.mantissa << (s - other.scale);
        if a < b {
            None
        } else {
            Some(Self::new(a - b, s))
        }
    }

    /// True when the value is exactly `2^(-e)` for some `e`.
    pub fn is_power_of_two(&self) -> bool {
        self.mantissa.is_one()
    }
}

impl Default for DyadicMass {
    fn default() -> Self {
        Self::zero()
    }
}

impl Ord for DyadicMass {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        // Compare bit lengths of the integer parts first to avoid large shifts.
        let ea = self.mantissa.bits() as i128 - self.scale as i128;
        let eb = other.mantissa.bits() as i128 - other.scale as i128;
        if ea != eb {
            return ea.cmp(&eb);
        }
        let s = self.scale.max(other.scale);
        let a = &self.mantissa << (s - self.scale);
        let b = &other.mantissa << (s - other.scale);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicMass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &DyadicMass {
    type Output = DyadicMass;

    fn add(self, rhs: &DyadicMass) -> DyadicMass {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let s = self.scale.max(rhs.scale);
        let a = &self.mantissa << (s - self.scale);
        let b = &rhs.mantissa << (s - rhs.scale);
        DyadicMass::new(a + b, s)
    }
}

impl Add for DyadicMass {
    type Output = DyadicMass;

    fn add(self, rhs: DyadicMass) -> DyadicMass {
        &self + &rhs
    }
}

/// Sums many dyadics whose scales may be far apart without repeatedly
/// shifting a wide accumulator. Set bits are counted per exponent and carried
/// once at the end.
#[derive(Default)]
pub struct DyadicSum {
    // exponent e stands for 2^(-e)
    counts: BTreeMap<i128, u64>,
}

impl DyadicSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: &DyadicMass) {
        if x.is_zero() {
            return;
        }
        if x.mantissa.is_one() {
            *self.counts.entry(x.scale as i128).or_insert(0) += 1;
            return;
        }
        for b in 0..x.mantissa.bits() {
            if x.mantissa.bit(b) {
                *self.counts.entry(x.scale as i128 - b as i128).or_insert(0) += 1;
            }
        }
    }

    pub fn finish(self) -> DyadicMass {
        let mut bits: Vec<i128> = Vec::new();
        let mut pending = self.counts;
        while let Some((e, c)) = pending.pop_last() {
            if c & 1 == 1 {
                bits.push(e);
            }
            if c > 1 {
                *pending.entry(e - 1).or_insert(0) += c >> 1;
            }
        }
        let Some(&max_e) = bits.first() else {
            return DyadicMass::zero();
        };
        let scale = max_e.max(0);
        let mut mantissa = BigUint::zero();
        for e in bits {
            mantissa.set_bit((scale - e) as u64, true);
        }
        DyadicMass::new(mantissa, scale as u64)
    }
}

impl<'a> Sum<&'a DyadicMass> for DyadicMass {
    fn sum<I: Iterator<Item = &'a DyadicMass>>(iter: I) -> Self {
        let mut acc = DyadicSum::new();
        for x in iter {
            acc.add(x);
        }
        acc.finish()
    }
}

impl Sum<DyadicMass> for DyadicMass {
    fn sum<I: Iterator<Item = DyadicMass>>(iter: I) -> Self {
        let mut acc = DyadicSum::new();
        for x in iter {
            acc.add(&x);
        }
        acc.finish()
    }
}

impl fmt::Display for DyadicMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            write!(f, "{}", self.mantissa)
        } else {
            write!(f, "{}/2^{}", self.mantissa, self.scale)
        }
    }
}

impl fmt::Debug for DyadicMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for DyadicMass {
    type Err = DyadicParseError;

    /// Accepts `m/2^s`, `p/q` where `q` is a power of two, or a plain integer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || DyadicParseError::Malformed(s.to_string());
        let parse_uint = |t: &str| BigUint::from_str(t.trim()).map_err(|_| bad());
        match s.split_once('/') {
            None => Ok(DyadicMass::new(parse_uint(s)?, 0)),
            Some((num, den)) => {
                let num = parse_uint(num)?;
                let den = den.trim();
                if let Some(exp) = den.strip_prefix("2^") {
                    let scale: u64 = exp.trim().parse().map_err(|_| bad())?;
                    return Ok(DyadicMass::new(num, scale));
                }
                let den = parse_uint(den)?;
                if den.is_zero() || den.count_ones() != 1 {
                    return Err(DyadicParseError::NotDyadic(s.to_string()));
                }
                Ok(DyadicMass::new(num, den.bits() - 1))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DyadicRepr {
    mantissa: String,
    scale: u64,
}

impl Serialize for DyadicMass {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DyadicRepr { mantissa: self.mantissa.to_string(), scale: self.scale }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DyadicMass {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = DyadicRepr::deserialize(deserializer)?;
        let m = BigUint::from_str(&repr.mantissa).map_err(serde::de::Error::custom)?;
        Ok(DyadicMass::new(m, repr.scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> DyadicMass {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form() {
        let x = DyadicMass::new(BigUint::from(12u32), 5);
        assert_eq!(x.mantissa(), &BigUint::from(3u32));
        assert_eq!(x.scale(), 3);
        let z = DyadicMass::new(BigUint::zero(), 9);
        assert_eq!(z.scale(), 0);
        assert_eq!(DyadicMass::new(BigUint::from(4u32), 0).to_string(), "4");
    }

    #[test]
    fn arithmetic_and_order() {
        assert_eq!(&d("1/4") + &d("1/4"), d("1/2"));
        assert_eq!(&d("1/2") + &d("1/8"), d("5/8"));
        assert_eq!(d("5/8").checked_sub(&d("1/8")), Some(d("1/2")));
        assert_eq!(d("1/8").checked_sub(&d("1/4")), None);
        assert!(d("1/4") < d("3/8"));
        assert!(d("0") < d("1/2^900"));
        assert_eq!(d("3/4").half(), d("3/8"));
        assert_eq!(d("3/2^7").to_string(), "3/2^7");
        assert!(matches!("1/3".parse::<DyadicMass>(), Err(DyadicParseError::NotDyadic(_))));
    }

    #[test]
    fn wide_sums_carry() {
        let terms: Vec<DyadicMass> = (1..=40).map(DyadicMass::pow2_neg).collect();
        let total: DyadicMass = terms.iter().sum();
        assert_eq!(&total + &DyadicMass::pow2_neg(40), DyadicMass::one());
        let halves = [d("1/2"), d("1/2"), d("3/4"), d("1/4")];
        assert_eq!(halves.iter().sum::<DyadicMass>(), d("2"));
    }
}
