//! Exact ordered scalars used for interval endpoints.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// An exact ordered field element. Implemented for `Ratio<i64>` and
/// `BigRational`; floating point types are deliberately left out because the
/// construction compares closures and boundary points for exact equality.
pub trait Scalar: Clone + Ord + Hash + Debug + Display + Num + FromPrimitive + Send + Sync + 'static {
    /// The greatest integer not above `self`, if it fits in an `i64`.
    fn floor_i64(&self) -> Option<i64>;

    /// The least integer not below `self`, if it fits in an `i64`.
    fn ceil_i64(&self) -> Option<i64>;

    fn to_big(&self) -> BigRational;

    /// Converts from an arbitrary rational, or `None` if it does not fit.
    fn from_big(r: &BigRational) -> Option<Self>;

    fn ratio(numer: i64, denom: i64) -> Self {
        Self::from_i64(numer).expect("i64 fits") / Self::from_i64(denom).expect("i64 fits")
    }

    /// Parses `p`, `p/q` or `-p/q`.
    fn parse(s: &str) -> Option<Self> {
        let r = BigRational::from_str(s.trim()).ok()?;
        Self::from_big(&r)
    }
}

impl<T> Scalar for Ratio<T>
where
    T: Clone + Integer + Hash + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static,
    T: Into<BigInt> + TryFrom<BigInt>,
    Ratio<T>: FromPrimitive,
{
    fn floor_i64(&self) -> Option<i64> {
        self.floor().to_integer().to_i64()
    }

    fn ceil_i64(&self) -> Option<i64> {
        self.ceil().to_integer().to_i64()
    }

    fn to_big(&self) -> BigRational {
        BigRational::new(self.numer().clone().into(), self.denom().clone().into())
    }

    fn from_big(r: &BigRational) -> Option<Self> {
        let n = T::try_from(r.numer().clone()).ok()?;
        let d = T::try_from(r.denom().clone()).ok()?;
        Some(Ratio::new(n, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn conversions_round_trip() {
        let q = Rational64::parse("-9/4").unwrap();
        assert_eq!(q.floor_i64(), Some(-3));
        assert_eq!(q.ceil_i64(), Some(-2));
        let b = q.to_big();
        assert_eq!(Rational64::from_big(&b), Some(q));
        let huge = BigRational::parse("1/100000000000000000000000").unwrap();
        assert_eq!(Rational64::from_big(&huge), None);
        assert_eq!(BigRational::ratio(6, 4), BigRational::parse("3/2").unwrap());
    }
}
