//! Exact nonnegative rationals.
//!
//! Every capital value in the engine is a [`Rational`]. There is no floating
//! point anywhere on the engine path; decimal rendering exists for display only.

use std::cmp::Ordering;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RationalError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("negative value {0}")]
    Negative(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
}

/// A nonnegative rational number in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    /// Builds the canonical form of `num/den`.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self, RationalError> {
        let (num, den) = (num.into(), den.into());
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        let r = BigRational::new(num, den);
        if r.is_negative() {
            return Err(RationalError::Negative(r.to_string()));
        }
        Ok(Rational(r))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_int(n: u64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `num/den` for small operands; panics on a zero denominator.
    pub fn ratio(num: u64, den: u64) -> Self {
        Self::new(num, den).expect("nonzero denominator")
    }

    /// `2^k`.
    pub fn pow2(k: u32) -> Self {
        Rational(BigRational::from_integer(BigInt::one() << k as usize))
    }

    /// `2^-k`.
    pub fn inv_pow2(k: u32) -> Self {
        Rational(BigRational::new(BigInt::one(), BigInt::one() << k as usize))
    }

    pub fn numer(&self) -> BigUint {
        self.0.numer().magnitude().clone()
    }

    pub fn denom(&self) -> BigUint {
        self.0.denom().magnitude().clone()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// `self - rhs`, which must not go negative.
    pub fn checked_sub(&self, rhs: &Rational) -> Result<Rational, RationalError> {
        let d = &self.0 - &rhs.0;
        if d.is_negative() {
            return Err(RationalError::Negative(d.to_string()));
        }
        Ok(Rational(d))
    }

    pub fn checked_div(&self, rhs: &Rational) -> Result<Rational, RationalError> {
        if rhs.is_zero() {
            return Err(RationalError::DivisionByZero);
        }
        Ok(Rational(&self.0 / &rhs.0))
    }

    /// Saturating difference: `max(self - rhs, 0)`.
    pub fn saturating_sub(&self, rhs: &Rational) -> Rational {
        self.checked_sub(rhs).unwrap_or_else(|_| Rational::zero())
    }

    pub fn half(&self) -> Rational {
        Rational(&self.0 / BigInt::from(2))
    }

    /// `(a + b) / 2`.
    pub fn average(a: &Rational, b: &Rational) -> Rational {
        (a + b).half()
    }

    pub fn pow(&self, exp: u32) -> Rational {
        (0..exp).fold(Rational::one(), |acc, _| acc * self)
    }

    pub fn max_of<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
        if a >= b {
            a
        } else {
            b
        }
    }

    /// Decimal rendering truncated to `digits` fractional digits. Display only.
    pub fn to_decimal(&self, digits: usize) -> String {
        let (q, r) = self.0.numer().div_rem(self.0.denom());
        let mut out = q.to_string();
        if digits > 0 {
            out.push('.');
            let mut rem = r;
            for _ in 0..digits {
                rem *= 10;
                let (d, r2) = rem.div_rem(self.0.denom());
                out.push_str(&d.to_string());
                rem = r2;
            }
        }
        out
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    /// Accepts `p/q` or a bare integer `p`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RationalError::Parse(s.to_string());
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num = BigInt::from_str(num).map_err(|_| bad())?;
        let den = BigInt::from_str(den).map_err(|_| bad())?;
        Rational::new(num, den)
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational::from_int(n)
    }
}

impl TryFrom<BigRational> for Rational {
    type Error = RationalError;

    fn try_from(r: BigRational) -> Result<Self, Self::Error> {
        if r.is_negative() {
            return Err(RationalError::Negative(r.to_string()));
        }
        Ok(Rational(r))
    }
}

impl From<BigUint> for Rational {
    fn from(n: BigUint) -> Self {
        Rational(BigRational::from_integer(BigInt::from_biguint(Sign::Plus, n)))
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(&self.0 $op &rhs.0)
            }
        }
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0 $op rhs.0)
            }
        }
        impl $tr<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0 $op &rhs.0)
            }
        }
        impl $tr<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(&self.0 $op rhs.0)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Mul, mul, *);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        self.0 *= &rhs.0;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::one(), |a, b| a * b)
    }
}

impl<'a> Product<&'a Rational> for Rational {
    fn product<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::one(), |a, b| a * b)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn normalize_reduces() {
        assert_eq!(Rational::new(2, 4).unwrap().to_string(), "1/2");
        assert_eq!(Rational::new(0, 7).unwrap().to_string(), "0/1");
        assert_eq!(Rational::new(128, 127).unwrap().to_string(), "128/127");
        assert_eq!(Rational::new(-3, -6).unwrap(), r("1/2"));
    }

    #[test]
    fn normalize_errors() {
        assert_eq!(Rational::new(1, 0), Err(RationalError::ZeroDenominator));
        assert!(matches!(Rational::new(-1, 2), Err(RationalError::Negative(_))));
        assert!(matches!(Rational::new(1, -2), Err(RationalError::Negative(_))));
    }

    #[test]
    fn arithmetic() {
        assert_eq!(r("1/2") + r("1/2"), Rational::one());
        assert_eq!(r("3/2") * r("3/2"), r("9/4"));
        // 1 + 1/2^3 against the h = 7 cap
        assert_eq!(Rational::one() + Rational::inv_pow2(3), r("9/8"));
        assert_eq!(r("9/8").cmp(&(Rational::one() + Rational::inv_pow2(3))), Ordering::Equal);
        assert!(r("1/3").checked_sub(&r("1/2")).is_err());
        assert_eq!(r("1/2").checked_sub(&r("1/3")).unwrap(), r("1/6"));
        assert_eq!(r("1/2").checked_div(&Rational::zero()), Err(RationalError::DivisionByZero));
        assert_eq!(r("3/4").checked_div(&r("3/2")).unwrap(), r("1/2"));
    }

    #[test]
    fn parse_and_serde() {
        assert_eq!(r("6"), Rational::from_int(6));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("-1/2".parse::<Rational>().is_err());
        assert!("x".parse::<Rational>().is_err());
        let j = serde_json::to_string(&r("128/127")).unwrap();
        assert_eq!(j, "\"128/127\"");
        assert_eq!(serde_json::from_str::<Rational>("\"0/1\"").unwrap(), Rational::zero());
    }

    #[test]
    fn decimal_display() {
        assert_eq!(r("9/8").to_decimal(3), "1.125");
        assert_eq!(r("1/3").to_decimal(4), "0.3333");
        assert_eq!(r("5").to_decimal(0), "5");
    }

    fn arb_rational() -> impl Strategy<Value = Rational> {
        (0u64..1_000_000, 1u64..1_000_000).prop_map(|(n, d)| Rational::ratio(n, d))
    }

    proptest! {
        #[test]
        fn add_sub_and_mul_div_are_exact(a in arb_rational(), b in arb_rational()) {
            prop_assert_eq!((&a + &b).checked_sub(&b).unwrap(), a.clone());
            if !b.is_zero() {
                prop_assert_eq!((&a * &b).checked_div(&b).unwrap(), a);
            }
        }

        #[test]
        fn cmp_matches_cross_multiplication(a in arb_rational(), b in arb_rational()) {
            let lhs = a.numer() * b.denom();
            let rhs = b.numer() * a.denom();
            prop_assert_eq!(a.cmp(&b), lhs.cmp(&rhs));
        }

        #[test]
        fn display_round_trips(a in arb_rational()) {
            prop_assert_eq!(a.to_string().parse::<Rational>().unwrap(), a);
        }
    }
}
