//! Coefficient arithmetic shared by the expansion generators.
//!
//! Polynomial generation works the same over plain floats, double-double and
//! exact rationals; the latter is what lets coefficient identities be checked
//! exactly.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::dd::DoubleDouble;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn from_integer(n: i64) -> Self;
    fn from_rational(q: &BigRational) -> Self;
    fn to_dd(&self) -> DoubleDouble;
    fn is_zero(&self) -> bool;

    fn as_f64(&self) -> f64 {
        self.to_dd().to_f64()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_integer(n: i64) -> Self {
        n as f64
    }
    fn from_rational(q: &BigRational) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }
    fn to_dd(&self) -> DoubleDouble {
        DoubleDouble::from_f64(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for DoubleDouble {
    fn zero() -> Self {
        DoubleDouble::ZERO
    }
    fn one() -> Self {
        DoubleDouble::ONE
    }
    fn from_f64(x: f64) -> Self {
        DoubleDouble::from_f64(x)
    }
    fn from_integer(n: i64) -> Self {
        let hi = n as f64;
        // |n| < 2^63, so the remainder is exactly representable.
        let lo = (n as i128 - hi as i128) as f64;
        DoubleDouble::new(hi, lo)
    }
    fn from_rational(q: &BigRational) -> Self {
        rational_to_dd(q)
    }
    fn to_dd(&self) -> DoubleDouble {
        *self
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite coefficient")
    }
    fn from_integer(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_rational(q: &BigRational) -> Self {
        q.clone()
    }
    fn to_dd(&self) -> DoubleDouble {
        rational_to_dd(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Nearest double-double to an exact rational.
pub fn rational_to_dd(q: &BigRational) -> DoubleDouble {
    let hi = ToPrimitive::to_f64(q).unwrap_or(f64::NAN);
    if !hi.is_finite() || hi == 0.0 {
        return DoubleDouble::from_f64(hi);
    }
    let rest = q - BigRational::from_float(hi).expect("finite");
    let lo = ToPrimitive::to_f64(&rest).unwrap_or(0.0);
    DoubleDouble::new(hi, lo)
}

/// Nearest double-double to an integer.
pub fn bigint_to_dd(n: &BigInt) -> DoubleDouble {
    rational_to_dd(&BigRational::from_integer(n.clone()))
}
