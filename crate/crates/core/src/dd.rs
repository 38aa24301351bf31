//! Double-double arithmetic.
//!
//! A [`DoubleDouble`] is an unevaluated sum `hi + lo` of two `f64` values with
//! `|lo| <= ulp(hi) / 2`, giving roughly 106 bits of significand. The basic
//! operations follow the usual error-free transformations (`two_sum`,
//! `two_prod` through a fused multiply-add).

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

#[derive(Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.hi, f)
    }
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };
    pub const LN2: Self = Self {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    /// Builds a normalized value from an arbitrary pair.
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Self {
        let (s1, s2) = two_sum(self.hi, b);
        let s2 = s2 + self.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Self { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p1, p2) = two_prod(self.hi, b);
        let p2 = p2 + self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let (p1, p2) = two_prod(q1, b);
        let (s, e) = two_sum(self.hi, -p1);
        let e = e - p2 + self.lo;
        let q2 = (s + e) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }
    }

    /// Exact scaling by a power of two.
    #[inline]
    pub fn mul_pow2(self, scale: f64) -> Self {
        Self {
            hi: self.hi * scale,
            lo: self.lo * scale,
        }
    }

    #[inline]
    pub fn sqr(self) -> Self {
        self * self
    }

    pub fn recip(self) -> Self {
        Self::ONE / self
    }

    pub fn powi(self, n: u32) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc *= base;
            }
            base = base.sqr();
            n >>= 1;
        }
        acc
    }

    /// `exp(self)` to about 30 significant digits.
    pub fn exp(self) -> Self {
        if self.hi > 709.7 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        if self.hi == 0.0 {
            return Self::ONE;
        }
        let k = (self.hi / Self::LN2.hi).round();
        let reduced = (self - Self::LN2.mul_f64(k)).mul_pow2(1.0 / 512.0);

        // expm1 of the reduced argument by Taylor series; |reduced| < 7e-4.
        let mut term = reduced;
        let mut s = reduced;
        for i in 2..20 {
            term = (term * reduced).div_f64(i as f64);
            s += term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        // (1 + s)^512 - 1, keeping the expm1 form to avoid cancellation.
        for _ in 0..9 {
            s = s.mul_f64(2.0) + s.sqr();
        }
        let one_plus = s + Self::ONE;
        scale_by_pow2(one_plus, k as i32)
    }
}

fn scale_by_pow2(x: DoubleDouble, k: i32) -> DoubleDouble {
    // Split the scaling so neither factor overflows or goes subnormal early.
    let half = k / 2;
    let rest = k - half;
    x.mul_pow2(2f64.powi(half)).mul_pow2(2f64.powi(rest))
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }.add_f64(q3)
    }
}

impl Add<f64> for DoubleDouble {
    type Output = Self;
    fn add(self, b: f64) -> Self {
        self.add_f64(b)
    }
}

impl Sub<f64> for DoubleDouble {
    type Output = Self;
    fn sub(self, b: f64) -> Self {
        self.add_f64(-b)
    }
}

impl Mul<f64> for DoubleDouble {
    type Output = Self;
    fn mul(self, b: f64) -> Self {
        self.mul_f64(b)
    }
}

impl Div<f64> for DoubleDouble {
    type Output = Self;
    fn div(self, b: f64) -> Self {
        self.div_f64(b)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl AddAssign<f64> for DoubleDouble {
    fn add_assign(&mut self, b: f64) {
        *self = self.add_f64(b);
    }
}

impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, b: Self) {
        *self = *self * b;
    }
}

impl MulAssign<f64> for DoubleDouble {
    fn mul_assign(&mut self, b: f64) {
        *self = self.mul_f64(b);
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |acc, x| acc + x)
    }
}

/// Compensated sum of `f64` terms, accumulated in double-double.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms
        .into_iter()
        .fold(DoubleDouble::ZERO, |acc, x| acc.add_f64(x))
        .to_f64()
}
