//! Numeric traits shared by the double and multiprecision code paths.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::complex::Complex;
use super::real::BigReal;

/// An ordered real field with a runtime precision.
///
/// Constructors take `self` as a template so that multiprecision values
/// inherit the precision of an existing operand.
pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn from_f64_like(&self, v: f64) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// Unit roundoff at this value's precision.
    fn eps(&self) -> Self;
    fn is_zero(&self) -> bool;
}

/// A real or complex field element.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    type Real: Real;

    fn from_real(r: Self::Real) -> Self;
    fn re(&self) -> Self::Real;
    fn conj(&self) -> Self;
    /// Squared modulus.
    fn abs2(&self) -> Self::Real;
    fn scale(&self, r: Self::Real) -> Self;

    fn abs(&self) -> Self::Real {
        self.abs2().sqrt()
    }

    fn zero_like(&self) -> Self {
        Self::from_real(self.re().zero_like())
    }

    fn one_like(&self) -> Self {
        Self::from_real(self.re().one_like())
    }
}

/// A real field that is its own [`Scalar`], as needed by the real-valued
/// rational approximation code.
pub trait RealField: Real + Scalar<Real = Self> {}

impl<T: Real + Scalar<Real = T>> RealField for T {}

impl Real for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn from_f64_like(&self, v: f64) -> Self {
        v
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn eps(&self) -> Self {
        f64::EPSILON / 2.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Real for BigReal {
    fn zero_like(&self) -> Self {
        BigReal::zero_limbs(self.limbs())
    }
    fn one_like(&self) -> Self {
        BigReal::one_limbs(self.limbs())
    }
    fn from_f64_like(&self, v: f64) -> Self {
        BigReal::from_f64_limbs(v, self.limbs())
    }
    fn abs(&self) -> Self {
        BigReal::abs(self)
    }
    fn sqrt(&self) -> Self {
        BigReal::sqrt(self)
    }
    fn to_f64(&self) -> f64 {
        BigReal::to_f64(self)
    }
    fn eps(&self) -> Self {
        self.epsilon()
    }
    fn is_zero(&self) -> bool {
        BigReal::is_zero(self)
    }
}

impl Scalar for f64 {
    type Real = f64;
    fn from_real(r: f64) -> Self {
        r
    }
    fn re(&self) -> f64 {
        *self
    }
    fn conj(&self) -> Self {
        *self
    }
    fn abs2(&self) -> f64 {
        self * self
    }
    fn scale(&self, r: f64) -> Self {
        self * r
    }
    fn abs(&self) -> f64 {
        f64::abs(*self)
    }
}

impl Scalar for BigReal {
    type Real = BigReal;
    fn from_real(r: BigReal) -> Self {
        r
    }
    fn re(&self) -> BigReal {
        *self
    }
    fn conj(&self) -> Self {
        *self
    }
    fn abs2(&self) -> BigReal {
        *self * *self
    }
    fn scale(&self, r: BigReal) -> Self {
        *self * r
    }
    fn abs(&self) -> BigReal {
        BigReal::abs(self)
    }
}

impl<T: Real> Scalar for Complex<T> {
    type Real = T;
    fn from_real(r: T) -> Self {
        Complex::new(r, r.zero_like())
    }
    fn re(&self) -> T {
        self.re
    }
    fn conj(&self) -> Self {
        Complex::new(self.re, -self.im)
    }
    fn abs2(&self) -> T {
        self.re * self.re + self.im * self.im
    }
    fn scale(&self, r: T) -> Self {
        Complex::new(self.re * r, self.im * r)
    }
    fn abs(&self) -> T {
        self.norm()
    }
}
