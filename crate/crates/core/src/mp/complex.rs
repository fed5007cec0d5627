//! Complex numbers over any [`Real`] field.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use super::real::BigReal;
use super::scalar::Real;

#[derive(Clone, Copy, PartialEq)]
pub struct Complex<T> {
    pub re: T,
    pub im: T,
}

/// Multiprecision complex number.
pub type BigComplex = Complex<BigReal>;

impl<T: Real> Complex<T> {
    pub fn new(re: T, im: T) -> Self {
        Complex { re, im }
    }

    pub fn real(re: T) -> Self {
        Complex { re, im: re.zero_like() }
    }

    pub fn norm_sqr(&self) -> T {
        self.re * self.re + self.im * self.im
    }

    /// Modulus, scaled to avoid premature overflow.
    pub fn norm(&self) -> T {
        let a = self.re.abs();
        let b = self.im.abs();
        let (big, small) = if a >= b { (a, b) } else { (b, a) };
        if big.is_zero() {
            return big;
        }
        let q = small / big;
        big * (big.one_like() + q * q).sqrt()
    }

    pub fn conj(&self) -> Self {
        Complex::new(self.re, -self.im)
    }

    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        Complex::new(self.re / d, -self.im / d)
    }

    pub fn scale(&self, r: T) -> Self {
        Complex::new(self.re * r, self.im * r)
    }

    pub fn map<U: Real>(&self, f: impl Fn(&T) -> U) -> Complex<U> {
        Complex::new(f(&self.re), f(&self.im))
    }
}

impl BigComplex {
    pub fn from_f64(re: f64, im: f64, bits: u32) -> Self {
        Complex::new(BigReal::from_f64(re, bits), BigReal::from_f64(im, bits))
    }

    pub fn to_f64(&self) -> Complex<f64> {
        Complex::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn with_precision(&self, bits: u32) -> Self {
        Complex::new(self.re.with_precision(bits), self.im.with_precision(bits))
    }

    /// Principal argument in (-π, π].
    pub fn arg(&self) -> BigReal {
        self.im.atan2(&self.re)
    }

    pub fn exp(&self) -> Self {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        Complex::new(m * c, m * s)
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        Complex::new(self.norm().ln(), self.arg())
    }

    /// Principal power `self^e` for real exponent.
    pub fn powf(&self, e: &BigReal) -> Self {
        if self.im.is_zero() && self.re.is_positive() {
            return Complex::real(self.re.pow(e));
        }
        if self.re.is_zero() && self.im.is_zero() {
            return *self;
        }
        (self.ln().scale(*e)).exp()
    }
}

impl<T: Real> Add for Complex<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl<T: Real> Sub for Complex<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl<T: Real> Mul for Complex<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl<T: Real> Div for Complex<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        // Smith's algorithm
        if o.im.is_zero() {
            return Complex::new(self.re / o.re, self.im / o.re);
        }
        if o.re.abs() >= o.im.abs() {
            let r = o.im / o.re;
            let d = o.re + o.im * r;
            Complex::new((self.re + self.im * r) / d, (self.im - self.re * r) / d)
        } else {
            let r = o.re / o.im;
            let d = o.re * r + o.im;
            Complex::new((self.re * r + self.im) / d, (self.im * r - self.re) / d)
        }
    }
}

impl<T: Real> Neg for Complex<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Complex::new(-self.re, -self.im)
    }
}

impl<T: Real> AddAssign for Complex<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Complex<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> MulAssign for Complex<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: fmt::Debug> fmt::Debug for Complex<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} + {:?}i)", self.re, self.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_arithmetic() {
        let a = Complex::new(1.0, 2.0);
        let b = Complex::new(3.0, -1.0);
        let p = a * b;
        assert_eq!((p.re, p.im), (5.0, 5.0));
        let q = p / b;
        assert!((q.re - 1.0).abs() < 1e-15 && (q.im - 2.0).abs() < 1e-15);
        assert_eq!(Complex::new(3.0, 4.0).norm(), 5.0);
    }

    #[test]
    fn big_exp_log_round_trip() {
        let z = BigComplex::from_f64(0.3, -2.5, 256);
        let w = z.exp().ln();
        assert!((w.re - z.re).abs().to_f64() < 1e-70);
        assert!((w.im - z.im).abs().to_f64() < 1e-70);
    }

    #[test]
    fn big_power_matches_double() {
        let z = BigComplex::from_f64(2.0, 3.0, 256);
        let e = BigReal::from_f64(0.5, 256);
        let r = z.powf(&e).to_f64();
        let zd = num_sqrt(2.0, 3.0);
        assert!((r.re - zd.0).abs() < 1e-15 && (r.im - zd.1).abs() < 1e-15);
    }

    fn num_sqrt(re: f64, im: f64) -> (f64, f64) {
        let m = re.hypot(im);
        let a = ((m + re) / 2.0).sqrt();
        let b = ((m - re) / 2.0).sqrt().copysign(im);
        (a, b)
    }
}
