//! Barycentric rational functions of type (m−1, m−1).

use crate::mp::{Complex, Real, RealField};

/// r(s) = Σ ω_k f_k/(s − z_k) / Σ ω_k/(s − z_k).
#[derive(Clone, Debug)]
pub struct BarycentricRational<T> {
    pub support: Vec<T>,
    pub values: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: RealField> BarycentricRational<T> {
    pub fn new(support: Vec<T>, values: Vec<T>, weights: Vec<T>) -> Self {
        assert_eq!(support.len(), values.len());
        assert_eq!(support.len(), weights.len());
        BarycentricRational {
            support,
            values,
            weights,
        }
    }

    /// Number of support points m.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Numerator and denominator sums at a real point off the support.
    pub fn parts(&self, s: T) -> (T, T) {
        let mut n = Real::zero_like(&s);
        let mut d = Real::zero_like(&s);
        for ((z, f), w) in self.support.iter().zip(&self.values).zip(&self.weights) {
            let c = *w / (s - *z);
            n = n + c * *f;
            d = d + c;
        }
        (n, d)
    }

    /// r(s) at a real point; exact data at support points.
    pub fn eval(&self, s: T) -> T {
        if let Some(k) = self.support.iter().position(|z| Real::is_zero(&(*z - s))) {
            return self.values[k];
        }
        let (n, d) = self.parts(s);
        n / d
    }

    /// Numerator, denominator and denominator derivative at a complex point.
    pub fn parts_complex(&self, s: Complex<T>) -> (Complex<T>, Complex<T>, Complex<T>) {
        let zero = Complex::real(Real::zero_like(&s.re));
        let (mut n, mut d, mut dd) = (zero, zero, zero);
        for ((z, f), w) in self.support.iter().zip(&self.values).zip(&self.weights) {
            let q = (s - Complex::real(*z)).recip();
            let c = q.scale(*w);
            n += c.scale(*f);
            d += c;
            dd -= c * q;
        }
        (n, d, dd)
    }

    /// r(s) at a complex point off the support.
    pub fn eval_complex(&self, s: Complex<T>) -> Complex<T> {
        let (n, d, _) = self.parts_complex(s);
        n / d
    }

    /// r(∞) = Σ ω_k f_k / Σ ω_k.
    pub fn at_infinity(&self) -> T {
        let mut n = Real::zero_like(&self.weights[0]);
        let mut d = n;
        for (f, w) in self.values.iter().zip(&self.weights) {
            n = n + *w * *f;
            d = d + *w;
        }
        n / d
    }
}
