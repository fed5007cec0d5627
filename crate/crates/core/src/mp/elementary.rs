//! Elementary functions for [`BigReal`].
//!
//! Every function evaluates with one guard limb and rounds back to the
//! precision of its argument.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::real::{BigReal, MAX_LIMBS};

fn guard(limbs: usize) -> usize {
    (limbs + 1).min(MAX_LIMBS)
}

type ConstCache = Mutex<HashMap<usize, BigReal>>;

fn cached(cache: &'static OnceLock<ConstCache>, limbs: usize, f: fn(usize) -> BigReal) -> BigReal {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = map.lock().unwrap().get(&limbs) {
        return *v;
    }
    let v = f(limbs);
    map.lock().unwrap().insert(limbs, v);
    v
}

/// atan(1/k) by its Taylor series, at `limbs` limbs.
fn atan_inv(k: u64, limbs: usize) -> BigReal {
    let x = BigReal::one_limbs(limbs).div_u64(k);
    let x2 = x * x;
    let mut pow = x;
    let mut sum = x;
    let eps = sum.epsilon();
    let mut n = 1u64;
    loop {
        pow = -(pow * x2);
        n += 2;
        let term = pow.div_u64(n);
        sum += term;
        if term.abs() < eps * sum.abs() {
            break;
        }
    }
    sum
}

/// atanh(1/k) by its Taylor series.
fn atanh_inv(k: u64, limbs: usize) -> BigReal {
    let x = BigReal::one_limbs(limbs).div_u64(k);
    atanh_series(x)
}

/// atanh(x) for small |x|.
fn atanh_series(x: BigReal) -> BigReal {
    let x2 = x * x;
    let mut pow = x;
    let mut sum = x;
    let eps = sum.epsilon();
    let mut n = 1u64;
    loop {
        pow *= x2;
        n += 2;
        let term = pow.div_u64(n);
        sum += term;
        if term.is_zero() || term.abs() < eps * sum.abs() {
            break;
        }
    }
    sum
}

fn pi_uncached(limbs: usize) -> BigReal {
    let w = guard(limbs);
    let a = atan_inv(5, w);
    let b = atan_inv(239, w);
    ((a.mul_pow2(2) - b).mul_pow2(2)).with_limbs(limbs)
}

fn ln2_uncached(limbs: usize) -> BigReal {
    let w = guard(limbs);
    atanh_inv(3, w).mul_pow2(1).with_limbs(limbs)
}

/// π at `limbs` limbs (cached).
pub(crate) fn pi_limbs(limbs: usize) -> BigReal {
    static CACHE: OnceLock<ConstCache> = OnceLock::new();
    cached(&CACHE, limbs, pi_uncached)
}

/// ln 2 at `limbs` limbs (cached).
pub(crate) fn ln2_limbs(limbs: usize) -> BigReal {
    static CACHE: OnceLock<ConstCache> = OnceLock::new();
    cached(&CACHE, limbs, ln2_uncached)
}

/// π at the given precision.
pub fn pi(bits: u32) -> BigReal {
    pi_limbs(super::real::limbs_for_bits(bits))
}

/// ln 2 at the given precision.
pub fn ln2(bits: u32) -> BigReal {
    ln2_limbs(super::real::limbs_for_bits(bits))
}

impl BigReal {
    /// Square root; NaN for negative input.
    pub fn sqrt(&self) -> BigReal {
        if self.is_nan() || self.is_negative() {
            return BigReal::nan_limbs(self.limbs());
        }
        if self.is_zero() {
            return *self;
        }
        let n = self.limbs();
        let w = guard(n);
        let x = self.with_limbs(w);
        let e = x.exponent().unwrap();
        let k = e.div_euclid(2);
        let m = x.mul_pow2(-2 * k); // in [1/4, 1)
        let mut y = BigReal::from_f64_limbs(1.0 / m.to_f64().sqrt(), w);
        let half = BigReal::from_f64_limbs(0.5, w);
        let three = BigReal::from_u64_limbs(3, w);
        let iters = newton_iterations(w);
        for _ in 0..iters {
            y = y * (three - m * y * y) * half;
        }
        let mut s = m * y;
        s += y * (m - s * s) * half;
        s.mul_pow2(k).with_limbs(n)
    }

    /// e^x.
    pub fn exp(&self) -> BigReal {
        let n = self.limbs();
        if self.is_nan() {
            return *self;
        }
        if self.is_zero() {
            return BigReal::one_limbs(n);
        }
        if self.exponent().unwrap() > 62 {
            return if self.is_negative() {
                BigReal::zero_limbs(n)
            } else {
                BigReal::nan_limbs(n)
            };
        }
        let w = guard(n);
        let x = self.with_limbs(w);
        let ln2 = ln2_limbs(guard(w));
        let k = (x.with_limbs(guard(w)) / ln2).round_to_i64();
        let r = (x.with_limbs(guard(w)) - ln2 * BigReal::from_i64_limbs(k, guard(w))).with_limbs(w);
        let j = 8 + 2 * w as i64;
        let q = expm1_taylor(r.mul_pow2(-j));
        // (1+q)^2 = 1 + (2q + q^2)
        let mut q = q;
        for _ in 0..j {
            q = q.mul_pow2(1) + q * q;
        }
        let one = BigReal::one_limbs(w);
        (one + q).mul_pow2(k).with_limbs(n)
    }

    /// e^x - 1, accurate for small |x|.
    pub fn expm1(&self) -> BigReal {
        let n = self.limbs();
        if self.is_zero() || self.is_nan() {
            return *self;
        }
        if self.exponent().unwrap() < -2 {
            let w = guard(n);
            let j = 8 + 2 * w as i64;
            let mut q = expm1_taylor(self.with_limbs(w).mul_pow2(-j));
            for _ in 0..j {
                q = q.mul_pow2(1) + q * q;
            }
            return q.with_limbs(n);
        }
        let w = guard(n);
        (self.with_limbs(w).exp() - BigReal::one_limbs(w)).with_limbs(n)
    }

    /// Natural logarithm; NaN for non-positive input.
    pub fn ln(&self) -> BigReal {
        let n = self.limbs();
        if self.is_nan() || !self.is_positive() {
            return BigReal::nan_limbs(n);
        }
        let w = guard(n);
        let x = self.with_limbs(w);
        let one = BigReal::one_limbs(w);
        let d = x - one;
        if d.is_zero() {
            return BigReal::zero_limbs(n);
        }
        if d.exponent().unwrap() <= -2 {
            // |x - 1| < 1/4: ln x = 2 atanh((x-1)/(x+1))
            let t = d / (x + one);
            return atanh_series(t).mul_pow2(1).with_limbs(n);
        }
        let e = x.exponent().unwrap();
        let m = x.mul_pow2(-e).to_f64();
        let seed = m.ln() + e as f64 * std::f64::consts::LN_2;
        let mut y = BigReal::from_f64_limbs(seed, w);
        // Halley: cubic convergence from a 53-bit seed
        let mut bits = 50.0;
        while bits < 64.0 * w as f64 + 8.0 {
            let ey = y.exp();
            y += (x - ey).mul_pow2(1) / (x + ey);
            bits *= 3.0;
        }
        y.with_limbs(n)
    }

    /// self^e for self > 0.
    pub fn pow(&self, e: &BigReal) -> BigReal {
        if e.is_zero() {
            return BigReal::one_limbs(self.limbs().max(e.limbs()));
        }
        let w = guard(self.limbs().max(e.limbs()));
        (e.with_limbs(w) * self.with_limbs(w).ln())
            .exp()
            .with_limbs(self.limbs().max(e.limbs()))
    }

    /// (sin x, cos x).
    pub fn sin_cos(&self) -> (BigReal, BigReal) {
        let n = self.limbs();
        if self.is_nan() {
            return (*self, *self);
        }
        if self.is_zero() {
            return (*self, BigReal::one_limbs(n));
        }
        let ex = self.exponent().unwrap().max(0) as usize;
        let w = guard(n);
        let wr = (w + ex / 64 + 1).min(MAX_LIMBS);
        let half_pi = pi_limbs(wr).mul_pow2(-1);
        let xr = self.with_limbs(wr);
        let k = (xr / half_pi).round_to_i64();
        let r = (xr - half_pi * BigReal::from_i64_limbs(k, wr)).with_limbs(w);
        let j = 8 + w as i64;
        let th = r.mul_pow2(-j);
        // s = sin(th), v = 1 - cos(th)
        let th2 = th * th;
        let mut s = th;
        let mut term = th;
        let eps = th.epsilon();
        let mut i = 1u64;
        loop {
            term = -(term * th2).div_u64((i + 1) * (i + 2));
            i += 2;
            s += term;
            if term.is_zero() || term.abs() < eps * s.abs() {
                break;
            }
        }
        let mut v = th2.mul_pow2(-1);
        let mut term = v;
        let mut i = 2u64;
        loop {
            term = -(term * th2).div_u64((i + 1) * (i + 2));
            i += 2;
            v += term;
            if term.is_zero() || term.abs() < eps * v.abs() {
                break;
            }
        }
        let one = BigReal::one_limbs(w);
        for _ in 0..j {
            let s2 = (s * (one - v)).mul_pow2(1);
            v = (s * s).mul_pow2(1);
            s = s2;
        }
        let c = one - v;
        let (sin, cos) = match k.rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        };
        (sin.with_limbs(n), cos.with_limbs(n))
    }

    pub fn sin(&self) -> BigReal {
        self.sin_cos().0
    }

    pub fn cos(&self) -> BigReal {
        self.sin_cos().1
    }

    /// Arctangent in (-π/2, π/2).
    pub fn atan(&self) -> BigReal {
        let n = self.limbs();
        if self.is_zero() || self.is_nan() {
            return *self;
        }
        let w = guard(n);
        let mut x = self.with_limbs(w);
        let one = BigReal::one_limbs(w);
        let mut invert = false;
        if x.abs() > one {
            x = one / x;
            invert = true;
        }
        // atan x = 2 atan(x / (1 + sqrt(1 + x^2)))
        let mut doublings = 0;
        while x.exponent().unwrap() > -10 {
            x = x / (one + (one + x * x).sqrt());
            doublings += 1;
        }
        let x2 = x * x;
        let mut pow = x;
        let mut sum = x;
        let eps = x.epsilon();
        let mut k = 1u64;
        loop {
            pow = -(pow * x2);
            k += 2;
            let term = pow.div_u64(k);
            sum += term;
            if term.is_zero() || term.abs() < eps * sum.abs() {
                break;
            }
        }
        let mut r = sum.mul_pow2(doublings);
        if invert {
            let hp = pi_limbs(w).mul_pow2(-1);
            r = if r.is_negative() { -hp - r } else { hp - r };
        }
        r.with_limbs(n)
    }

    /// Four-quadrant arctangent of self / x, in (-π, π].
    pub fn atan2(&self, x: &BigReal) -> BigReal {
        let y = self;
        let n = y.limbs().max(x.limbs());
        let pi = pi_limbs(n);
        if x.is_zero() {
            return if y.is_zero() {
                BigReal::zero_limbs(n)
            } else if y.is_negative() {
                -pi.mul_pow2(-1)
            } else {
                pi.mul_pow2(-1)
            };
        }
        let a = (*y / *x).atan();
        if x.is_positive() {
            a
        } else if y.is_negative() {
            a - pi
        } else {
            a + pi
        }
    }
}

/// Taylor series of e^x - 1 for small |x|.
fn expm1_taylor(x: BigReal) -> BigReal {
    if x.is_zero() {
        return x;
    }
    let mut term = x;
    let mut sum = x;
    let eps = x.epsilon();
    let mut k = 1u64;
    loop {
        k += 1;
        term = (term * x).div_u64(k);
        sum += term;
        if term.is_zero() || term.abs() < eps * sum.abs() {
            break;
        }
    }
    sum
}

fn newton_iterations(limbs: usize) -> usize {
    let mut bits = 50usize;
    let mut it = 0;
    while bits < 64 * limbs + 8 {
        bits *= 2;
        it += 1;
    }
    it
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI_100: &str = "3.1415926535897932384626433832795028841971693993751058209749445923078164062862089986280348253421170679";
    const LN2_100: &str = "0.69314718055994530941723212145817656807550013436025525412068000949339362196969471560586332699641868754";
    const E_100: &str = "2.7182818284590452353602874713526624977572470936999595749669676277240766303535475945713821785251664274";

    fn close(a: BigReal, b: BigReal, tol: f64) -> bool {
        let d = (a - b).abs();
        let scale = b.abs();
        (d / scale).to_f64() <= tol
    }

    fn parse(s: &str) -> BigReal {
        BigReal::parse_decimal(s, 512).unwrap()
    }

    #[test]
    fn constants_match_known_digits() {
        assert!(close(pi(512), parse(PI_100), 1e-99));
        assert!(close(ln2(512), parse(LN2_100), 1e-99));
        assert!(close(BigReal::one(512).exp(), parse(E_100), 1e-99));
    }

    #[test]
    fn sqrt_squares_back() {
        for &v in &[2.0, 0.3, 1e-50, 7.5e80] {
            let x = BigReal::from_f64(v, 512);
            let s = x.sqrt();
            assert!(close(s * s, x, 1e-150), "{v}");
        }
    }

    #[test]
    fn exp_ln_inverse() {
        for &v in &[-40.0, -1.0, -1e-9, 0.2, 1.0, 3.7, 100.0] {
            let x = BigReal::from_f64(v, 512);
            let y = x.exp().ln();
            assert!((y - x).abs().to_f64() <= 1e-150 * v.abs().max(1.0), "{v}");
        }
        for &v in &[1.1, 0.9, 1.0 + 1e-30, 5.0, 1e-300] {
            let x = BigReal::from_f64(v, 512);
            assert!(close(x.ln().exp(), x, 1e-150), "{v}");
        }
    }

    #[test]
    fn ln_near_one_is_relatively_accurate() {
        let x = BigReal::one(512) + BigReal::from_f64(1e-40, 512);
        let l = x.ln();
        assert!(close(l, BigReal::from_f64(1e-40, 512), 1e-39));
    }

    #[test]
    fn expm1_small() {
        let x = BigReal::from_f64(1e-30, 256);
        let e = x.expm1();
        assert!(close(e, x, 1e-29));
    }

    #[test]
    fn trig_identities() {
        for &v in &[0.1, 1.0, 2.5, -4.0, 100.0] {
            let x = BigReal::from_f64(v, 512);
            let (s, c) = x.sin_cos();
            let one = BigReal::one(512);
            assert!(((s * s + c * c) - one).abs().to_f64() < 1e-150);
            assert!((s.to_f64() - v.sin()).abs() < 1e-15);
            assert!((c.to_f64() - v.cos()).abs() < 1e-15);
        }
        let p = pi(512);
        assert!(p.sin().abs().to_f64() < 1e-150);
    }

    #[test]
    fn atan_values() {
        let one = BigReal::one(512);
        let four_atan1 = one.atan().mul_pow2(2);
        assert!(close(four_atan1, pi(512), 1e-150));
        for &v in &[0.3, -2.0, 50.0] {
            let a = BigReal::from_f64(v, 512).atan().to_f64();
            assert!((a - v.atan()).abs() < 1e-15);
        }
        let a = BigReal::from_f64(-1.0, 256).atan2(&BigReal::from_f64(-1.0, 256));
        assert!((a.to_f64() + 0.75 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn pow_fractional() {
        let x = BigReal::from_f64(8.0, 512);
        let t = BigReal::from_ratio(1, 3, 512);
        assert!(close(x.pow(&t), BigReal::from_f64(2.0, 512), 1e-150));
    }
}
