//! Gamma function by Spouge's approximation.
//!
//! With integer parameter `a`, Spouge's formula
//! Γ(z+1) = (z+a)^(z+1/2) e^-(z+a) [c0 + Σ_{k=1}^{a-1} c_k/(z+k) + ε]
//! has relative error below a^(-1/2) (2π)^-(a+1/2) for Re z > 0. The
//! coefficients alternate in sign and exceed the size of the sum, so the sum
//! is evaluated with guard bits covering the largest coefficient plus 64.
//!
//! Effective precision: the relative error of [`gamma`] is below
//! `10 · 2^-p` for requested precision `p` up to 1024 bits.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::elementary::pi_limbs;
use super::real::{limbs_for_bits, BigReal, MAX_LIMBS};
use crate::error::{Error, Result};

struct Spouge {
    a: u64,
    limbs: usize,
    /// c_0 .. c_{a-1}
    coeffs: Vec<BigReal>,
}

fn spouge_parameter(bits: u32) -> u64 {
    // smallest a with a^(-1/2) (2π)^-(a+1/2) < 2^-(bits+4)
    let target = (bits as f64 + 4.0) * std::f64::consts::LN_2;
    let l2pi = (2.0 * std::f64::consts::PI).ln();
    let mut a = 2u64;
    while 0.5 * (a as f64).ln() + (a as f64 + 0.5) * l2pi < target {
        a += 1;
    }
    a
}

/// log2 of the largest |c_k|.
fn max_coeff_log2(a: u64) -> f64 {
    let mut best = 0.0f64;
    let mut lfact = 0.0f64; // ln((k-1)!)
    for k in 1..a {
        if k > 1 {
            lfact += ((k - 1) as f64).ln();
        }
        let ak = (a - k) as f64;
        let l = (k as f64 - 0.5) * ak.ln() + ak - lfact;
        best = best.max(l / std::f64::consts::LN_2);
    }
    best
}

fn build(bits: u32) -> Spouge {
    let a = spouge_parameter(bits);
    // the sum is of order e^a, so only the excess over that cancels
    let excess = max_coeff_log2(a) - a as f64 * std::f64::consts::LOG2_E;
    let guard_bits = excess.max(0.0).ceil() as u32 + 64;
    let limbs = limbs_for_bits(bits + guard_bits).min(MAX_LIMBS);
    let one = BigReal::one_limbs(limbs);
    let two_pi = pi_limbs(limbs).mul_pow2(1);
    let mut coeffs = Vec::with_capacity(a as usize);
    coeffs.push(two_pi.sqrt());
    let half = one.mul_pow2(-1);
    let mut fact = one; // (k-1)!
    for k in 1..a {
        if k > 1 {
            fact = fact * BigReal::from_u64_limbs(k - 1, limbs);
        }
        let ak = BigReal::from_u64_limbs(a - k, limbs);
        let e = BigReal::from_u64_limbs(k, limbs) - half;
        let mut c = ak.pow(&e) * ak.exp() / fact;
        if k % 2 == 0 {
            c = -c;
        }
        coeffs.push(c);
    }
    Spouge { a, limbs, coeffs }
}

fn coefficients(bits: u32) -> Arc<Spouge> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Spouge>>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = map.lock().unwrap().get(&bits) {
        return s.clone();
    }
    let s = Arc::new(build(bits));
    map.lock().unwrap().insert(bits, s.clone());
    s
}

/// Γ(z+1) for z ≥ 0 at the table's working precision.
fn spouge_gamma1(z: BigReal, sp: &Spouge) -> BigReal {
    let l = sp.limbs;
    let z = z.with_limbs(l);
    let mut sum = sp.coeffs[0];
    for k in 1..sp.a {
        sum += sp.coeffs[k as usize] / (z + BigReal::from_u64_limbs(k, l));
    }
    let za = z + BigReal::from_u64_limbs(sp.a, l);
    let half = BigReal::one_limbs(l).mul_pow2(-1);
    let lead = ((z + half) * za.ln() - za).exp();
    lead * sum
}

/// Γ(x) for x > 0 at the precision of `x` (in bits, rounded to whole limbs).
pub fn gamma(x: &BigReal) -> Result<BigReal> {
    if x.is_nan() || !x.is_positive() {
        return Err(Error::domain(format!(
            "gamma requires a positive argument, got {}",
            x.to_f64()
        )));
    }
    let bits = x.precision();
    let sp = coefficients(bits);
    let one = BigReal::one_limbs(sp.limbs);
    let xw = x.with_limbs(sp.limbs);
    let g = if xw >= one {
        spouge_gamma1(xw - one, &sp)
    } else {
        spouge_gamma1(xw, &sp) / xw
    };
    Ok(g.with_limbs(x.limbs()))
}

/// Γ(x) at an explicit precision.
pub fn gamma_prec(x: &BigReal, bits: u32) -> Result<BigReal> {
    gamma(&x.with_precision(bits))
}

/// 1/Γ(x) for x > 0.
pub fn rgamma(x: &BigReal) -> Result<BigReal> {
    let g = gamma(x)?;
    Ok(BigReal::one_limbs(x.limbs()) / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::elementary::pi;

    fn rel(a: BigReal, b: BigReal) -> f64 {
        ((a - b) / b).abs().to_f64()
    }

    #[test]
    fn integer_and_half_values() {
        let g1 = gamma(&BigReal::one(512)).unwrap();
        assert!(rel(g1, BigReal::one(512)) < 1e-150);
        let g5 = gamma(&BigReal::from_f64(5.0, 512)).unwrap();
        assert!(rel(g5, BigReal::from_f64(24.0, 512)) < 1e-150);
        let gh = gamma(&BigReal::from_f64(0.5, 512)).unwrap();
        assert!(rel(gh, pi(512).sqrt()) < 1e-150);
        assert!((gh.to_f64() - 1.7724538509055160).abs() < 1e-15);
    }

    #[test]
    fn error_bound_at_several_precisions() {
        for &bits in &[128u32, 256, 512, 1024] {
            let x = BigReal::from_f64(0.5, bits);
            let g = gamma(&x).unwrap();
            let bound = 10.0 * 2f64.powi(-(bits as i32));
            assert!(rel(g, pi(bits).sqrt()) <= bound, "{bits}");
        }
    }

    #[test]
    fn functional_equation() {
        for &v in &[0.013, 0.37, 1.0 / 3.0, 1.9, 2.71, 4.4] {
            let x = BigReal::from_f64(v, 512);
            let one = BigReal::one(512);
            let lhs = gamma(&(x + one)).unwrap();
            let rhs = x * gamma(&x).unwrap();
            assert!(rel(lhs, rhs) < 1e-150, "{v}");
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(gamma(&BigReal::zero(256)).is_err());
        assert!(gamma(&BigReal::from_f64(-1.5, 256)).is_err());
    }

    #[test]
    fn matches_double_reference() {
        for &v in &[0.1, 0.75, 1.5, 3.3] {
            let g = gamma_prec(&BigReal::from_f64(v, 256), 256).unwrap().to_f64();
            let r = statrs::function::gamma::gamma(v);
            assert!((g - r).abs() / r < 1e-13, "{v}");
        }
    }
}
