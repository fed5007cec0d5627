//! Partial fractions of r(s)/s and the term-wise inverse Laplace transform.
//!
//! With r(s) = r(∞) + Σ_j ρ_j/(s − p_j),
//! r(s)/s = r(0)/s + Σ_j (ρ_j/p_j)/(s − p_j), so K̃(t) = r(0) + Σ_j (ρ_j/p_j) e^{p_j t}.

use super::barycentric::BarycentricRational;
use super::poles::residues;
use crate::error::{Error, Result};
use crate::mp::{Complex, Real, RealField};

#[derive(Clone, Debug)]
pub struct PfdOptions {
    /// Relative size of imaginary parts treated as rounding noise.
    pub imag_tol: f64,
    /// Minimum relative spacing between distinct poles.
    pub spacing_tol: f64,
    /// Terms whose L1[0, 1] mass |w|·min(1, 1/λ) is below this are dropped
    /// before validation.
    pub negligible: f64,
}

impl PfdOptions {
    /// Defaults for an AAA run at relative tolerance `rel_tol`.
    pub fn for_tolerance(rel_tol: f64) -> Self {
        PfdOptions {
            imag_tol: 1e-30,
            spacing_tol: 1e-3,
            negligible: 1e-3 * rel_tol,
        }
    }
}

/// One exponential term w·e^{−λt} at working precision.
#[derive(Clone, Debug)]
pub struct HighTerm<T> {
    pub w: T,
    pub lambda: T,
}

/// Exponential sum of r(s)/s, sorted by ascending λ.
pub fn partial_fractions<T: RealField>(
    r: &BarycentricRational<T>,
    poles: &[Complex<T>],
    opts: &PfdOptions,
) -> Result<Vec<HighTerm<T>>> {
    let proto = r.support[0];
    let zero = Real::zero_like(&proto);
    let res = residues(r, poles);
    let mut cand: Vec<(Complex<T>, Complex<T>)> = Vec::with_capacity(poles.len() + 1);
    cand.push((Complex::real(r.eval(zero)), Complex::real(zero)));
    for (p, rho) in poles.iter().zip(&res) {
        cand.push((*rho / *p, -*p));
    }
    let mut terms = Vec::with_capacity(cand.len());
    let mut offenders = Vec::new();
    let mut dropped = 0usize;
    for (w, lam) in cand {
        let wa = w.norm().to_f64();
        let la = lam.norm().to_f64();
        if !(wa.is_finite() && la.is_finite()) {
            offenders.push(format!("non-finite term w={:?} λ={:?}", w.to_f64_pair(), lam.to_f64_pair()));
            continue;
        }
        if wa * if la > 1.0 { 1.0 / la } else { 1.0 } <= opts.negligible {
            dropped += 1;
            continue;
        }
        let w_im = w.im.to_f64().abs();
        let l_im = lam.im.to_f64().abs();
        if w_im > opts.imag_tol * wa || l_im > opts.imag_tol * la {
            offenders.push(format!(
                "non-real term w={:?} λ={:?}",
                w.to_f64_pair(),
                lam.to_f64_pair()
            ));
            continue;
        }
        let (wr, lr) = (w.re, lam.re);
        if !(wr > zero) || lr < zero {
            offenders.push(format!("non-positive term w={:e} λ={:e}", wr.to_f64(), lr.to_f64()));
            continue;
        }
        terms.push(HighTerm { w: wr, lambda: lr });
    }
    if !offenders.is_empty() {
        return Err(Error::Validation(format!(
            "{} invalid exponential terms: {}",
            offenders.len(),
            offenders.join("; ")
        )));
    }
    if dropped > 0 {
        log::debug!("dropped {dropped} negligible exponential terms");
    }
    terms.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap_or(std::cmp::Ordering::Equal));
    let lams: Vec<f64> = terms.iter().map(|t| t.lambda.to_f64()).collect();
    check_spacing(&lams, opts.spacing_tol)?;
    Ok(terms)
}

/// Reject sorted decay rates closer than `tol` relative spacing.
pub fn check_spacing(sorted: &[f64], tol: f64) -> Result<()> {
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if (b - a) < tol * b.abs().max(a.abs()) {
            return Err(Error::Conditioning(format!("near-multiple poles at λ = {a:e} and {b:e}")));
        }
    }
    Ok(())
}

trait PairF64 {
    fn to_f64_pair(&self) -> (f64, f64);
}

impl<T: RealField> PairF64 for Complex<T> {
    fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-point barycentric form of (a s + b)/(s + 1) through z = 1, 2.
    fn ratio(a: f64, b: f64) -> BarycentricRational<f64> {
        let f = |s: f64| (a * s + b) / (s + 1.0);
        // denominator root at −1 needs ω₁(−3) + ω₂(−2) = 0
        BarycentricRational::new(vec![1.0, 2.0], vec![f(1.0), f(2.0)], vec![-2.0, 3.0])
    }

    #[test]
    fn s_over_s_plus_one_gives_single_exponential() {
        let r = ratio(1.0, 0.0);
        let p = vec![Complex::new(-1.0, 0.0)];
        let t = partial_fractions(&r, &p, &PfdOptions::for_tolerance(1e-13)).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].w - 1.0).abs() < 1e-14 && (t[0].lambda - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let r = ratio(1.0, 2.0);
        let p = vec![Complex::new(-1.0, 0.0)];
        let e = partial_fractions(&r, &p, &PfdOptions::for_tolerance(1e-13)).unwrap_err();
        assert!(matches!(e, Error::Validation(_)), "{e:?}");
        assert!(e.to_string().contains("non-positive"));
    }

    #[test]
    fn complex_terms_are_rejected() {
        let r = ratio(1.0, 0.0);
        let p = vec![Complex::new(-1.0, 0.5)];
        let e = partial_fractions(&r, &p, &PfdOptions::for_tolerance(1e-13)).unwrap_err();
        assert!(e.to_string().contains("non-real"));
    }

    #[test]
    fn close_poles_are_a_conditioning_error() {
        assert!(check_spacing(&[0.0, 1.0, 5.0, 10.0], 1e-3).is_ok());
        let e = check_spacing(&[1.0, 5.0, 5.001], 1e-3).unwrap_err();
        assert!(matches!(e, Error::Conditioning(_)));
    }
}
