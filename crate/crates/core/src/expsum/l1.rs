//! Certified L1 distance between a kernel and its exponential sum.
//!
//! The integral ∫_a^b |K − K̃| dt is computed in u = ln t, split at the sign
//! changes of K − K̃ found on a log-spaced scan, and integrated piecewise by
//! adaptive Gauss–Kronrod quadrature. Continuous kernels are evaluated
//! through a Chebyshev expansion of K(e^u), which is entire in u; its
//! truncation is checked against the tail coefficients and against direct
//! evaluations off the interpolation nodes.

use serde::{Deserialize, Serialize};

use super::compress::ExpTerm;
use super::pfd::HighTerm;
use crate::error::{Error, Result};
use crate::kernels::quadrature::integrate_adaptive_lenient;
use crate::kernels::{AdaptiveOptions, DOKernel};
use crate::mp::{pi, BigReal};

/// Working precision of the L1 evaluation.
pub const L1_PRECISION_BITS: u32 = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Options {
    pub interval: (f64, f64),
    pub abs_tol: f64,
    /// Scan points per decade used to locate sign changes.
    pub per_decade: usize,
    pub bits: u32,
}

impl L1Options {
    /// Absolute tolerance min(1e-18, 1e-3·rel_tol) on [1e-5, 1].
    pub fn for_tolerance(rel_tol: f64) -> Self {
        L1Options {
            interval: (1e-5, 1.0),
            abs_tol: (1e-3 * rel_tol).min(1e-18),
            per_decade: 200,
            bits: L1_PRECISION_BITS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Report {
    pub value: f64,
    /// Sum of quadrature error estimates.
    pub error_estimate: f64,
    pub sign_changes: usize,
    pub met_tolerance: bool,
    pub evaluations: usize,
}

/// K(e^u) at arbitrary precision.
#[derive(Clone, Debug)]
pub enum KernelEvaluator {
    Zero,
    /// Σ c_k e^{e_k u}.
    Powers(Vec<(BigReal, BigReal)>),
    /// Chebyshev series on [u0, u1].
    Chebyshev { u0: BigReal, u1: BigReal, coeffs: Vec<BigReal> },
}

impl KernelEvaluator {
    /// Evaluator for `k` on t ∈ [a, b] with pointwise accuracy `point_tol`.
    pub fn build(k: &DOKernel, interval: (f64, f64), bits: u32, point_tol: f64) -> Result<Self> {
        if k.is_zero() {
            return Ok(KernelEvaluator::Zero);
        }
        let i = BigReal::from_i64(k.index as i64, bits);
        let one = BigReal::one(bits);
        if let Some(terms) = k.discrete_terms(bits) {
            let mut out = Vec::with_capacity(terms.len());
            for (a, c) in terms {
                if c.is_zero() {
                    continue;
                }
                out.push((i - a - one, c * crate::mp::rgamma(&(i - a))?));
            }
            return Ok(KernelEvaluator::Powers(out));
        }
        let (a, b) = interval;
        let u0 = BigReal::from_f64(a, bits).ln();
        let u1 = BigReal::from_f64(b, bits).ln();
        let inner = point_tol * 1e-2;
        let mut n = 48;
        loop {
            let coeffs = chebyshev_fit(|u| k.eval(&u.exp(), inner), &u0, &u1, n)?;
            let tail = coeffs[n - 6..].iter().map(|c| c.abs().to_f64()).fold(0.0, f64::max);
            if tail <= point_tol * 1e-3 {
                let ev = KernelEvaluator::Chebyshev { u0, u1, coeffs };
                ev.verify(k, inner, point_tol)?;
                return Ok(ev);
            }
            if n >= 768 {
                return Err(Error::Accuracy {
                    message: format!("Chebyshev expansion of {} did not resolve", k.id()),
                    achieved: tail,
                });
            }
            n *= 2;
        }
    }

    /// Compare against direct evaluation at points off the Chebyshev nodes.
    fn verify(&self, k: &DOKernel, inner: f64, point_tol: f64) -> Result<()> {
        let KernelEvaluator::Chebyshev { u0, u1, .. } = self else {
            return Ok(());
        };
        for frac in [0.013, 0.377, 0.861] {
            let u = *u0 + (*u1 - *u0) * BigReal::from_f64(frac, u0.precision());
            let direct = k.eval(&u.exp(), inner)?;
            let d = (self.eval_u(&u) - direct).abs().to_f64();
            if d > point_tol {
                return Err(Error::Accuracy {
                    message: format!("Chebyshev kernel expansion off by {d:e} at u = {}", u.to_f64()),
                    achieved: d,
                });
            }
        }
        Ok(())
    }

    /// K(e^u).
    pub fn eval_u(&self, u: &BigReal) -> BigReal {
        match self {
            KernelEvaluator::Zero => u.zero_like(),
            KernelEvaluator::Powers(t) => {
                let mut s = u.zero_like();
                for (e, c) in t {
                    s += *c * (*e * *u).exp();
                }
                s
            }
            KernelEvaluator::Chebyshev { u0, u1, coeffs } => {
                let x = ((*u * BigReal::from_u64_limbs(2, u.limbs())) - *u0 - *u1) / (*u1 - *u0);
                clenshaw(coeffs, &x)
            }
        }
    }
}

/// Chebyshev coefficients of f on [u0, u1] from n first-kind nodes.
fn chebyshev_fit(
    mut f: impl FnMut(&BigReal) -> Result<BigReal>,
    u0: &BigReal,
    u1: &BigReal,
    n: usize,
) -> Result<Vec<BigReal>> {
    let bits = u0.precision();
    // cos(π m / (2n)) for m = 0..4n
    let p = pi(bits);
    let table: Vec<BigReal> = (0..4 * n)
        .map(|m| (p * BigReal::from_ratio(m as i64, 2 * n as i64, bits)).cos())
        .collect();
    let half = (*u1 - *u0).mul_pow2(-1);
    let mid = (*u1 + *u0).mul_pow2(-1);
    let mut vals = Vec::with_capacity(n);
    for j in 0..n {
        let x = table[2 * j + 1];
        vals.push(f(&(mid + half * x))?);
    }
    let scale = BigReal::from_ratio(2, n as i64, bits);
    let mut coeffs = Vec::with_capacity(n);
    for k in 0..n {
        let mut s = BigReal::zero(bits);
        for (j, v) in vals.iter().enumerate() {
            s += *v * table[(k * (2 * j + 1)) % (4 * n)];
        }
        coeffs.push(s * scale);
    }
    coeffs[0] = coeffs[0].mul_pow2(-1);
    Ok(coeffs)
}

fn clenshaw(c: &[BigReal], x: &BigReal) -> BigReal {
    let two_x = x.mul_pow2(1);
    let mut b1 = x.zero_like();
    let mut b2 = x.zero_like();
    for ck in c.iter().skip(1).rev() {
        let b0 = *ck + two_x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + *x * b1 - b2
}

/// Σ w_j e^{−λ_j t} at the precision of `t`.
pub fn exp_sum_big(terms: &[ExpTerm], t: &BigReal) -> BigReal {
    let cutoff = t.precision() as f64 * std::f64::consts::LN_2 + 60.0;
    let tf = t.to_f64();
    let mut s = t.zero_like();
    for term in terms {
        if term.w == 0.0 {
            continue;
        }
        let x = term.lambda * tf;
        if x > cutoff + term.w.abs().ln().max(0.0) {
            continue;
        }
        let lam = BigReal::from_f64_like(t, term.lambda);
        s += BigReal::from_f64_like(t, term.w) * (-(lam * *t)).exp();
    }
    s
}

/// ∫_a^b |K − K̃| dt.
pub fn l1_error(k: &DOKernel, terms: &[ExpTerm], opts: &L1Options) -> Result<L1Report> {
    l1_error_of(k, SumTerms::Double(terms), opts)
}

/// Terms of the exponential sum under test.
#[derive(Clone, Copy, Debug)]
pub enum SumTerms<'a> {
    Double(&'a [ExpTerm]),
    /// Unrounded (w, λ) pairs.
    High(&'a [HighTerm<BigReal>]),
}

impl SumTerms<'_> {
    fn eval(&self, t: &BigReal) -> BigReal {
        match self {
            SumTerms::Double(terms) => exp_sum_big(terms, t),
            SumTerms::High(terms) => {
                let cutoff = t.precision() as f64 * std::f64::consts::LN_2 + 60.0;
                let tf = t.to_f64();
                let mut s = t.zero_like();
                for term in terms.iter() {
                    if term.w.is_zero() || term.lambda.to_f64() * tf > cutoff + term.w.to_f64().abs().ln().max(0.0) {
                        continue;
                    }
                    s += term.w * (-(term.lambda * *t)).exp();
                }
                s
            }
        }
    }
}

/// [`l1_error`] for either term representation.
pub fn l1_error_of(k: &DOKernel, terms: SumTerms, opts: &L1Options) -> Result<L1Report> {
    let (a, b) = opts.interval;
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(Error::domain(format!("L1 interval [{a}, {b}] must lie in (0, ∞)")));
    }
    let bits = opts.bits;
    let point_tol = opts.abs_tol * 1e-2 / (b - a);
    let kev = KernelEvaluator::build(k, (a, b), bits, point_tol)?;
    l1_sum_with_evaluator(&kev, terms, opts)
}

/// [`l1_error`] with a prebuilt kernel evaluator.
pub fn l1_with_evaluator(kev: &KernelEvaluator, terms: &[ExpTerm], opts: &L1Options) -> Result<L1Report> {
    l1_sum_with_evaluator(kev, SumTerms::Double(terms), opts)
}

fn l1_sum_with_evaluator(kev: &KernelEvaluator, terms: SumTerms, opts: &L1Options) -> Result<L1Report> {
    let (a, b) = opts.interval;
    let bits = opts.bits;
    let mut evals = 0usize;
    let g = |u: &BigReal| -> BigReal { kev.eval_u(u) - terms.eval(&u.exp()) };
    let u0 = BigReal::from_f64(a, bits).ln();
    let u1 = BigReal::from_f64(b, bits).ln();
    let decades = (b / a).log10();
    let npts = ((decades * opts.per_decade as f64).ceil() as usize).max(2) + 1;
    let du = (u1 - u0) / BigReal::from_i64(npts as i64 - 1, bits);
    let us: Vec<BigReal> = (0..npts)
        .map(|j| if j + 1 == npts { u1 } else { u0 + du * BigReal::from_i64(j as i64, bits) })
        .collect();
    let gs: Vec<BigReal> = us.iter().map(&g).collect();
    evals += npts;
    let mut cuts = vec![u0];
    for j in 0..npts - 1 {
        if gs[j].is_zero() && j > 0 {
            cuts.push(us[j]);
            continue;
        }
        if (gs[j].is_negative() && gs[j + 1].is_positive()) || (gs[j].is_positive() && gs[j + 1].is_negative()) {
            let (root, n) = illinois(&g, us[j], us[j + 1], gs[j], gs[j + 1]);
            evals += n;
            cuts.push(root);
        }
    }
    cuts.push(u1);
    let sign_changes = cuts.len() - 2;
    let pieces = cuts.len() - 1;
    let piece_tol = opts.abs_tol / pieces as f64;
    let qopts = AdaptiveOptions {
        order: 20,
        max_depth: 60,
        max_segments: 400,
    };
    let mut total = BigReal::zero(bits);
    let mut err = 0.0;
    let mut met = true;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (r, failure) = integrate_adaptive_lenient(|u| g(u).abs() * u.exp(), &w[0], &w[1], piece_tol, &qopts)?;
        evals += r.evaluations;
        if let Some(msg) = failure {
            log::warn!("L1 quadrature on [{:e}, {:e}]: {msg}", w[0].exp().to_f64(), w[1].exp().to_f64());
            met = false;
        }
        total += r.value;
        err += r.error;
    }
    if !met {
        log::warn!("L1 error tolerance {:e} not met; achieved bound {err:e}", opts.abs_tol);
    }
    Ok(L1Report {
        value: total.to_f64(),
        error_estimate: err,
        sign_changes,
        met_tolerance: met && err <= opts.abs_tol,
        evaluations: evals,
    })
}

/// Illinois variant of regula falsi on a sign-changing bracket.
fn illinois(g: &impl Fn(&BigReal) -> BigReal, mut a: BigReal, mut b: BigReal, mut fa: BigReal, mut fb: BigReal) -> (BigReal, usize) {
    let tol = BigReal::from_f64(1e-32, a.precision());
    let mut side = 0i8;
    let mut n = 0;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c <= a || c >= b { (a + b).mul_pow2(-1) } else { c };
        let fc = g(&c);
        n += 1;
        if fc.is_zero() {
            return (c, n);
        }
        if fc.is_negative() == fb.is_negative() {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa.mul_pow2(-1);
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb.mul_pow2(-1);
            }
            side = 1;
        }
    }
    ((a + b).mul_pow2(-1), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::WeightFunctionSpec;
    use std::sync::Arc;

    #[test]
    fn kernel_against_empty_sum() {
        // ∫ t^{-0.5}/Γ(0.5) dt over [a, b] = 2(√b − √a)/Γ(0.5)
        let w = Arc::new(WeightFunctionSpec::single_order(0.5).unwrap());
        let k = DOKernel::new(w, 1).unwrap();
        let opts = L1Options {
            interval: (1e-5, 1.0),
            abs_tol: 1e-30,
            per_decade: 20,
            bits: 256,
        };
        let r = l1_error(&k, &[], &opts).unwrap();
        let exact = 2.0 * (1.0 - 1e-5f64.sqrt()) / std::f64::consts::PI.sqrt();
        assert!((r.value - exact).abs() < 1e-15 * exact, "{} vs {exact}", r.value);
        assert_eq!(r.sign_changes, 0);
        assert!(r.met_tolerance);
    }

    #[test]
    fn pure_exponential_difference() {
        // zero kernel against e^{-t}
        let kev = KernelEvaluator::Powers(vec![]);
        let terms = [ExpTerm { w: 1.0, lambda: 1.0 }];
        let opts = L1Options {
            interval: (1e-5, 1.0),
            abs_tol: 1e-40,
            per_decade: 20,
            bits: 256,
        };
        let r = l1_with_evaluator(&kev, &terms, &opts).unwrap();
        let exact = (-1e-5f64).exp() - (-1f64).exp();
        assert!((r.value - exact).abs() < 1e-15);
    }

    #[test]
    fn sign_changes_are_split() {
        // K = 1 (power t^0) against K̃ = 2 e^{-t}: difference changes sign at ln 2
        let kev = KernelEvaluator::Powers(vec![(BigReal::zero(256), BigReal::one(256))]);
        let terms = [ExpTerm { w: 2.0, lambda: 1.0 }];
        let opts = L1Options {
            interval: (1e-5, 1.0),
            abs_tol: 1e-40,
            per_decade: 50,
            bits: 256,
        };
        let r = l1_with_evaluator(&kev, &terms, &opts).unwrap();
        assert_eq!(r.sign_changes, 1);
        let l2 = std::f64::consts::LN_2;
        let f = |t: f64| t + 2.0 * (-t).exp();
        let exact = (f(l2) - f(1e-5)).abs() + (f(1.0) - f(l2)).abs();
        assert!((r.value - exact).abs() < 1e-14, "{} vs {exact}", r.value);
        assert!(r.met_tolerance);
    }

    #[test]
    fn chebyshev_evaluator_matches_direct_evaluation() {
        let w = Arc::new(WeightFunctionSpec::exm2());
        let k = DOKernel::new(w, 1).unwrap();
        let ev = KernelEvaluator::build(&k, (1e-5, 1.0), 256, 1e-40).unwrap();
        for t in [1e-5, 3e-4, 0.02, 0.5, 1.0] {
            let tb = BigReal::from_f64(t, 256);
            let d = (ev.eval_u(&tb.ln()) - k.eval(&tb, 1e-45).unwrap()).abs().to_f64();
            assert!(d < 1e-40, "t = {t}: {d:e}");
        }
        // K₁(1) = 9/4 for φ = Γ(4−α)
        let v = ev.eval_u(&BigReal::zero(256)).to_f64();
        assert!((v - 2.25).abs() < 1e-15);
    }
}
