//! The compression pipeline: s·L[K] samples, AAA, poles, partial fractions
//! of r(s)/s, inverse Laplace transform and L1 certification.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::aaa::{aaa, AaaOptions, AaaStatus};
use super::l1::{l1_error, l1_error_of, L1Options, L1Report, SumTerms};
use super::pfd::{check_spacing, partial_fractions, PfdOptions};
use super::poles::poles;
use super::support::SupportSet;
use crate::error::{Error, Result};
use crate::kernels::DOKernel;
use crate::mp::{default_precision_for, BigReal};

/// One exponential term w·e^{−λt}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub w: f64,
    pub lambda: f64,
}

/// Exponential-sum surrogate K̃(t) = Σ w_j e^{−λ_j t} of one kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressedKernel {
    pub kernel_id: String,
    /// Relative AAA tolerance.
    pub tolerance: f64,
    pub precision_bits: u32,
    /// Interval of the certified L1 error.
    pub interval: (f64, f64),
    pub l1_error: f64,
    /// L1 error of the sum before its terms are rounded to double precision.
    #[serde(default)]
    pub l1_error_unrounded: f64,
    /// Terms sorted by strictly increasing λ.
    pub terms: Vec<ExpTerm>,
    pub status: AaaStatus,
}

impl CompressedKernel {
    /// Term count m.
    pub fn m(&self) -> usize {
        self.terms.len()
    }

    /// K̃(t).
    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|e| e.w * (-e.lambda * t).exp()).sum()
    }

    /// L[K̃](s) = Σ w_j/(s + λ_j).
    pub fn laplace(&self, s: f64) -> f64 {
        self.terms.iter().map(|e| e.w / (s + e.lambda)).sum()
    }

    /// Weights and decay rates as separate vectors.
    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        (self.terms.iter().map(|e| e.w).collect(), self.terms.iter().map(|e| e.lambda).collect())
    }

    /// K̃ strictly decreasing on `points` log-spaced times of the certified
    /// interval.
    pub fn strictly_decreasing(&self, points: usize) -> bool {
        let (a, b) = (self.interval.0.log10(), self.interval.1.log10());
        let step = (b - a) / (points.max(2) - 1) as f64;
        let vals: Vec<f64> = (0..points.max(2)).map(|k| self.eval(10f64.powf(a + step * k as f64))).collect();
        vals.windows(2).all(|v| v[1] < v[0])
    }

    /// Positivity and ordering invariants.
    pub fn validate(&self) -> Result<()> {
        for (j, e) in self.terms.iter().enumerate() {
            if !(e.w.is_finite() && e.lambda.is_finite()) {
                return Err(Error::Validation(format!("term {j} is not finite")));
            }
            if !(e.w > 0.0) || e.lambda < 0.0 {
                return Err(Error::Validation(format!("term {j} has w = {:e}, λ = {:e}", e.w, e.lambda)));
            }
        }
        if self.terms.windows(2).any(|p| !(p[0].lambda < p[1].lambda)) {
            return Err(Error::Validation("decay rates are not strictly increasing".into()));
        }
        if !(self.l1_error >= 0.0 && self.l1_error_unrounded >= 0.0) {
            return Err(Error::Validation(format!("invalid L1 error {}", self.l1_error)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressOptions {
    pub rel_tol: f64,
    pub precision_bits: u32,
    pub support: SupportSet,
    pub max_terms: Option<usize>,
    /// Absolute α-quadrature tolerance for L[K] as a multiple of `rel_tol`.
    pub quad_factor: f64,
    pub cleanup: bool,
    pub l1: L1Options,
}

impl CompressOptions {
    /// Defaults for a relative AAA tolerance: default support set, precision
    /// from [`default_precision_for`], quadrature at 1e-10·tol.
    pub fn new(rel_tol: f64) -> Self {
        CompressOptions {
            rel_tol,
            precision_bits: default_precision_for(rel_tol),
            support: SupportSet::default(),
            max_terms: None,
            quad_factor: 1e-10,
            cleanup: true,
            l1: L1Options::for_tolerance(rel_tol),
        }
    }

    pub fn with_precision(mut self, bits: u32) -> Self {
        self.precision_bits = bits;
        self
    }

    pub fn with_max_terms(mut self, m: usize) -> Self {
        self.max_terms = Some(m);
        self
    }
}

/// Diagnostics of one compression.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompressionReport {
    pub aaa_status: AaaStatus,
    pub aaa_rel_error: f64,
    pub aaa_history: Vec<f64>,
    pub support_points: usize,
    pub cleaned: usize,
    pub flagged_poles: usize,
    pub l1: Option<L1Report>,
    pub seconds_sampling: f64,
    pub seconds_aaa: f64,
    pub seconds_pfd: f64,
    pub seconds_l1: f64,
}

/// Samples f(s) = s·L[K](s) on the support set.
pub fn sample_s_laplace(k: &DOKernel, support: &SupportSet, bits: u32, quad_tol: f64) -> Result<Vec<BigReal>> {
    support
        .to_big(bits)
        .iter()
        .map(|s| k.s_laplace_real(s, quad_tol))
        .collect()
}

/// Compress `k` into an exponential sum.
pub fn compress(k: &DOKernel, opts: &CompressOptions) -> Result<CompressedKernel> {
    Ok(compress_with_report(k, opts)?.0)
}

/// [`compress`] returning diagnostics as well.
pub fn compress_with_report(k: &DOKernel, opts: &CompressOptions) -> Result<(CompressedKernel, CompressionReport)> {
    let bits = opts.precision_bits;
    if bits < 64 || bits > crate::mp::MAX_PRECISION_BITS {
        return Err(Error::config(format!("precision {bits} bits outside [64, 1024]")));
    }
    let id = k.id();
    let mut report = CompressionReport {
        aaa_status: AaaStatus::Converged,
        aaa_rel_error: 0.0,
        aaa_history: vec![],
        support_points: 0,
        cleaned: 0,
        flagged_poles: 0,
        l1: None,
        seconds_sampling: 0.0,
        seconds_aaa: 0.0,
        seconds_pfd: 0.0,
        seconds_l1: 0.0,
    };
    let mut terms = Vec::new();
    let mut high = Vec::new();
    if !k.is_zero() {
        let t0 = Instant::now();
        let z = opts.support.to_big(bits);
        let f = sample_s_laplace(k, &opts.support, bits, opts.quad_factor * opts.rel_tol)?;
        report.seconds_sampling = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let mut aopts = AaaOptions::new(opts.rel_tol);
        aopts.max_terms = opts.max_terms;
        aopts.cleanup = opts.cleanup;
        let fit = aaa(&z, &f, &aopts)?;
        report.seconds_aaa = t1.elapsed().as_secs_f64();
        report.aaa_status = fit.status;
        report.aaa_rel_error = fit.rel_error;
        report.aaa_history = fit.history.clone();
        report.support_points = fit.rational.len();
        report.cleaned = fit.cleaned;
        if fit.status != AaaStatus::Converged {
            log::warn!(
                "{id}: AAA {:?} at relative error {:e} with {} support points",
                fit.status,
                fit.rel_error,
                fit.rational.len()
            );
        }

        let t2 = Instant::now();
        let ps = poles(&fit.rational)?;
        report.flagged_poles = ps.flagged_count();
        let pf = partial_fractions(&fit.rational, &ps.poles, &PfdOptions::for_tolerance(opts.rel_tol))?;
        report.seconds_pfd = t2.elapsed().as_secs_f64();
        terms = pf
            .iter()
            .map(|t| ExpTerm {
                w: t.w.to_f64(),
                lambda: t.lambda.to_f64(),
            })
            .collect();
        let lams: Vec<f64> = terms.iter().map(|t| t.lambda).collect();
        check_spacing(&lams, 0.0)?;
        high = pf;
    }
    let t3 = Instant::now();
    let l1 = l1_error(k, &terms, &opts.l1)?;
    let l1_high = if high.is_empty() {
        l1.value
    } else {
        l1_error_of(k, SumTerms::High(&high), &opts.l1)?.value
    };
    report.seconds_l1 = t3.elapsed().as_secs_f64();
    let ck = CompressedKernel {
        kernel_id: id,
        tolerance: opts.rel_tol,
        precision_bits: bits,
        interval: opts.l1.interval,
        l1_error: l1.value,
        l1_error_unrounded: l1_high,
        terms,
        status: report.aaa_status,
    };
    report.l1 = Some(l1);
    ck.validate()?;
    log::info!(
        "{}: m = {}, L1 = {:e} (unrounded {:e}) (sampling {:.1}s, AAA {:.1}s, PFD {:.1}s, L1 {:.1}s)",
        ck.kernel_id,
        ck.m(),
        ck.l1_error,
        ck.l1_error_unrounded,
        report.seconds_sampling,
        report.seconds_aaa,
        report.seconds_pfd,
        report.seconds_l1
    );
    Ok((ck, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::WeightFunctionSpec;
    use std::sync::Arc;

    fn rl(alpha: f64) -> DOKernel {
        DOKernel::new(Arc::new(WeightFunctionSpec::single_order(alpha).unwrap()), 1).unwrap()
    }

    #[test]
    fn moderate_rl_compression_is_valid_and_accurate() {
        let k = rl(0.5);
        let (c, rep) = compress_with_report(&k, &CompressOptions::new(1e-10)).unwrap();
        c.validate().unwrap();
        assert!(c.m() > 5 && c.m() < 40, "m = {}", c.m());
        assert!(c.l1_error < 1e-3, "{}", c.l1_error);
        assert_eq!(rep.flagged_poles, 0);
        // K̃ ≈ K pointwise at moderate t
        let t: f64 = 0.1;
        let exact = t.powf(-0.5) / std::f64::consts::PI.sqrt();
        assert!((c.eval(t) - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn barycentric_and_residue_forms_agree() {
        let k = rl(0.3);
        let c = compress(&k, &CompressOptions::new(1e-10)).unwrap();
        // L[K̃] ≈ L[K] = s^{α−1} on the sampled range
        for s in [1.0, 37.0, 1e3, 5e5, 1e8] {
            let exact = f64::powf(s, -0.7);
            assert!((c.laplace(s) - exact).abs() < 1e-8 * exact * s.powf(0.7).max(1.0), "s = {s}");
        }
    }

    #[test]
    fn zero_kernel_compresses_to_nothing() {
        let w = Arc::new(WeightFunctionSpec::bump(0.5, 0.4, 2).unwrap());
        let k = DOKernel::new(w, 2).unwrap();
        let c = compress(&k, &CompressOptions::new(1e-6)).unwrap();
        assert_eq!(c.m(), 0);
        assert_eq!(c.l1_error, 0.0);
        assert!(!c.strictly_decreasing(10));
    }

    #[test]
    fn monotonicity_check() {
        let mut c = compress(&rl(0.5), &CompressOptions::new(1e-8)).unwrap();
        assert!(c.strictly_decreasing(200));
        c.terms = vec![ExpTerm { w: 1.0, lambda: 0.0 }];
        assert!(!c.strictly_decreasing(200));
        c.terms = vec![ExpTerm { w: 1.0, lambda: 1.0 }, ExpTerm { w: -0.9, lambda: 2.0 }];
        assert!(!c.strictly_decreasing(200));
    }
}
