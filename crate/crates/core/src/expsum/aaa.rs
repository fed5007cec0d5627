//! AAA rational approximation of real data on the positive axis.
//!
//! Support points are chosen greedily at the largest residual and the
//! barycentric weights are the smallest right singular vector of the Loewner
//! matrix. When the working precision is at least twice the digits the
//! tolerance asks for, the Loewner SVD is computed from an incrementally
//! updated Gram matrix: its Cholesky factor has the same singular values and
//! right singular vectors, and the previous iterate's vectors warm-start the
//! Jacobi sweeps.

use serde::{Deserialize, Serialize};

use super::barycentric::BarycentricRational;
use super::poles::{poles, residues};
use crate::error::{Error, Result};
use crate::mp::linalg::{jacobi_rotate, jacobi_svd, DenseMatrix};
use crate::mp::{Real, RealField};

/// How the Loewner SVD is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvdPath {
    /// Gram path when the precision allows it, direct otherwise.
    Auto,
    /// One-sided Jacobi on the full Loewner matrix.
    Direct,
    /// Cholesky factor of the incrementally updated Gram matrix.
    Gram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AaaOptions {
    /// Relative tolerance: max |f − r| ≤ rel_tol · max |f|.
    pub rel_tol: f64,
    /// Cap on the number of support points.
    pub max_terms: Option<usize>,
    /// Iterations without a new best error before giving up.
    pub stagnation_window: usize,
    /// Remove support points next to poles with negligible residues.
    pub cleanup: bool,
    pub svd: SvdPath,
}

impl AaaOptions {
    pub fn new(rel_tol: f64) -> Self {
        AaaOptions {
            rel_tol,
            max_terms: None,
            stagnation_window: 5,
            cleanup: true,
            svd: SvdPath::Auto,
        }
    }
}

/// How the iteration ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AaaStatus {
    Converged,
    /// No improvement within the stagnation window; best iterate returned.
    Unconverged,
    /// Stopped at the support point cap.
    TermCap,
}

#[derive(Clone, Debug)]
pub struct AaaResult<T> {
    pub rational: BarycentricRational<T>,
    pub status: AaaStatus,
    /// Max residual over non-support samples relative to max |f|.
    pub rel_error: f64,
    /// Relative error after each iteration.
    pub history: Vec<f64>,
    /// Support points removed by the cleanup pass.
    pub cleaned: usize,
}

struct Best<T> {
    support: Vec<usize>,
    weights: Vec<T>,
    err: T,
}

/// Run AAA on samples `f` at distinct real points `z`.
pub fn aaa<T: RealField>(z: &[T], f: &[T], opts: &AaaOptions) -> Result<AaaResult<T>> {
    let n = z.len();
    if n != f.len() || n < 2 {
        return Err(Error::config("aaa needs at least two samples with matching values"));
    }
    if !(opts.rel_tol > 1e-50 && opts.rel_tol < 1e-3) {
        return Err(Error::config(format!("AAA tolerance {} outside (1e-50, 1e-3)", opts.rel_tol)));
    }
    if f.iter().any(|v| !v.to_f64().is_finite()) || z.iter().any(|v| !v.to_f64().is_finite()) {
        return Err(Error::numerical("AAA samples must be finite"));
    }
    let zero = Real::zero_like(&f[0]);
    let fmax = f.iter().fold(zero, |m, v| {
        let a = Real::abs(v);
        if a > m {
            a
        } else {
            m
        }
    });
    if Real::is_zero(&fmax) {
        let r = BarycentricRational::new(vec![z[0]], vec![zero], vec![Real::one_like(&zero)]);
        return Ok(AaaResult {
            rational: r,
            status: AaaStatus::Converged,
            rel_error: 0.0,
            history: vec![0.0],
            cleaned: 0,
        });
    }
    let abstol = fmax.from_f64_like(opts.rel_tol) * fmax;
    let gram = use_gram(&fmax, opts);
    let cap = opts.max_terms.unwrap_or(usize::MAX).max(1);

    let mut in_support = vec![false; n];
    let mut support: Vec<usize> = Vec::new();
    let mut cols: Vec<Vec<T>> = Vec::new();
    let mut g: Vec<Vec<T>> = Vec::new();
    let mut vprev: Option<Vec<T>> = None;

    let mut mean = zero;
    for v in f {
        mean = mean + *v;
    }
    mean = mean / fmax.from_f64_like(n as f64);
    let mut next = argmax(f.iter().map(|v| Real::abs(&(*v - mean))), &in_support);
    let mut best: Option<Best<T>> = None;
    let mut since_best = 0usize;
    let mut history = Vec::new();
    let status;
    loop {
        let j = next;
        // drop row j from the Gram matrix
        if gram {
            for a in 0..support.len() {
                for b in 0..support.len() {
                    g[a][b] = g[a][b] - cols[a][j] * cols[b][j];
                }
            }
        }
        in_support[j] = true;
        support.push(j);
        let rows_left = n - support.len();
        if rows_left < support.len() {
            return Err(Error::Accuracy {
                message: format!("AAA exhausted the sample set at {} support points", support.len()),
                achieved: best.as_ref().map_or(f64::INFINITY, |b| (b.err / fmax).to_f64()),
            });
        }
        let col: Vec<T> = (0..n)
            .map(|i| if in_support[i] { zero } else { (f[i] - f[j]) / (z[i] - z[j]) })
            .collect();
        if gram {
            let k = cols.len();
            let mut newrow = Vec::with_capacity(k + 1);
            for c in &cols {
                newrow.push(masked_dot(c, &col, &in_support, zero));
            }
            newrow.push(masked_dot(&col, &col, &in_support, zero));
            for (a, row) in g.iter_mut().enumerate() {
                row.push(newrow[a]);
            }
            g.push(newrow);
        }
        cols.push(col);

        let weights = if gram {
            gram_weights(&g, &mut vprev)?
        } else {
            direct_weights(&cols, &in_support)?
        };
        let (err, resid) = residuals(z, f, &support, &weights, &in_support);
        history.push((err / fmax).to_f64());
        let improved = best.as_ref().map_or(true, |b| err < b.err);
        if improved {
            best = Some(Best {
                support: support.clone(),
                weights: weights.clone(),
                err,
            });
            since_best = 0;
        } else {
            since_best += 1;
        }
        if err <= abstol {
            status = AaaStatus::Converged;
            break;
        }
        if since_best >= opts.stagnation_window {
            status = AaaStatus::Unconverged;
            break;
        }
        if support.len() >= cap {
            status = AaaStatus::TermCap;
            break;
        }
        next = argmax(resid.into_iter(), &in_support);
    }
    let best = best.expect("at least one iterate");
    let mut rational = build(z, f, &best.support, best.weights);
    let mut err = best.err;
    let mut status = if status == AaaStatus::Converged || best.err <= abstol {
        AaaStatus::Converged
    } else {
        status
    };
    let mut cleaned = 0;
    if opts.cleanup && rational.len() > 1 {
        if let Some((r2, e2, removed)) = cleanup(z, f, &best.support, &rational, fmax, opts.rel_tol, gram)? {
            if e2 <= err || e2 <= abstol {
                log::debug!("AAA cleanup removed {removed} support points");
                rational = r2;
                if e2 <= abstol {
                    status = AaaStatus::Converged;
                }
                err = e2;
                cleaned = removed;
            } else {
                log::warn!(
                    "AAA cleanup raised the error from {:e} to {:e}; keeping the original",
                    (err / fmax).to_f64(),
                    (e2 / fmax).to_f64()
                );
            }
        }
    }
    Ok(AaaResult {
        rational,
        status,
        rel_error: (err / fmax).to_f64(),
        history,
        cleaned,
    })
}

fn use_gram<T: RealField>(fmax: &T, opts: &AaaOptions) -> bool {
    match opts.svd {
        SvdPath::Direct => false,
        SvdPath::Gram => true,
        SvdPath::Auto => {
            let eps = Real::eps(fmax).to_f64();
            let need = opts.rel_tol * 1e-6;
            eps > 0.0 && eps < need * need
        }
    }
}

fn argmax<T: RealField>(vals: impl Iterator<Item = T>, skip: &[bool]) -> usize {
    let mut best = 0;
    let mut bv: Option<T> = None;
    for (i, v) in vals.enumerate() {
        if skip[i] {
            continue;
        }
        if bv.map_or(true, |b| v > b) {
            bv = Some(v);
            best = i;
        }
    }
    best
}

fn masked_dot<T: RealField>(a: &[T], b: &[T], skip: &[bool], zero: T) -> T {
    let mut s = zero;
    for i in 0..a.len() {
        if !skip[i] {
            s = s + a[i] * b[i];
        }
    }
    s
}

fn build<T: RealField>(z: &[T], f: &[T], support: &[usize], weights: Vec<T>) -> BarycentricRational<T> {
    BarycentricRational::new(
        support.iter().map(|&j| z[j]).collect(),
        support.iter().map(|&j| f[j]).collect(),
        weights,
    )
}

/// Max residual and per-row residuals over the non-support samples.
fn residuals<T: RealField>(z: &[T], f: &[T], support: &[usize], w: &[T], skip: &[bool]) -> (T, Vec<T>) {
    let zero = Real::zero_like(&f[0]);
    let mut err = zero;
    let mut out = vec![zero; z.len()];
    for i in 0..z.len() {
        if skip[i] {
            continue;
        }
        let mut num = zero;
        let mut den = zero;
        for (k, &j) in support.iter().enumerate() {
            let c = w[k] / (z[i] - z[j]);
            num = num + c * f[j];
            den = den + c;
        }
        let e = Real::abs(&(f[i] - num / den));
        if e > err {
            err = e;
        }
        out[i] = e;
    }
    (err, out)
}

fn direct_weights<T: RealField>(cols: &[Vec<T>], skip: &[bool]) -> Result<Vec<T>> {
    let rows: Vec<usize> = (0..skip.len()).filter(|&i| !skip[i]).collect();
    let a = DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][rows[i]]);
    Ok(jacobi_svd(&a)?.v_min())
}

/// Smallest right singular vector from the Gram matrix G = RᵀR: an exact
/// null vector when R is singular, otherwise inverse iteration warm-started
/// from the previous weights, with a Jacobi SVD of R as fallback.
fn gram_weights<T: RealField>(g: &[Vec<T>], prev: &mut Option<Vec<T>>) -> Result<Vec<T>> {
    let k = g.len();
    let r = cholesky_upper(g);
    let one = Real::one_like(&g[0][0]);
    let zero = Real::zero_like(&one);
    let w = match (0..k).find(|&j| Real::is_zero(&r.get(j, j))) {
        Some(j) => {
            let mut x = vec![zero; k];
            x[j] = one;
            for i in (0..j).rev() {
                let mut acc = zero;
                for l in i + 1..=j {
                    acc = acc + r.get(i, l) * x[l];
                }
                x[i] = -acc / r.get(i, i);
            }
            normalize(x)
        }
        None => {
            let mut start = prev.take().unwrap_or_default();
            start.resize(k, zero);
            start[k - 1] = one;
            match inverse_iteration(&r, start) {
                Some(x) => x,
                None => {
                    let mut v = DenseMatrix::identity(k, one);
                    let mut a = r.clone();
                    jacobi_rotate(&mut a, &mut v)?.v_min()
                }
            }
        }
    };
    *prev = Some(w.clone());
    Ok(w)
}

fn normalize<T: RealField>(mut x: Vec<T>) -> Vec<T> {
    let zero = Real::zero_like(&x[0]);
    let n = Real::sqrt(&x.iter().fold(zero, |a, v| a + *v * *v));
    for v in &mut x {
        *v = *v / n;
    }
    x
}

/// Inverse iteration x ← (RᵀR)⁻¹x until the Rayleigh quotient ‖Rx‖² settles
/// to a relative change below 1e-8.
fn inverse_iteration<T: RealField>(r: &DenseMatrix<T>, start: Vec<T>) -> Option<Vec<T>> {
    let k = r.rows();
    let zero = Real::zero_like(&start[0]);
    let mut x = normalize(start);
    let mut q_prev: Option<f64> = None;
    for _ in 0..60 {
        // Rᵀy = x
        let mut y = vec![zero; k];
        for i in 0..k {
            let mut acc = x[i];
            for l in 0..i {
                acc = acc - r.get(l, i) * y[l];
            }
            y[i] = acc / r.get(i, i);
        }
        // Rz = y
        for i in (0..k).rev() {
            let mut acc = y[i];
            for l in i + 1..k {
                acc = acc - r.get(i, l) * y[l];
            }
            y[i] = acc / r.get(i, i);
        }
        if y.iter().any(|v| v.partial_cmp(v).is_none()) {
            return None;
        }
        x = normalize(y);
        let rx = r.matvec(&x);
        let q = rx.iter().fold(zero, |a, v| a + *v * *v);
        // compare in log space: q can underflow f64
        let lq = log2_approx(&q);
        if let Some(p) = q_prev {
            if (lq - p).abs() <= 1.5e-8 {
                return Some(x);
            }
        }
        q_prev = Some(lq);
    }
    None
}

/// log₂|x| accurate to double precision even outside the f64 range.
fn log2_approx<T: RealField>(x: &T) -> f64 {
    let mut v = Real::abs(x);
    let mut shift = 0.0;
    let big = x.from_f64_like(2f64.powi(500));
    while v.to_f64() > 1e150 {
        v = v / big;
        shift += 500.0;
    }
    while !Real::is_zero(&v) && v.to_f64() < 1e-150 {
        v = v * big;
        shift -= 500.0;
    }
    v.to_f64().log2() + shift
}

/// Upper Cholesky factor of a symmetric positive semidefinite matrix; rows
/// with non-positive pivots are zeroed.
fn cholesky_upper<T: RealField>(g: &[Vec<T>]) -> DenseMatrix<T> {
    let k = g.len();
    let zero = Real::zero_like(&g[0][0]);
    let mut r = DenseMatrix::filled(k, k, zero);
    let mut dmax = zero;
    for (i, row) in g.iter().enumerate() {
        if row[i] > dmax {
            dmax = row[i];
        }
    }
    let floor = Real::eps(&dmax) * dmax * dmax.from_f64_like(k as f64);
    for j in 0..k {
        let mut d = g[j][j];
        for p in 0..j {
            let x = r.get(p, j);
            d = d - x * x;
        }
        if d <= floor {
            continue;
        }
        let rjj = Real::sqrt(&d);
        r.set(j, j, rjj);
        for l in j + 1..k {
            let mut s = g[j][l];
            for p in 0..j {
                s = s - r.get(p, j) * r.get(p, l);
            }
            r.set(j, l, s / rjj);
        }
    }
    r
}

/// Remove support points nearest to poles whose residues are below
/// 1e-2 · tol · max|f| and refit the weights on the remaining support.
fn cleanup<T: RealField>(
    z: &[T],
    f: &[T],
    support: &[usize],
    r: &BarycentricRational<T>,
    fmax: T,
    rel_tol: f64,
    gram: bool,
) -> Result<Option<(BarycentricRational<T>, T, usize)>> {
    let ps = match poles(r) {
        Ok(p) => p,
        Err(e) if e.is_numerical() => return Ok(None),
        Err(e) => return Err(e),
    };
    let res = residues(r, &ps.poles);
    let thresh = (fmax.from_f64_like(1e-2 * rel_tol) * fmax).to_f64();
    let mut drop = vec![false; support.len()];
    for (p, c) in ps.poles.iter().zip(&res) {
        if c.norm().to_f64() >= thresh {
            continue;
        }
        let mut kbest = 0;
        let mut dbest = f64::INFINITY;
        for (k, zk) in r.support.iter().enumerate() {
            let d = (*p - crate::mp::Complex::real(*zk)).norm().to_f64();
            if d < dbest {
                dbest = d;
                kbest = k;
            }
        }
        drop[kbest] = true;
    }
    let removed = drop.iter().filter(|&&d| d).count();
    if removed == 0 {
        return Ok(None);
    }
    let kept: Vec<usize> = support.iter().zip(&drop).filter(|(_, &d)| !d).map(|(&j, _)| j).collect();
    if kept.is_empty() {
        return Ok(None);
    }
    let mut skip = vec![false; z.len()];
    for &j in &kept {
        skip[j] = true;
    }
    let cols: Vec<Vec<T>> = kept
        .iter()
        .map(|&j| {
            (0..z.len())
                .map(|i| if skip[i] { Real::zero_like(&fmax) } else { (f[i] - f[j]) / (z[i] - z[j]) })
                .collect()
        })
        .collect();
    let w = if gram {
        let zero = Real::zero_like(&fmax);
        let g: Vec<Vec<T>> = cols
            .iter()
            .map(|a| cols.iter().map(|b| masked_dot(a, b, &skip, zero)).collect())
            .collect();
        let mut none = None;
        gram_weights(&g, &mut none)?
    } else {
        direct_weights(&cols, &skip)?
    };
    let (err, _) = residuals(z, f, &kept, &w, &skip);
    Ok(Some((build(z, f, &kept, w), err, removed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsum::support::SupportSet;
    use crate::mp::BigReal;

    #[test]
    fn recovers_simple_rational_in_double() {
        let z: Vec<f64> = SupportSet::default().points().to_vec();
        let f: Vec<f64> = z.iter().map(|s| 1.0 / (1.0 + s)).collect();
        let r = aaa(&z, &f, &AaaOptions::new(1e-13)).unwrap();
        assert_eq!(r.status, AaaStatus::Converged);
        assert_eq!(r.rational.len(), 2);
        assert!(r.rel_error < 1e-14);
    }

    #[test]
    fn recovers_simple_rational_in_high_precision() {
        let bits = 256;
        let z = SupportSet::default().to_big(bits);
        let one = BigReal::one(bits);
        let f: Vec<BigReal> = z.iter().map(|s| one / (one + *s)).collect();
        for svd in [SvdPath::Gram, SvdPath::Direct] {
            let mut o = AaaOptions::new(1e-40);
            o.svd = svd;
            let r = aaa(&z, &f, &o).unwrap();
            assert_eq!(r.status, AaaStatus::Converged);
            assert_eq!(r.rational.len(), 2);
            assert!(r.rel_error < 1e-70, "{svd:?} {}", r.rel_error);
        }
    }

    #[test]
    fn interpolates_support_points() {
        let z: Vec<f64> = SupportSet::log_spaced(0.0, 4.0, 200).unwrap().points().to_vec();
        let f: Vec<f64> = z.iter().map(|s| s.sqrt()).collect();
        let r = aaa(&z, &f, &AaaOptions::new(1e-10)).unwrap();
        for (zk, fk) in r.rational.support.iter().zip(&r.rational.values) {
            assert_eq!(r.rational.eval(*zk), *fk);
            assert!((r.rational.eval(*zk * (1.0 + 1e-15)) - fk).abs() < 1e-9 * fk.abs());
        }
        assert!(r.rel_error <= 1e-10);
    }

    #[test]
    fn term_cap_is_respected() {
        let z: Vec<f64> = SupportSet::default().points().to_vec();
        let f: Vec<f64> = z.iter().map(|s| s.powf(0.5)).collect();
        let mut o = AaaOptions::new(1e-13);
        o.max_terms = Some(6);
        let r = aaa(&z, &f, &o).unwrap();
        assert_eq!(r.status, AaaStatus::TermCap);
        assert!(r.rational.len() <= 6);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let z = [1.0, 2.0, 3.0];
        let f = [1.0, 2.0, 3.0];
        assert!(aaa(&z, &f, &AaaOptions::new(1e-2)).is_err());
        assert!(aaa(&z, &f, &AaaOptions::new(1e-60)).is_err());
    }
}
