//! Gauss rules in double precision and adaptive Gauss–Kronrod integration
//! at arbitrary precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::linalg::{solve_dense, DenseMatrix};
use crate::mp::BigReal;

/// Quadrature family selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum QuadratureFamily {
    GaussLegendre,
    /// Gauss–Jacobi for the weight (b−x)^alpha (x−a)^beta on [a, b].
    GaussJacobi { alpha: f64, beta: f64 },
    /// Adaptive Gauss–Kronrod; has no fixed node set.
    AdaptiveGaussKronrod { abs_tol: f64, max_depth: usize },
}

/// A fixed quadrature rule on an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
    pub family: QuadratureFamily,
}

impl QuadratureRule {
    /// Apply the rule to `f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Build an `n`-point rule of the given family on `interval`.
pub fn gauss_nodes(family: &QuadratureFamily, n: usize, interval: (f64, f64)) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::config("quadrature needs at least one node"));
    }
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::config(format!("invalid interval ({a}, {b})")));
    }
    let (x, w) = match family {
        QuadratureFamily::GaussLegendre => legendre_f64(n),
        QuadratureFamily::GaussJacobi { alpha, beta } => {
            if *alpha <= -1.0 || *beta <= -1.0 {
                return Err(Error::config("Gauss–Jacobi exponents must exceed -1"));
            }
            jacobi_f64(n, *alpha, *beta)?
        }
        QuadratureFamily::AdaptiveGaussKronrod { .. } => {
            return Err(Error::config("adaptive Gauss–Kronrod has no fixed node set"));
        }
    };
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let scale = match family {
        QuadratureFamily::GaussJacobi { alpha, beta } => half.powf(1.0 + alpha + beta),
        _ => half,
    };
    Ok(QuadratureRule {
        nodes: x.iter().map(|&t| mid + half * t).collect(),
        weights: w.iter().map(|&v| v * scale).collect(),
        interval,
        family: family.clone(),
    })
}

/// Legendre P_n and its derivative at x.
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn legendre_f64(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_pd(n, z);
        let wt = 2.0 / ((1.0 - z * z) * d * d);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Jacobi rule for (1−x)^a (1+x)^b by the Golub–Welsch eigenproblem.
fn jacobi_f64(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for (k, d) in diag.iter_mut().enumerate() {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        *d = if k == 0.0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
    }
    for (k, o) in off.iter_mut().enumerate() {
        let k = k as f64 + 1.0;
        let s = 2.0 * k + a + b;
        *o = (4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
    }
    let t = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let eig = nalgebra::SymmetricEigen::new(t);
    let mu0 = {
        let bits = 128;
        let g = |v: f64| crate::mp::gamma(&BigReal::from_f64(v, bits)).map(|g| g.to_f64());
        2f64.powf(a + b + 1.0) * g(a + 1.0)? * g(b + 1.0)? / g(a + b + 2.0)?
    };
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    Ok(pairs.into_iter().unzip())
}

/// Legendre P_0..=P_n at x (multiprecision).
fn legendre_all(n: usize, x: &BigReal) -> Vec<BigReal> {
    let one = x.one_like();
    let mut p = Vec::with_capacity(n + 1);
    p.push(one);
    if n >= 1 {
        p.push(*x);
    }
    for k in 2..=n {
        let v = (BigReal::from_u64_limbs((2 * k - 1) as u64, x.limbs()) * *x * p[k - 1]
            - BigReal::from_u64_limbs((k - 1) as u64, x.limbs()) * p[k - 2])
            .div_u64(k as u64);
        p.push(v);
    }
    p
}

/// High-precision Gauss–Legendre rule on [-1, 1].
pub fn legendre_big(n: usize, bits: u32) -> Arc<(Vec<BigReal>, Vec<BigReal>)> {
    type Cache = Mutex<HashMap<(usize, u32), Arc<(Vec<BigReal>, Vec<BigReal>)>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = map.lock().unwrap().get(&(n, bits)) {
        return r.clone();
    }
    let (x0, _) = legendre_f64(n);
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for &seed in &x0 {
        let mut z = BigReal::from_f64(seed, bits);
        let one = z.one_like();
        for _ in 0..40 {
            let p = legendre_all(n, &z);
            // P_n' = n (x P_n − P_{n−1}) / (x² − 1)
            let d = BigReal::from_u64_limbs(n as u64, z.limbs()) * (z * p[n] - p[n - 1]) / (z * z - one);
            let dz = p[n] / d;
            z -= dz;
            if dz.is_zero() || dz.abs() < z.epsilon() * (z.abs() + one.mul_pow2(-60)) {
                break;
            }
        }
        let p = legendre_all(n, &z);
        let d = BigReal::from_u64_limbs(n as u64, z.limbs()) * (z * p[n] - p[n - 1]) / (z * z - one);
        xs.push(z);
        ws.push(BigReal::from_u64_limbs(2, z.limbs()) / ((one - z * z) * d * d));
    }
    let r = Arc::new((xs, ws));
    map.lock().unwrap().insert((n, bits), r.clone());
    r
}

/// Gauss–Kronrod pair on [-1, 1]: 2n+1 Kronrod nodes containing the n
/// Gauss nodes.
#[derive(Debug)]
pub struct KronrodRule {
    pub n: usize,
    /// Ascending Kronrod nodes.
    pub nodes: Vec<BigReal>,
    pub kronrod_weights: Vec<BigReal>,
    /// Gauss weight per Kronrod node (zero at the Stieltjes nodes).
    pub gauss_weights: Vec<BigReal>,
}

/// Evaluate the Stieltjes polynomial Σ a_k P_k and its derivative.
fn stieltjes_eval(coef: &[(usize, BigReal)], top: usize, x: &BigReal) -> (BigReal, BigReal) {
    let p = legendre_all(top, x);
    let one = x.one_like();
    let mut v = x.zero_like();
    let mut d = x.zero_like();
    for (k, a) in coef {
        v += *a * p[*k];
        if *k > 0 {
            let dk = BigReal::from_u64_limbs(*k as u64, x.limbs()) * (*x * p[*k] - p[*k - 1]) / (*x * *x - one);
            d += *a * dk;
        }
    }
    (v, d)
}

fn build_kronrod(n: usize, bits: u32) -> Result<KronrodRule> {
    let gl = legendre_big(n, bits);
    let (gx, gw) = (&gl.0, &gl.1);
    let top = n + 1;
    // exact quadrature for degree ≤ 3n+1
    let aux = legendre_big(2 * n + 2, bits);
    let aux_p: Vec<Vec<BigReal>> = aux.0.iter().map(|x| legendre_all(top, x)).collect();
    let triple = |a: usize, b: usize, c: usize| {
        let mut s = BigReal::zero(bits);
        for (q, w) in aux_p.iter().zip(&aux.1) {
            s += *w * q[a] * q[b] * q[c];
        }
        s
    };
    let ks: Vec<usize> = (0..top).filter(|k| (k + top) % 2 == 0).collect();
    let js: Vec<usize> = (0..=n).filter(|j| j % 2 == 1).collect();
    if ks.len() != js.len() {
        return Err(Error::numerical("Kronrod system shape mismatch"));
    }
    let mut coef = vec![(top, BigReal::one(bits))];
    if !ks.is_empty() {
        let m = DenseMatrix::from_fn(js.len(), ks.len(), |r, c| triple(n, ks[c], js[r]));
        let rhs: Vec<BigReal> = js.iter().map(|&j| -triple(n, top, j)).collect();
        let a = solve_dense(&m, &rhs)?;
        coef.extend(ks.iter().copied().zip(a));
    }
    // one Stieltjes root between consecutive Gauss nodes (and the ends)
    let mut bounds = vec![-1.0];
    bounds.extend(gx.iter().map(|x| x.to_f64()));
    bounds.push(1.0);
    let f64_eval = |x: f64| stieltjes_eval(&coef, top, &BigReal::from_f64(x, bits)).0.to_f64();
    let mut roots = Vec::with_capacity(top);
    for win in bounds.windows(2) {
        let (mut lo, mut hi) = (win[0], win[1]);
        let mut flo = f64_eval(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = f64_eval(mid);
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let mut z = BigReal::from_f64(0.5 * (lo + hi), bits);
        for _ in 0..40 {
            let (v, d) = stieltjes_eval(&coef, top, &z);
            let dz = v / d;
            z -= dz;
            if dz.is_zero() || dz.abs() < z.epsilon() {
                break;
            }
        }
        roots.push(z);
    }
    let mut nodes: Vec<(BigReal, Option<usize>)> = roots.into_iter().map(|r| (r, None)).collect();
    nodes.extend(gx.iter().enumerate().map(|(i, x)| (*x, Some(i))));
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let np = nodes.len();
    // moments: Σ w_i P_k(x_i) = ∫ P_k = 2 δ_k0
    let pk: Vec<Vec<BigReal>> = nodes.iter().map(|(x, _)| legendre_all(np - 1, x)).collect();
    let m = DenseMatrix::from_fn(np, np, |k, i| pk[i][k]);
    let mut rhs = vec![BigReal::zero(bits); np];
    rhs[0] = BigReal::from_f64(2.0, bits);
    let kw = solve_dense(&m, &rhs)?;
    let gwv = nodes
        .iter()
        .map(|(_, g)| g.map_or(BigReal::zero(bits), |i| gw[i]))
        .collect();
    Ok(KronrodRule {
        n,
        nodes: nodes.into_iter().map(|(x, _)| x).collect(),
        kronrod_weights: kw,
        gauss_weights: gwv,
    })
}

/// Cached Gauss–Kronrod rule with `n` Gauss points at `bits` precision.
pub fn kronrod(n: usize, bits: u32) -> Result<Arc<KronrodRule>> {
    type Cache = Mutex<HashMap<(usize, u32), Arc<KronrodRule>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = map.lock().unwrap().get(&(n, bits)) {
        return Ok(r.clone());
    }
    let r = Arc::new(build_kronrod(n, bits)?);
    map.lock().unwrap().insert((n, bits), r.clone());
    Ok(r)
}

/// Controls for [`integrate_adaptive`].
#[derive(Clone, Debug)]
pub struct AdaptiveOptions {
    /// Gauss points of the Gauss–Kronrod pair.
    pub order: usize,
    /// Maximum bisection depth of any segment.
    pub max_depth: usize,
    /// Maximum number of segments.
    pub max_segments: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            order: 15,
            max_depth: 200,
            max_segments: 4000,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Debug)]
pub struct Integral {
    pub value: BigReal,
    /// Sum of the per-segment |Kronrod − Gauss| estimates.
    pub error: f64,
    pub evaluations: usize,
    pub segments: usize,
}

struct Segment {
    a: BigReal,
    b: BigReal,
    value: BigReal,
    error: f64,
    depth: usize,
}

fn gk_segment(
    f: &mut impl FnMut(&BigReal) -> BigReal,
    rule: &KronrodRule,
    a: &BigReal,
    b: &BigReal,
) -> (BigReal, f64) {
    let half = (*b - *a).mul_pow2(-1);
    let mid = (*a + *b).mul_pow2(-1);
    let mut k = a.zero_like();
    let mut g = a.zero_like();
    for ((x, wk), wg) in rule.nodes.iter().zip(&rule.kronrod_weights).zip(&rule.gauss_weights) {
        let fx = f(&(mid + half * *x));
        k += *wk * fx;
        if !wg.is_zero() {
            g += *wg * fx;
        }
    }
    let kv = k * half;
    let gv = g * half;
    let mut err = (kv - gv).abs().to_f64();
    // roundoff floor
    let floor = 50.0 * kv.epsilon().to_f64() * kv.abs().to_f64();
    if err < floor {
        err = floor;
    }
    (kv, err)
}

/// Integrate `f` over [a, b] to absolute tolerance `abs_tol` by globally
/// adaptive bisection of Gauss–Kronrod panels.
///
/// Segments are refined in order of decreasing error estimate, so endpoint
/// singularities are bisected toward the singular end. The returned value is
/// summed in left-to-right segment order, making the result bit-identical for
/// identical inputs.
pub fn integrate_adaptive(
    f: impl FnMut(&BigReal) -> BigReal,
    a: &BigReal,
    b: &BigReal,
    abs_tol: f64,
    opts: &AdaptiveOptions,
) -> Result<Integral> {
    let (r, failure) = integrate_adaptive_lenient(f, a, b, abs_tol, opts)?;
    if let Some(msg) = failure {
        return Err(Error::Accuracy {
            message: format!("integrate_adaptive: {msg}; value {}", r.value.to_sci_string(20)),
            achieved: r.error,
        });
    }
    Ok(r)
}

/// Like [`integrate_adaptive`] but returns the best estimate together with
/// the reason the tolerance was not met, if any.
pub fn integrate_adaptive_lenient(
    mut f: impl FnMut(&BigReal) -> BigReal,
    a: &BigReal,
    b: &BigReal,
    abs_tol: f64,
    opts: &AdaptiveOptions,
) -> Result<(Integral, Option<String>)> {
    if !(abs_tol > 0.0) {
        return Err(Error::config("abs_tol must be positive"));
    }
    let bits = a.precision().max(b.precision());
    let a = a.with_precision(bits);
    let b = b.with_precision(bits);
    let rule = kronrod(opts.order, bits)?;
    let npts = rule.nodes.len();
    let (v, e) = gk_segment(&mut f, &rule, &a, &b);
    let mut segs = vec![Segment {
        a,
        b,
        value: v,
        error: e,
        depth: 0,
    }];
    let mut evals = npts;
    let mut total: f64 = e;
    let mut failure: Option<String> = None;
    while total > abs_tol {
        let (idx, _) = segs
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let s = segs.swap_remove(idx);
        if s.depth >= opts.max_depth {
            failure = Some(format!("depth cap {} reached", opts.max_depth));
            segs.push(s);
            break;
        }
        if segs.len() + 2 > opts.max_segments {
            failure = Some(format!("segment cap {} reached", opts.max_segments));
            segs.push(s);
            break;
        }
        let m = (s.a + s.b).mul_pow2(-1);
        let (v1, e1) = gk_segment(&mut f, &rule, &s.a, &m);
        let (v2, e2) = gk_segment(&mut f, &rule, &m, &s.b);
        evals += 2 * npts;
        segs.push(Segment {
            a: s.a,
            b: m,
            value: v1,
            error: e1,
            depth: s.depth + 1,
        });
        segs.push(Segment {
            a: m,
            b: s.b,
            value: v2,
            error: e2,
            depth: s.depth + 1,
        });
        total = segs.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            failure = Some("non-finite integrand".into());
            break;
        }
    }
    segs.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap_or(std::cmp::Ordering::Equal));
    let mut value = BigReal::zero(bits);
    for s in &segs {
        value += s.value;
    }
    Ok((
        Integral {
            value,
            error: total,
            evaluations: evals,
            segments: segs.len(),
        },
        failure,
    ))
}
