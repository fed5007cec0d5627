//! Poles and residues of barycentric rational functions.
//!
//! The roots of the denominator Σ ω_k/(s − z_k) are computed in the shifted
//! variable u = 1/(s − σ), where they are eigenvalues of a diagonal plus
//! rank-one matrix and a root at s = ∞ (Σω = 0) stays finite. Seeds come from
//! a double-precision eigensolve and are refined simultaneously with
//! Aberth–Ehrlich steps at the working precision.

use nalgebra::DMatrix;

use super::barycentric::BarycentricRational;
use crate::error::{Error, Result};
use crate::mp::{Complex, Real, RealField};

/// Maximum Aberth sweeps.
pub const ABERTH_SWEEP_CAP: usize = 200;

/// Required residual reduction relative to the double-precision seed.
pub const REFINEMENT_FACTOR: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct PoleSet<T> {
    pub poles: Vec<Complex<T>>,
    /// Poles whose refinement failed; they keep their seed value.
    pub flagged: Vec<bool>,
    /// Relative denominator residual at the seeds.
    pub seed_residual: Vec<f64>,
    /// Relative denominator residual at the returned poles.
    pub residual: Vec<f64>,
    pub sweeps: usize,
}

impl<T> PoleSet<T> {
    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

/// The denominator in the shifted variable u = 1/(s − σ):
/// d(σ + 1/u) = C + Σ_k ω'_k/(u − ζ_k), with ζ_k = 1/(z_k − σ),
/// ω'_k = −ω_k ζ_k² and C = d(σ). Its roots are u = 0 (the point s = ∞)
/// and u_p = 1/(p − σ) for every finite root p of d.
struct Shifted<T> {
    sigma: T,
    zeta: Vec<T>,
    omega: Vec<T>,
    c: T,
}

impl<T: RealField> Shifted<T> {
    fn new(r: &BarycentricRational<T>) -> Result<Self> {
        let mut order: Vec<usize> = (0..r.len()).collect();
        order.sort_by(|&a, &b| r.support[a].partial_cmp(&r.support[b]).unwrap_or(std::cmp::Ordering::Equal));
        let m = order.len();
        // geometric midpoints of adjacent support points, from the middle outwards
        let mut gaps: Vec<usize> = (0..m - 1).collect();
        gaps.sort_by_key(|&g| (2 * g + 1).abs_diff(m - 1));
        for g in gaps {
            let (a, b) = (r.support[order[g]], r.support[order[g + 1]]);
            let sigma = if a.to_f64() > 0.0 { (a * b).sqrt() } else { (a + b) * Real::from_f64_like(&a, 0.5) };
            let mut c = Real::zero_like(&a);
            let mut scale = 0.0;
            let mut zeta = Vec::with_capacity(m);
            let mut omega = Vec::with_capacity(m);
            for (z, w) in r.support.iter().zip(&r.weights) {
                let q = Real::one_like(&a) / (*z - sigma);
                c = c - *w * q;
                scale += (*w * q).to_f64().abs();
                omega.push(-(*w) * q * q);
                zeta.push(q);
            }
            if c.to_f64().abs() > 1e-8 * scale {
                return Ok(Shifted { sigma, zeta, omega, c });
            }
        }
        Err(Error::Conditioning("no admissible shift for the pole computation".into()))
    }

    /// (D(u), D'(u), Σ 1/(u − ζ_k), Σ |ω'_k/(u − ζ_k)|).
    fn parts(&self, u: Complex<T>) -> (Complex<T>, Complex<T>, Complex<T>, f64) {
        let mut d = Complex::real(self.c);
        let zero = Complex::real(Real::zero_like(&self.c));
        let (mut dd, mut g) = (zero, zero);
        let mut scale = self.c.to_f64().abs();
        for (z, w) in self.zeta.iter().zip(&self.omega) {
            let q = (u - Complex::real(*z)).recip();
            let t = q.scale(*w);
            scale += t.norm().to_f64();
            d += t;
            dd -= t * q;
            g += q;
        }
        (d, dd, g, scale)
    }

    fn relative_residual(&self, u: Complex<T>) -> f64 {
        let (d, _, _, scale) = self.parts(u);
        if scale == 0.0 {
            return f64::INFINITY;
        }
        d.norm().to_f64() / scale
    }

    /// Double-precision seeds: eigenvalues of diag(ζ) − (ω'/C) 1ᵀ without the
    /// root at u = 0.
    fn seeds(&self) -> Vec<Complex<f64>> {
        let m = self.zeta.len();
        let c = self.c.to_f64();
        let z: Vec<f64> = self.zeta.iter().map(|v| v.to_f64()).collect();
        let w: Vec<f64> = self.omega.iter().map(|v| v.to_f64() / c).collect();
        let mut a = DMatrix::from_fn(m, m, |i, j| if i == j { z[i] } else { 0.0 } - w[i]);
        nalgebra::linalg::balancing::balance_parlett_reinsch(&mut a);
        let mut ev: Vec<Complex<f64>> = a.complex_eigenvalues().iter().map(|c| Complex::new(c.re, c.im)).collect();
        let k = (0..m)
            .min_by(|&a, &b| ev[a].norm().partial_cmp(&ev[b].norm()).unwrap())
            .unwrap_or(0);
        ev.remove(k);
        ev
    }
}

/// Refined poles of `r`.
pub fn poles<T: RealField>(r: &BarycentricRational<T>) -> Result<PoleSet<T>> {
    let m = r.len();
    if m == 0 {
        return Err(Error::config("rational function has no support points"));
    }
    let proto = r.support[0];
    let empty = PoleSet {
        poles: vec![],
        flagged: vec![],
        seed_residual: vec![],
        residual: vec![],
        sweeps: 0,
    };
    if m == 1 {
        return Ok(empty);
    }
    let sh = Shifted::new(r)?;
    let seed64 = sh.seeds();
    if seed64.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::numerical("pole seeds are not finite"));
    }
    let seed: Vec<Complex<T>> = seed64
        .iter()
        .map(|c| Complex::new(proto.from_f64_like(c.re), proto.from_f64_like(c.im)))
        .collect();
    let seed_residual: Vec<f64> = seed.iter().map(|u| sh.relative_residual(*u)).collect();
    let (mut u, sweeps) = aberth(&sh, seed.clone());
    let eps = Real::eps(&proto).to_f64();
    let mut out = empty;
    out.sweeps = sweeps;
    for i in 0..u.len() {
        let mut res = sh.relative_residual(u[i]);
        let ok = res.is_finite()
            && (res <= seed_residual[i] / REFINEMENT_FACTOR || res <= 1e3 * eps || seed_residual[i] == 0.0);
        let mut flagged = false;
        if !ok {
            log::warn!(
                "pole refinement failed near u = {:?}: residual {res:e} from seed residual {:e}",
                seed64[i],
                seed_residual[i]
            );
            flagged = true;
            u[i] = seed[i];
            res = seed_residual[i];
        }
        if u[i].norm().is_zero() {
            // exact degree drop: the root sits at s = ∞
            continue;
        }
        out.poles.push(Complex::real(sh.sigma) + u[i].recip());
        out.flagged.push(flagged);
        out.seed_residual.push(seed_residual[i]);
        out.residual.push(res);
    }
    Ok(out)
}

/// Simultaneous Aberth–Ehrlich iteration on N(u) = D(u)·Π(u − ζ_k), with the
/// known root u = 0 held fixed.
fn aberth<T: RealField>(sh: &Shifted<T>, mut p: Vec<Complex<T>>) -> (Vec<Complex<T>>, usize) {
    let n = p.len();
    let one = Complex::real(Real::one_like(&sh.c));
    let target = Real::eps(&sh.c).to_f64() * 64.0;
    let mut done = vec![false; n];
    let mut sweeps = 0;
    while sweeps < ABERTH_SWEEP_CAP && done.iter().any(|d| !d) {
        sweeps += 1;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let pi = p[i];
            if pi.norm().is_zero() {
                done[i] = true;
                continue;
            }
            let (d, dd, g, _) = sh.parts(pi);
            let denom = dd + d * g;
            if denom.norm().is_zero() {
                done[i] = true;
                continue;
            }
            let ratio = d / denom;
            let mut a = pi.recip();
            for (j, pj) in p.iter().enumerate() {
                if j != i {
                    let diff = pi - *pj;
                    if !diff.norm().is_zero() {
                        a += diff.recip();
                    }
                }
            }
            let step = ratio / (one - ratio * a);
            let next = pi - step;
            let scale = next.norm().to_f64().max(f64::MIN_POSITIVE);
            let rel = step.norm().to_f64() / scale;
            if !rel.is_finite() {
                done[i] = true;
                continue;
            }
            p[i] = next;
            if rel <= target {
                done[i] = true;
            }
        }
    }
    (p, sweeps)
}

/// Residues n(p)/d'(p) of `r` at simple poles.
pub fn residues<T: RealField>(r: &BarycentricRational<T>, poles: &[Complex<T>]) -> Vec<Complex<T>> {
    poles
        .iter()
        .map(|p| {
            let (n, _, dd) = r.parts_complex(*p);
            n / dd
        })
        .collect()
}
