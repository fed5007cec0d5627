//! Space-dependent weight functions: a nodal field η taking finitely many
//! values, one set of compressed kernels per value.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::expsum::{compress_cached, CompressOptions, CompressedKernel, ExpTerm, KernelCache};
use crate::kernels::{DOKernel, WeightFunctionSpec};
use crate::timestepping::ModeFamily;

/// Largest number of distinct η values.
pub const MAX_ETA_VALUES: usize = 16;

/// The four center values of the geometric and random-field scenarios.
pub const SCENARIO_ETA_VALUES: [f64; 4] = [0.5, 1.17, 1.83, 2.5];

/// Nodal field with values from a finite set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaField {
    /// Distinct values.
    pub values: Vec<f64>,
    /// Per-node index into `values`.
    pub index: Vec<usize>,
}

impl EtaField {
    pub fn new(values: Vec<f64>, index: Vec<usize>) -> Result<Self> {
        if values.is_empty() || values.len() > MAX_ETA_VALUES {
            return Err(Error::config(format!(
                "η field needs 1 to {MAX_ETA_VALUES} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("η values must be finite"));
        }
        if let Some(&i) = index.iter().find(|&&i| i >= values.len()) {
            return Err(Error::config(format!("η index {i} out of range")));
        }
        Ok(EtaField { values, index })
    }

    pub fn constant(value: f64, ndof: usize) -> Result<Self> {
        Self::new(vec![value], vec![0; ndof])
    }

    /// Quadrants of the unit square, counter-clockwise from the lower left.
    pub fn quadrants(grid: &GridSpec, values: [f64; 4]) -> Result<Self> {
        let index = (0..grid.ndof())
            .map(|d| {
                let [x, y] = grid.coords(d);
                match (x >= 0.5, y >= 0.5) {
                    (false, false) => 0,
                    (true, false) => 1,
                    (true, true) => 2,
                    (false, true) => 3,
                }
            })
            .collect();
        Self::new(values.to_vec(), index)
    }

    /// Smooth random field Σ a_kl cos(kπx + θ) cos(lπy + θ')/(1 + k² + l²)
    /// for k, l < 6, split at its quartiles into `values`.
    pub fn random_smooth(grid: &GridSpec, values: &[f64], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for k in 0..6 {
            for l in 0..6 {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let p: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let q: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                modes.push((k as f64, l as f64, a / (1.0 + (k * k + l * l) as f64), p, q));
            }
        }
        let pi = std::f64::consts::PI;
        let field = grid.sample(|[x, y]| {
            modes
                .iter()
                .map(|&(k, l, a, p, q)| a * (k * pi * x + p).cos() * (l * pi * y + q).cos())
                .sum()
        });
        let mut sorted = field.clone();
        sorted.sort_by(f64::total_cmp);
        let nv = values.len();
        let cuts: Vec<f64> = (1..nv).map(|b| sorted[b * sorted.len() / nv]).collect();
        let index = field.iter().map(|v| cuts.iter().filter(|&&c| *v >= c).count()).collect();
        Self::new(values.to_vec(), index)
    }

    pub fn ndof(&self) -> usize {
        self.index.len()
    }

    /// Nodes per value.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.values.len()];
        for &i in &self.index {
            c[i] += 1;
        }
        c
    }

    pub fn value_at(&self, d: usize) -> f64 {
        self.values[self.index[d]]
    }
}

/// Compressed kernels per η value, padded to a common term count.
#[derive(Clone, Debug)]
pub struct SpatialKernelTable {
    pub values: Vec<f64>,
    /// `kernels[v][i]` approximates K_{i+1} for η = values[v].
    pub kernels: Vec<Vec<CompressedKernel>>,
    pub node_index: Vec<usize>,
    /// Common term count per kernel index.
    pub m: usize,
    pub cache_hits: usize,
}

impl SpatialKernelTable {
    pub fn amax(&self) -> usize {
        self.kernels.first().map_or(0, Vec::len)
    }

    /// One mode family per η value; kernels with fewer than `m` terms are
    /// padded with inert terms w = 0, λ = 0.
    pub fn families(&self) -> Result<Vec<ModeFamily>> {
        self.kernels
            .iter()
            .map(|ks| {
                ModeFamily::new(
                    ks.iter()
                        .map(|k| {
                            let mut t = k.terms.clone();
                            t.resize(self.m, ExpTerm { w: 0.0, lambda: 0.0 });
                            t
                        })
                        .collect(),
                )
            })
            .collect()
    }
}

/// Compress K_1 … K_αmax of `weight(η)` for every η value with at most `m`
/// terms each.
pub fn spatial_kernel_table(
    eta: &EtaField,
    weight: impl Fn(f64) -> Result<WeightFunctionSpec>,
    m: usize,
    opts: &CompressOptions,
    cache: Option<&KernelCache>,
) -> Result<SpatialKernelTable> {
    if m == 0 {
        return Err(Error::config("term count m must be positive"));
    }
    let opts = opts.clone().with_max_terms(m);
    let mut kernels = Vec::with_capacity(eta.values.len());
    let mut amax = None;
    let mut hits = 0;
    for &v in &eta.values {
        let fail = |e: Error| Error::numerical(format!("compression for η = {v} failed: {e}"));
        let spec = Arc::new(weight(v).map_err(fail)?);
        if *amax.get_or_insert(spec.alpha_max) != spec.alpha_max {
            return Err(Error::config("all η values must share αmax"));
        }
        let mut row = Vec::new();
        for k in DOKernel::all(&spec).map_err(fail)? {
            let out = compress_within(&k, &opts, m, cache).map_err(fail)?;
            hits += out.hit as usize;
            row.push(out.kernel);
        }
        kernels.push(row);
    }
    Ok(SpatialKernelTable {
        values: eta.values.clone(),
        kernels,
        node_index: eta.index.clone(),
        m,
        cache_hits: hits,
    })
}

/// Compress with at most `m` terms, loosening the tolerance by factors of
/// 100 while the capped fit fails validation.
pub(crate) fn compress_within(
    k: &DOKernel,
    opts: &CompressOptions,
    m: usize,
    cache: Option<&KernelCache>,
) -> Result<crate::expsum::CacheOutcome> {
    let mut o = opts.clone();
    loop {
        match compress_cached(k, &o, cache) {
            Ok(out) if out.kernel.m() <= m => return Ok(out),
            Ok(out) => {
                if o.rel_tol * 100.0 >= 1e-4 {
                    return Err(Error::numerical(format!("{} terms exceed m = {m}", out.kernel.m())));
                }
            }
            Err(e) if o.rel_tol * 100.0 >= 1e-4 => return Err(e),
            Err(e) => log::warn!("{}: tol {:e} with m ≤ {m} failed ({e}); loosening", k.id(), o.rel_tol),
        }
        o.rel_tol *= 100.0;
        o.l1 = crate::expsum::L1Options::for_tolerance(o.rel_tol);
    }
}
