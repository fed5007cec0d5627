//! Tensor grids on (0,1)^d with homogeneous Dirichlet boundaries, the
//! finite-difference Laplacian and a banded LU factorization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Dimension, 1 or 2.
    pub dim: usize,
    /// Cells per axis.
    pub cells: usize,
}

impl GridSpec {
    pub fn new(dim: usize, cells: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::config(format!("grid dimension {dim} must be 1 or 2")));
        }
        if cells < 2 {
            return Err(Error::config("grid needs at least 2 cells per axis"));
        }
        Ok(GridSpec { dim, cells })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Interior nodes per axis.
    pub fn per_axis(&self) -> usize {
        self.cells - 1
    }

    /// Interior unknown count.
    pub fn ndof(&self) -> usize {
        self.per_axis().pow(self.dim as u32)
    }

    /// Coordinates of interior node `d` (x-fastest ordering).
    pub fn coords(&self, d: usize) -> [f64; 2] {
        let n = self.per_axis();
        let h = self.dx();
        match self.dim {
            1 => [(d + 1) as f64 * h, 0.0],
            _ => [((d % n) + 1) as f64 * h, ((d / n) + 1) as f64 * h],
        }
    }

    /// Sample f at all interior nodes.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.ndof()).map(|d| f(self.coords(d))).collect()
    }

    /// Discrete L²(Ω) norm: Euclidean norm scaled by Δx^{d/2}.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        let s: f64 = v.iter().map(|x| x * x).sum();
        (s * self.dx().powi(self.dim as i32)).sqrt()
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *out = acc;
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |p| (self.indices[p], self.values[p]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                rows[c].push((r, v));
            }
        }
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> CsrMatrix {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    /// Largest |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }
}

/// 3-point (1D) or 5-point (2D) Laplacian on the interior nodes.
pub fn assemble_laplacian(grid: &GridSpec) -> CsrMatrix {
    let n = grid.per_axis();
    let inv = 1.0 / (grid.dx() * grid.dx());
    let ndof = grid.ndof();
    let mut rows = Vec::with_capacity(ndof);
    for d in 0..ndof {
        let mut row = vec![(d, -2.0 * grid.dim as f64 * inv)];
        let (ix, iy) = (d % n, d / n);
        if ix > 0 {
            row.push((d - 1, inv));
        }
        if ix + 1 < n {
            row.push((d + 1, inv));
        }
        if grid.dim == 2 {
            if iy > 0 {
                row.push((d - n, inv));
            }
            if iy + 1 < n {
                row.push((d + n, inv));
            }
        }
        rows.push(row);
    }
    CsrMatrix::from_rows(rows)
}

/// LU factorization with partial pivoting of a band matrix with `kl`
/// sub- and `ku` super-diagonals.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row stride 2kl+ku+1; entry (i, j) at `j * ld + kl + ku + i − j`.
    ab: Vec<f64>,
    ld: usize,
    piv: Vec<usize>,
}

/// Band matrix under assembly.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ld: usize,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            ab: vec![0.0; ld * n],
            ld,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// a_ij += v.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i <= j + self.kl && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        self.ab[j * self.ld + self.kl + self.ku + i - j] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j + self.kl || j > i + self.ku {
            0.0
        } else {
            self.ab[j * self.ld + self.kl + self.ku + i - j]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.get(i, j) * x[j];
            }
        }
        y
    }

    /// |A|·|x|.
    pub fn abs_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += (self.get(i, j) * x[j]).abs();
            }
        }
        y
    }

    /// Factorize in place.
    pub fn factor(self) -> Result<BandedLu> {
        let BandedMatrix { n, kl, ku, mut ab, ld } = self;
        let kv = kl + ku;
        let idx = |i: usize, j: usize| j * ld + kv + i - j;
        let mut piv = vec![0; n];
        // current last column with fill in each row's band
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[idx(j, j)].abs();
            for i in j + 1..=last {
                let v = ab[idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[j] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::numerical(format!("banded LU: zero pivot in column {j}")));
            }
            let col_end = (j + kv).min(n - 1);
            if p != j {
                for c in j..=col_end {
                    ab.swap(idx(j, c), idx(p, c));
                }
            }
            let inv = 1.0 / ab[idx(j, j)];
            for i in j + 1..=last {
                ab[idx(i, j)] *= inv;
            }
            for c in j + 1..=col_end {
                let u = ab[idx(j, c)];
                if u != 0.0 {
                    for i in j + 1..=last {
                        let l = ab[idx(i, j)];
                        ab[idx(i, c)] -= l * u;
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ab,
            ld,
            piv,
        })
    }
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        let idx = |i: usize, j: usize| j * self.ld + kv + i - j;
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..=(j + kl).min(n - 1) {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[idx(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_dimensional_stencil() {
        let g = GridSpec::new(1, 3).unwrap();
        let l = assemble_laplacian(&g);
        assert_eq!(l.n, 2);
        assert!((l.get(0, 0) + 18.0).abs() < 1e-12 && (l.get(0, 1) - 9.0).abs() < 1e-12);
        assert!((l.get(1, 0) - 9.0).abs() < 1e-12 && (l.get(1, 1) + 18.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_is_symmetric() {
        let l = assemble_laplacian(&GridSpec::new(2, 9).unwrap());
        assert_eq!(l.transpose(), l);
    }

    #[test]
    fn product_sines_are_eigenvectors() {
        let g = GridSpec::new(2, 32).unwrap();
        let l = assemble_laplacian(&g);
        let pi4 = 4.0 * std::f64::consts::PI;
        let v = g.sample(|x| (pi4 * x[0]).sin() * (pi4 * x[1]).sin());
        let lv = l.matvec(&v);
        let dx = g.dx();
        let mu = -2.0 * (2.0 - 2.0 * (pi4 * dx).cos()) / (dx * dx);
        let err = lv.iter().zip(&v).map(|(a, b)| (a - mu * b).abs()).fold(0.0, f64::max);
        let scale = lv.iter().map(|a| a.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * scale, "{err:e}");
    }

    #[test]
    fn banded_lu_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, kl, ku) = (40, 3, 5);
        let mut b = BandedMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v: f64 = rng.gen_range(-1.0..1.0) * if i == j { 1e-3 } else { 1.0 };
                b.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let expect = dense.clone().lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        let x = b.factor().unwrap().solve(&rhs);
        for i in 0..n {
            assert!((x[i] - expect[i]).abs() < 1e-9 * expect.amax(), "{i}");
        }
    }

    #[test]
    fn l2_norm_of_constant() {
        let g = GridSpec::new(2, 10).unwrap();
        let v = vec![1.0; g.ndof()];
        assert!((g.l2_norm(&v) - 0.9).abs() < 1e-14);
    }
}
