//! Dense linear algebra over any [`Scalar`]: LU solve, Householder QR and
//! one-sided Jacobi SVD.

use super::scalar::{Real, Scalar};
use crate::error::{Error, Result};

/// Column-major dense matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    /// Matrix filled with `fill`.
    pub fn filled(rows: usize, cols: usize, fill: T) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![fill; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Build from row-major nested data.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn identity(n: usize, one: T) -> Self {
        let zero = one.zero_like();
        Self::from_fn(n, n, |i, j| if i == j { one } else { zero })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        let zero = self.data[0].zero_like();
        let mut y = vec![zero; self.rows];
        for j in 0..self.cols {
            let xj = x[j];
            for (yi, &a) in y.iter_mut().zip(self.col(j)) {
                *yi = *yi + a * xj;
            }
        }
        y
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::filled(self.rows, other.cols, self.data[0].zero_like());
        for j in 0..other.cols {
            let y = self.matvec(other.col(j));
            out.col_mut(j).copy_from_slice(&y);
        }
        out
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> T::Real {
        let mut s = self.data[0].abs2().zero_like();
        for v in &self.data {
            s = s + v.abs2();
        }
        s.sqrt()
    }

    /// Drop row `i`.
    pub fn remove_row(&mut self, i: usize) {
        let mut data = Vec::with_capacity((self.rows - 1) * self.cols);
        for j in 0..self.cols {
            for (r, v) in self.col(j).iter().enumerate() {
                if r != i {
                    data.push(*v);
                }
            }
        }
        self.rows -= 1;
        self.data = data;
    }

    /// Append a column.
    pub fn push_col(&mut self, c: &[T]) {
        assert_eq!(c.len(), self.rows);
        self.data.extend_from_slice(c);
        self.cols += 1;
    }
}

/// Euclidean norm of a vector.
pub fn vec_norm<T: Scalar>(x: &[T]) -> T::Real {
    let mut s = x[0].abs2().zero_like();
    for v in x {
        s = s + v.abs2();
    }
    s.sqrt()
}

/// Hermitian inner product xᴴy.
pub fn dot_conj<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut s = x[0].zero_like();
    for (a, b) in x.iter().zip(y) {
        s = s + a.conj() * *b;
    }
    s
}

/// Solve M x = rhs by LU factorization with partial pivoting.
///
/// The residual satisfies ‖Mx − rhs‖ ≲ ‖M‖·‖x‖·n·u for unit roundoff u.
pub fn solve_dense<T: Scalar>(m: &DenseMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = m.rows();
    if m.cols() != n || rhs.len() != n {
        return Err(Error::config(format!(
            "solve_dense: shape {}x{} with rhs {}",
            m.rows(),
            m.cols(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // row-major working copy
    let mut a: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    let mut b = rhs.to_vec();
    for k in 0..n {
        let mut p = k;
        let mut best = a[k][k].abs2();
        for (i, row) in a.iter().enumerate().skip(k + 1) {
            let v = row[k].abs2();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best.is_zero() {
            return Err(Error::numerical(format!("solve_dense: singular matrix at column {k}")));
        }
        a.swap(k, p);
        b.swap(k, p);
        let piv = a[k][k];
        let (top, bottom) = a.split_at_mut(k + 1);
        let pivot_row = &top[k];
        for (off, row) in bottom.iter_mut().enumerate() {
            let f = row[k] / piv;
            if f.abs2().is_zero() {
                continue;
            }
            row[k] = f;
            for j in k + 1..n {
                row[j] = row[j] - f * pivot_row[j];
            }
            b[k + 1 + off] = b[k + 1 + off] - f * b[k];
        }
    }
    let mut x = b;
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s = s - a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Ok(x)
}

/// Dense inverse via repeated [`solve_dense`].
pub fn invert<T: Scalar>(m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = m.rows();
    let one = m.get(0, 0).one_like();
    let id = DenseMatrix::identity(n, one);
    let mut out = DenseMatrix::filled(n, n, one.zero_like());
    for j in 0..n {
        let x = solve_dense(m, id.col(j))?;
        out.col_mut(j).copy_from_slice(&x);
    }
    Ok(out)
}

/// Upper-triangular factor R of a Householder QR of a tall matrix.
pub fn householder_r<T: Scalar>(m: &DenseMatrix<T>) -> DenseMatrix<T> {
    let rows = m.rows();
    let cols = m.cols();
    let mut a = m.clone();
    let zero = m.get(0, 0).zero_like();
    for k in 0..cols.min(rows) {
        let x = &a.col(k)[k..];
        let norm = vec_norm(x);
        if norm.is_zero() {
            continue;
        }
        let x0 = x[0];
        let ax0 = x0.abs();
        // alpha = -e^{i arg x0} ‖x‖
        let phase = if ax0.is_zero() {
            x0.one_like()
        } else {
            x0.scale(ax0.one_like() / ax0)
        };
        let alpha = -phase.scale(norm);
        let mut v: Vec<T> = x.to_vec();
        v[0] = v[0] - alpha;
        let vn2 = {
            let mut s = norm.zero_like();
            for e in &v {
                s = s + e.abs2();
            }
            s
        };
        if vn2.is_zero() {
            continue;
        }
        let two_over = norm.from_f64_like(2.0) / vn2;
        for j in k..cols {
            let col = &mut a.col_mut(j)[k..];
            let d = dot_conj(&v, col).scale(two_over);
            for (c, vi) in col.iter_mut().zip(&v) {
                *c = *c - *vi * d;
            }
        }
        for i in k + 1..rows {
            a.set(i, k, zero);
        }
    }
    let n = cols.min(rows);
    DenseMatrix::from_fn(n, cols, |i, j| if i <= j { a.get(i, j) } else { zero })
}

/// Singular values and right singular vectors.
#[derive(Clone, Debug)]
pub struct Svd<T: Scalar> {
    /// Descending singular values.
    pub sigma: Vec<T::Real>,
    /// Right singular vectors as columns, in the order of `sigma`.
    pub v: DenseMatrix<T>,
    /// Jacobi sweeps used.
    pub sweeps: usize,
}

impl<T: Scalar> Svd<T> {
    /// Right singular vector of the smallest singular value.
    pub fn v_min(&self) -> Vec<T> {
        self.v.col(self.v.cols() - 1).to_vec()
    }
}

/// Maximum number of Jacobi sweeps before reporting non-convergence.
pub const JACOBI_SWEEP_CAP: usize = 60;

/// One-sided (Hestenes) Jacobi SVD of a matrix with rows ≥ cols.
///
/// Tall matrices are first reduced to their triangular QR factor, which has
/// the same singular values and right singular vectors. Columns are rotated
/// pairwise until all pairs are orthogonal to the working precision.
pub fn jacobi_svd<T: Scalar>(m: &DenseMatrix<T>) -> Result<Svd<T>> {
    let rows = m.rows();
    let cols = m.cols();
    if rows < cols || cols == 0 {
        return Err(Error::config(format!(
            "jacobi_svd needs rows >= cols > 0, got {rows}x{cols}"
        )));
    }
    let one = m.get(0, 0).one_like();
    let mut a = if rows > cols + cols / 2 {
        householder_r(m)
    } else {
        m.clone()
    };
    let mut v = DenseMatrix::identity(cols, one);
    jacobi_rotate(&mut a, &mut v)
}

/// Jacobi SVD of `a · v0ᴴ`-style warm starts: `a` is rotated in place and
/// `v` accumulates the rotations (pass the identity for a cold start).
pub fn jacobi_rotate<T: Scalar>(a: &mut DenseMatrix<T>, v: &mut DenseMatrix<T>) -> Result<Svd<T>> {
    let cols = a.cols();
    let r0 = a.get(0, 0).re();
    let eps = r0.eps();
    let tol = eps * r0.from_f64_like(cols as f64).sqrt();
    let mut norms: Vec<T::Real> = (0..cols)
        .map(|j| {
            let mut s = r0.zero_like();
            for x in a.col(j) {
                s = s + x.abs2();
            }
            s
        })
        .collect();
    let mut sweeps = 0;
    loop {
        if sweeps >= JACOBI_SWEEP_CAP {
            let off = max_off_diagonal(a, &norms);
            return Err(Error::numerical(format!(
                "jacobi_svd: not converged after {JACOBI_SWEEP_CAP} sweeps (max relative off-diagonal {off:e})"
            )));
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha.is_zero() || beta.is_zero() {
                    continue;
                }
                let g = dot_conj(a.col(p), a.col(q));
                let ag = g.abs();
                if ag <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let one = ag.one_like();
                let two = ag.from_f64_like(2.0);
                let zeta = (beta - alpha) / (two * ag);
                let t = {
                    let d = zeta.abs() + (one + zeta * zeta).sqrt();
                    if zeta >= zeta.zero_like() {
                        one / d
                    } else {
                        -(one / d)
                    }
                };
                let c = one / (one + t * t).sqrt();
                let s = c * t;
                // unit phase of g
                let ph = g.scale(one / ag);
                let phc = ph.conj();
                rotate_cols(a, p, q, c, s, ph, phc);
                rotate_cols(v, p, q, c, s, ph, phc);
                norms[p] = alpha - t * ag;
                norms[q] = beta + t * ag;
            }
        }
        if !rotated {
            break;
        }
        // refresh norms to limit drift
        for (j, n) in norms.iter_mut().enumerate() {
            let mut s = r0.zero_like();
            for x in a.col(j) {
                s = s + x.abs2();
            }
            *n = s;
        }
    }
    let mut order: Vec<usize> = (0..cols).collect();
    let sig: Vec<T::Real> = norms.iter().map(|n| n.sqrt()).collect();
    order.sort_by(|&i, &j| sig[j].partial_cmp(&sig[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma = order.iter().map(|&i| sig[i]).collect();
    let vs = DenseMatrix::from_fn(v.rows(), cols, |i, j| v.get(i, order[j]));
    Ok(Svd {
        sigma,
        v: vs,
        sweeps,
    })
}

#[inline]
fn rotate_cols<T: Scalar>(a: &mut DenseMatrix<T>, p: usize, q: usize, c: T::Real, s: T::Real, ph: T, phc: T) {
    let rows = a.rows();
    let (lo, hi) = a.data.split_at_mut(q * rows);
    let cp = &mut lo[p * rows..(p + 1) * rows];
    let cq = &mut hi[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        // p' = c p - s e^{-iθ} q ;  q' = s e^{iθ} p + c q
        *x = xp.scale(c) - (phc * yq).scale(s);
        *y = (ph * xp).scale(s) + yq.scale(c);
    }
}

fn max_off_diagonal<T: Scalar>(a: &DenseMatrix<T>, norms: &[T::Real]) -> f64 {
    let mut worst = 0.0f64;
    for p in 0..a.cols() {
        for q in p + 1..a.cols() {
            let g = dot_conj(a.col(p), a.col(q)).abs().to_f64();
            let d = (norms[p] * norms[q]).sqrt().to_f64();
            if d > 0.0 {
                worst = worst.max(g / d);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::complex::{BigComplex, Complex};
    use crate::mp::real::BigReal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solve_identity_and_diagonal() {
        let id = DenseMatrix::identity(3, 1.0);
        assert_eq!(solve_dense(&id, &[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        assert_eq!(solve_dense(&d, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn solve_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DenseMatrix::from_fn(5, 5, |i, j| {
            rng.gen_range(-1.0..1.0) + if i == j { 5.0 } else { 0.0 }
        });
        let b: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
        let x = solve_dense(&m, &b).unwrap();
        let r = m.matvec(&x);
        let res = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res <= 1e-12);
    }

    #[test]
    fn solve_big_residual_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let m = DenseMatrix::from_fn(n, n, |_, _| BigReal::from_f64(rng.gen_range(-1.0..1.0), 256));
        let b: Vec<BigReal> = (0..n).map(|i| BigReal::from_f64(i as f64, 256)).collect();
        let x = solve_dense(&m, &b).unwrap();
        let r = m.matvec(&x);
        let res = vec_norm(&r.iter().zip(&b).map(|(a, b)| *a - *b).collect::<Vec<_>>());
        let bound = m.norm_fro() * vec_norm(&x) * BigReal::from_f64(n as f64 * 2f64.powi(-256) * 8.0, 256);
        assert!(res <= bound, "{res:?} > {bound:?}");
    }

    #[test]
    fn svd_identity_and_diag() {
        let id = DenseMatrix::identity(3, BigReal::one(256));
        let s = jacobi_svd(&id).unwrap();
        for v in &s.sigma {
            assert_eq!(v.to_f64(), 1.0);
        }
        let d = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ]);
        let s = jacobi_svd(&d).unwrap();
        assert_eq!(s.sigma, vec![3.0, 2.0, 1.0]);
        assert!((s.v_min()[0].abs() - 1.0).abs() < 1e-15);
    }

    fn random_complex(rows: usize, cols: usize, seed: u64) -> Vec<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..rows)
            .map(|_| (0..cols).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect()
    }

    #[test]
    fn svd_random_complex_matches_double_oracle() {
        let data = random_complex(20, 10, 11);
        let big = DenseMatrix::from_fn(20, 10, |i, j| BigComplex::from_f64(data[i][j].0, data[i][j].1, 256));
        let s = jacobi_svd(&big).unwrap();
        let na = nalgebra::DMatrix::from_fn(20, 10, |i, j| nalgebra::Complex::new(data[i][j].0, data[i][j].1));
        let mut oracle: Vec<f64> = na.singular_values().iter().copied().collect();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in s.sigma.iter().zip(&oracle) {
            assert!((a.to_f64() - b).abs() / b < 1e-13, "{} vs {b}", a.to_f64());
        }
        // smallest singular vector: ‖M v‖ = σ_min
        let vmin = s.v_min();
        let mv = big.matvec(&vmin);
        let r = (vec_norm(&mv) - *s.sigma.last().unwrap()).abs().to_f64();
        assert!(r < 1e-60);
    }

    #[test]
    fn svd_conjugate_transpose_invariance() {
        let data = random_complex(8, 8, 5);
        let m = DenseMatrix::from_fn(8, 8, |i, j| BigComplex::from_f64(data[i][j].0, data[i][j].1, 256));
        let a = jacobi_svd(&m).unwrap();
        let b = jacobi_svd(&m.adjoint()).unwrap();
        let tol = 2f64.powi(-128);
        for (x, y) in a.sigma.iter().zip(&b.sigma) {
            assert!(((*x - *y) / *x).abs().to_f64() <= tol);
        }
    }

    #[test]
    fn right_vectors_orthonormal() {
        let data = random_complex(12, 6, 9);
        let m = DenseMatrix::from_fn(12, 6, |i, j| Complex::new(data[i][j].0, data[i][j].1));
        let s = jacobi_svd(&m).unwrap();
        for p in 0..6 {
            for q in 0..6 {
                let d = dot_conj(s.v.col(p), s.v.col(q)).abs();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_wide_matrix() {
        let m = DenseMatrix::filled(2, 3, 1.0);
        assert!(jacobi_svd(&m).is_err());
    }
}
