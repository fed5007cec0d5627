//! Arbitrary-precision arithmetic, special functions and dense linear algebra.

pub mod complex;
pub mod elementary;
pub mod gamma;
pub mod linalg;
pub mod real;
pub mod scalar;

pub use complex::{BigComplex, Complex};
pub use elementary::{ln2, pi};
pub use gamma::{gamma, gamma_prec, rgamma};
pub use linalg::{jacobi_svd, solve_dense, DenseMatrix, Svd};
pub use real::{BigReal, BitKey, DEFAULT_PRECISION_BITS, MAX_PRECISION_BITS};
pub use scalar::{Real, RealField, Scalar};

/// Default precision for a given relative AAA tolerance.
pub fn default_precision_for(tol: f64) -> u32 {
    if tol <= 1e-30 {
        512
    } else {
        256
    }
}
