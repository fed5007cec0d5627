//! Damped Newton iteration for the condensed stage system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on ‖F‖∞.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Step halvings tried before accepting a non-decreasing step.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            abs_tol: 1e-12,
            max_iter: 50,
            max_halvings: 10,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_norm: f64,
    /// ‖F‖∞ at the initial guess and after every iteration.
    pub history: Vec<f64>,
    pub halvings: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solve F(x) = 0 from `guess` using an assembled Jacobian.
pub fn newton_solve(
    mut residual: impl FnMut(&[f64]) -> Vec<f64>,
    mut jacobian: impl FnMut(&[f64]) -> DMatrix<f64>,
    guess: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonReport)> {
    let n = guess.len();
    let mut x = guess;
    let mut f = residual(&x);
    let mut norm = inf_norm(&f);
    let mut rep = NewtonReport {
        history: vec![norm],
        ..Default::default()
    };
    while !(norm <= opts.abs_tol) {
        if !norm.is_finite() {
            return Err(Error::numerical(format!(
                "Newton residual is not finite after {} iterations; history {:?}",
                rep.iterations, rep.history
            )));
        }
        if rep.iterations >= opts.max_iter {
            return Err(Error::Accuracy {
                message: format!(
                    "Newton did not converge in {} iterations; history {:?}",
                    opts.max_iter, rep.history
                ),
                achieved: norm,
            });
        }
        let j = jacobian(&x);
        let rhs = DVector::from_column_slice(&f);
        let dx = j
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("singular Newton Jacobian"))?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for halving in 0..=opts.max_halvings {
            let trial: Vec<f64> = (0..n).map(|i| x[i] - lambda * dx[i]).collect();
            let ft = residual(&trial);
            let nt = inf_norm(&ft);
            if nt.is_finite() && (nt < norm || nt <= opts.abs_tol) {
                rep.halvings += halving;
                accepted = Some((trial, ft, nt));
                break;
            }
            lambda *= 0.5;
        }
        let (xn, fnew, nn) = match accepted {
            Some(a) => a,
            None => {
                // no decrease within the halving budget: take the full step
                rep.halvings += opts.max_halvings;
                let trial: Vec<f64> = (0..n).map(|i| x[i] - dx[i]).collect();
                let ft = residual(&trial);
                let nt = inf_norm(&ft);
                (trial, ft, nt)
            }
        };
        x = xn;
        f = fnew;
        norm = nn;
        rep.iterations += 1;
        rep.history.push(norm);
    }
    rep.residual_norm = norm;
    Ok((x, rep))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_residual_converges_in_one_iteration() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = [5.0, 5.0];
        let res = |x: &[f64]| vec![3.0 * x[0] + x[1] - b[0], x[0] + 2.0 * x[1] - b[1]];
        let (x, rep) = newton_solve(res, |_| a.clone(), vec![0.0, 0.0], &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_convergence_to_two() {
        let (x, rep) = newton_solve(
            |x| vec![x[0] * x[0] - 4.0],
            |x| DMatrix::from_element(1, 1, 2.0 * x[0]),
            vec![3.0],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!(rep.iterations <= 6, "{}", rep.iterations);
    }

    #[test]
    fn non_convergence_reports_history() {
        // x² + 1 has no real root
        let opts = NewtonOptions {
            max_iter: 8,
            ..Default::default()
        };
        let e = newton_solve(
            |x| vec![x[0] * x[0] + 1.0],
            |x| DMatrix::from_element(1, 1, 2.0 * x[0]),
            vec![0.5],
            &opts,
        )
        .unwrap_err();
        assert!(matches!(e, Error::Accuracy { .. } | Error::Numerical(_)), "{e}");
        assert!(e.to_string().contains("history") || e.to_string().contains("singular"));
    }
}
