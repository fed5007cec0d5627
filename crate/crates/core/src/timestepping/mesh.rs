//! Time meshes t_n = (n/N)^γ T.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    pub nodes: Vec<f64>,
    pub n: usize,
    pub gamma: f64,
    pub t_final: f64,
}

impl TimeMesh {
    pub fn uniform(n: usize, t_final: f64) -> Result<Self> {
        graded_mesh(n, 1.0, t_final)
    }

    /// Step count N.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// h_n = t_{n+1} − t_n, exactly T/N on uniform meshes.
    pub fn step(&self, n: usize) -> f64 {
        if self.gamma == 1.0 {
            self.t_final / self.n as f64
        } else {
            self.nodes[n + 1] - self.nodes[n]
        }
    }

    /// Largest step.
    pub fn h_max(&self) -> f64 {
        (0..self.steps()).map(|n| self.step(n)).fold(0.0, f64::max)
    }
}

/// Graded mesh with N steps, grading γ ≥ 1 and final time T.
pub fn graded_mesh(n: usize, gamma: f64, t_final: f64) -> Result<TimeMesh> {
    if n == 0 {
        return Err(Error::config("mesh needs N ≥ 1"));
    }
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::config(format!("grading γ = {gamma} must be ≥ 1")));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::config(format!("final time T = {t_final} must be positive")));
    }
    let nodes: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                t_final
            } else if gamma == 1.0 {
                k as f64 / n as f64 * t_final
            } else {
                (k as f64 / n as f64).powf(gamma) * t_final
            }
        })
        .collect();
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(format!("mesh N = {n}, γ = {gamma} is not strictly increasing")));
    }
    Ok(TimeMesh {
        nodes,
        n,
        gamma,
        t_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_quarters() {
        assert_eq!(graded_mesh(4, 1.0, 1.0).unwrap().nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn quadratic_grading() {
        assert_eq!(graded_mesh(2, 2.0, 1.0).unwrap().nodes, vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn strong_grading_first_step() {
        let m = graded_mesh(320, 5.0, 1.0).unwrap();
        let expect = 320f64.powi(-5);
        assert!((m.step(0) - expect).abs() < 1e-15 * expect);
        assert!((m.step(0) - 2.98e-13).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(graded_mesh(0, 1.0, 1.0).is_err());
        assert!(graded_mesh(4, 0.5, 1.0).is_err());
        assert!(graded_mesh(4, 1.0, 0.0).is_err());
    }
}
