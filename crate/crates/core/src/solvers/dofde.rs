//! Scalar distributed-order ODEs ∫ φ(α) D^α u dα = f(t, u).

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::CompressedKernel;
use crate::kernels::WeightFunctionSpec;
use crate::timestepping::{
    make_tableau, newton_solve, ModeFamily, ModeSystemState, NewtonOptions, Scheme, Stepper, TimeMesh,
};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type RhsFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A scalar problem ∫₀^{αmax} φ(α) D^α u dα = f(t, u).
#[derive(Clone)]
pub struct DOFDEProblem {
    pub name: String,
    pub weight: Arc<WeightFunctionSpec>,
    /// u(0), u'(0), … (αmax values).
    pub initial: Vec<f64>,
    pub rhs: RhsFn,
    /// ∂f/∂u.
    pub rhs_du: RhsFn,
    pub t_final: f64,
    pub reference: Option<ScalarFn>,
}

impl std::fmt::Debug for DOFDEProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DOFDEProblem({}, {:?})", self.name, self.weight)
    }
}

impl DOFDEProblem {
    pub fn amax(&self) -> usize {
        self.weight.alpha_max as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial.len() != self.amax() {
            return Err(Error::config(format!(
                "{} needs {} initial values, got {}",
                self.name,
                self.amax(),
                self.initial.len()
            )));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::config("final time must be positive"));
        }
        Ok(())
    }
}

/// 120(t⁵ − t³e^{−2})/(1 + ln t), the distributed-order derivative of t⁵ for
/// φ(α) = e^{−α}Γ(6−α), written as 120 t³ e^{−2} expm1(2x)/x with x = 1 + ln t.
pub fn exm1_forcing(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = 1.0 + t.ln();
    let ratio = if x.abs() < 1e-8 { 2.0 + 2.0 * x } else { (2.0 * x).exp_m1() / x };
    120.0 * t.powi(3) * (-2.0f64).exp() * ratio
}

fn exm1_g(u: f64) -> f64 {
    let r = u.abs().sqrt();
    (100.0 * u / (1.0 + r)).cos()
}

fn exm1_g_du(u: f64) -> f64 {
    let r = u.abs().sqrt();
    let q = 100.0 * u / (1.0 + r);
    -q.sin() * 100.0 * (1.0 + 0.5 * r) / ((1.0 + r) * (1.0 + r))
}

/// φ(α) = e^{−α}Γ(6−α) on [0, 2], u = t⁵, f(t, u) = DO[t⁵] + g(u) − g(t⁵) with
/// g(u) = cos(100u/(1 + √|u|)).
pub fn example1() -> DOFDEProblem {
    DOFDEProblem {
        name: "example1".into(),
        weight: Arc::new(WeightFunctionSpec::exm1()),
        initial: vec![0.0, 0.0],
        rhs: Arc::new(|t, u| exm1_forcing(t) + exm1_g(u) - exm1_g(t.powi(5))),
        rhs_du: Arc::new(|_, u| exm1_g_du(u)),
        t_final: 1.0,
        reference: Some(Arc::new(|t| t.powi(5))),
    }
}

/// 16-point Gauss–Legendre rule on [0, 1].
fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = crate::kernels::quadrature::legendre_f64(16);
        (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
    })
}

/// ∫₀² Γ(4−α) D^α(t³ + 2t + 4) dα
/// = 6(t³ − t)/ln t + 2∫₀¹ (3−α)(2−α) t^{1−α} dα.
pub fn exm2_forcing(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let l = t.ln();
    if l.abs() >= 0.5 {
        let (l2, l3) = (l * l, l * l * l);
        return (6.0 * t.powi(3) + 6.0 * t - 4.0) / l + (6.0 - 10.0 * t) / l2 + (4.0 * t - 4.0) / l3;
    }
    let (x, w) = gl16();
    let first = if l == 0.0 { 12.0 } else { 6.0 * t * (t * t - 1.0) / l };
    let second: f64 = x
        .iter()
        .zip(w)
        .map(|(a, wa)| wa * (3.0 - a) * (2.0 - a) * t.powf(1.0 - a))
        .sum();
    first + 2.0 * second
}

/// φ(α) = Γ(4−α) on [0, 2], u = t³ + 2t + 4.
pub fn example2() -> DOFDEProblem {
    DOFDEProblem {
        name: "example2".into(),
        weight: Arc::new(WeightFunctionSpec::exm2()),
        initial: vec![4.0, 2.0],
        rhs: Arc::new(|t, _| exm2_forcing(t)),
        rhs_du: Arc::new(|_, _| 0.0),
        t_final: 1.0,
        reference: Some(Arc::new(|t| t.powi(3) + 2.0 * t + 4.0)),
    }
}

/// Example 1 weight with f ≡ 0 and zero data.
pub fn zero_problem() -> DOFDEProblem {
    DOFDEProblem {
        name: "zero".into(),
        weight: Arc::new(WeightFunctionSpec::exm1()),
        initial: vec![0.0, 0.0],
        rhs: Arc::new(|_, _| 0.0),
        rhs_du: Arc::new(|_, _| 0.0),
        t_final: 1.0,
        reference: Some(Arc::new(|_| 0.0)),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DofdeSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// |u_n − u(t_n)| when a reference is available.
    pub errors: Option<Vec<f64>>,
    /// max_n |u_n − u(t_n)|.
    pub linf_error: Option<f64>,
    pub newton_iterations: Vec<usize>,
    pub unknowns: usize,
    pub modes: usize,
}

/// Solve `problem` with one exponential sum per kernel K_1 … K_αmax.
pub fn solve_dofde(
    problem: &DOFDEProblem,
    kernels: &[CompressedKernel],
    scheme: Scheme,
    mesh: &TimeMesh,
    newton: &NewtonOptions,
) -> Result<DofdeSolution> {
    problem.validate()?;
    let amax = problem.amax();
    if kernels.len() != amax {
        return Err(Error::config(format!(
            "{} needs {amax} compressed kernels, got {}",
            problem.name,
            kernels.len()
        )));
    }
    let family = ModeFamily::from_compressed(kernels)?;
    solve_with_family(problem, family, scheme, mesh, newton)
}

/// [`solve_dofde`] with an explicit mode family.
pub fn solve_with_family(
    problem: &DOFDEProblem,
    family: ModeFamily,
    scheme: Scheme,
    mesh: &TimeMesh,
    newton: &NewtonOptions,
) -> Result<DofdeSolution> {
    problem.validate()?;
    let amax = problem.amax();
    if family.amax() != amax {
        return Err(Error::config("mode family does not match αmax"));
    }
    let counts = family.counts();
    let modes = family.total_modes();
    let mut derivs: Vec<Vec<f64>> = problem.initial.iter().map(|&v| vec![v]).collect();
    derivs.push(vec![0.0]);
    let mut state = ModeSystemState::new(derivs, &counts)?;
    let mut stepper = Stepper::new(make_tableau(scheme), vec![family], vec![])?;
    let s = stepper.tableau.stages();
    let mut times = vec![0.0];
    let mut values = vec![problem.initial[0]];
    let mut iters = Vec::with_capacity(mesh.steps());
    for n in 0..mesh.steps() {
        let h = mesh.step(n);
        let rhs = &problem.rhs;
        let rhs_du = &problem.rhs_du;
        let rep = stepper.step(&mut state, h, |sys, guess| {
            let p0 = sys.p(0).clone();
            let g = sys.g(0).clone();
            let times = sys.stage_times.clone();
            let residual = |k: &[f64]| {
                let y0 = sys.stage_values(0, k);
                let sum = sys.mode_sum(k);
                (0..s).map(|r| sum[r] - rhs(times[r], y0[r])).collect::<Vec<f64>>()
            };
            let jacobian = |k: &[f64]| {
                let y0 = sys.stage_values(0, k);
                let mut j = g.clone();
                for r in 0..s {
                    let fu = rhs_du(times[r], y0[r]);
                    for c in 0..s {
                        j[(r, c)] -= fu * p0[(r, c)];
                    }
                }
                j
            };
            newton_solve(residual, jacobian, guess, newton)
        })?;
        iters.push(rep.solve.iterations);
        // the last node is T exactly
        state.t = mesh.nodes[n + 1];
        times.push(state.t);
        values.push(state.derivs[0][0]);
    }
    let errors = problem
        .reference
        .as_ref()
        .map(|u| times.iter().zip(&values).map(|(t, v)| (v - u(*t)).abs()).collect::<Vec<f64>>());
    let linf_error = errors.as_ref().map(|e| e.iter().cloned().fold(0.0, f64::max));
    Ok(DofdeSolution {
        times,
        values,
        errors,
        linf_error,
        newton_iterations: iters,
        unknowns: s,
        modes,
    })
}

/// Jacobian of the stage residual, exposed for diagnostics.
pub fn stage_jacobian(g: &DMatrix<f64>, p0: &DMatrix<f64>, fu: &[f64]) -> DMatrix<f64> {
    let mut j = g.clone();
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            j[(r, c)] -= fu[r] * p0[(r, c)];
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestepping::graded_mesh;

    /// ∫₀² φ(α) Γ(k+1)/Γ(k+1−α) t^{k−α} dα by composite Gauss–Legendre.
    fn do_monomial(phi: impl Fn(f64) -> f64, t: f64, terms: &[(f64, i32)], amax: f64) -> f64 {
        let (x, w) = crate::kernels::quadrature::legendre_f64(40);
        let mut acc = 0.0;
        let pieces = 8;
        for p in 0..pieces {
            let (a, b) = (amax * p as f64 / pieces as f64, amax * (p + 1) as f64 / pieces as f64);
            for (xi, wi) in x.iter().zip(&w) {
                let al = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                let mut d = 0.0;
                for &(c, k) in terms {
                    // Caputo derivative of t^k vanishes for α > k
                    if (k as f64) > al || k == 0 && al == 0.0 {
                        let kf = k as f64;
                        d += c * statrs::function::gamma::gamma(kf + 1.0) / statrs::function::gamma::gamma(kf + 1.0 - al)
                            * t.powf(kf - al);
                    }
                }
                acc += 0.5 * (b - a) * wi * phi(al) * d;
            }
        }
        acc
    }

    #[test]
    fn example1_forcing_matches_quadrature() {
        let phi = |a: f64| (-a).exp() * statrs::function::gamma::gamma(6.0 - a);
        for t in [0.05, 0.2, (-1.0f64).exp(), 0.5, 0.9, 1.0] {
            let q = do_monomial(phi, t, &[(1.0, 5)], 2.0);
            assert!((exm1_forcing(t) - q).abs() < 1e-11 * q.abs().max(1e-3), "t={t}: {} vs {q}", exm1_forcing(t));
        }
    }

    #[test]
    fn example2_forcing_matches_quadrature() {
        let phi = |a: f64| statrs::function::gamma::gamma(4.0 - a);
        for t in [1e-3, 0.1, 0.5, 0.7, 0.999, 1.0] {
            let q = do_monomial(phi, t, &[(1.0, 3), (2.0, 1)], 2.0);
            assert!((exm2_forcing(t) - q).abs() < 1e-10 * q.abs(), "t={t}: {} vs {q}", exm2_forcing(t));
        }
    }

    #[test]
    fn example2_reference_value() {
        let u = example2().reference.unwrap();
        assert_eq!(u(1.0), 7.0);
    }

    #[test]
    fn g_derivative_matches_difference_quotient() {
        for u in [0.01, 0.3, 0.8, 1.0] {
            let h = 1e-7;
            let fd = (exm1_g(u + h) - exm1_g(u - h)) / (2.0 * h);
            assert!((exm1_g_du(u) - fd).abs() < 1e-5 * fd.abs().max(1.0), "u={u}");
        }
    }

    #[test]
    fn zero_problem_stays_zero() {
        let fam = ModeFamily::new(vec![
            vec![crate::expsum::ExpTerm { w: 1.0, lambda: 2.0 }],
            vec![crate::expsum::ExpTerm { w: 0.5, lambda: 30.0 }],
        ])
        .unwrap();
        let sol = solve_with_family(
            &zero_problem(),
            fam,
            Scheme::RadauIia2,
            &graded_mesh(10, 1.0, 1.0).unwrap(),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
        assert_eq!(sol.linf_error, Some(0.0));
    }

    #[test]
    fn wrong_kernel_count_is_a_config_error() {
        let e = solve_dofde(
            &example1(),
            &[],
            Scheme::ImplicitEuler,
            &graded_mesh(4, 1.0, 1.0).unwrap(),
            &NewtonOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}
