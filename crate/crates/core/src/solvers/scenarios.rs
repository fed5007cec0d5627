//! Named problem setups and kernel preparation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dofde::{example1, example2, exm1_forcing, DOFDEProblem};
use super::dopde::{DOPDEProblem, FieldFn, PdeKernels, WeightSource};
use super::grid::GridSpec;
use super::spatial::{compress_within, spatial_kernel_table, EtaField, SpatialKernelTable, SCENARIO_ETA_VALUES};
use crate::error::{Error, Result};
use crate::expsum::{compress_cached, CompressOptions, CompressedKernel, KernelCache};
use crate::kernels::{DOKernel, WeightFunctionSpec};
use crate::timestepping::ModeFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Example1,
    Example2,
    Table1,
    Dowave2d,
    GeometricEta,
    RandomfieldEta,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 6] = [
        ScenarioName::Example1,
        ScenarioName::Example2,
        ScenarioName::Table1,
        ScenarioName::Dowave2d,
        ScenarioName::GeometricEta,
        ScenarioName::RandomfieldEta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioName::Example1 => "example1",
            ScenarioName::Example2 => "example2",
            ScenarioName::Table1 => "table1",
            ScenarioName::Dowave2d => "dowave2d",
            ScenarioName::GeometricEta => "geometric_eta",
            ScenarioName::RandomfieldEta => "randomfield_eta",
        }
    }

    /// Scalar ODE scenarios.
    pub fn is_ode(&self) -> bool {
        matches!(self, ScenarioName::Example1 | ScenarioName::Example2)
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.name() == key)
            .ok_or_else(|| Error::config(format!("unknown scenario {s:?}")))
    }
}

/// Scalar scenario by name.
pub fn ode_scenario(name: ScenarioName) -> Result<DOFDEProblem> {
    match name {
        ScenarioName::Example1 => Ok(example1()),
        ScenarioName::Example2 => Ok(example2()),
        other => Err(Error::config(format!("{other} is not an ODE scenario"))),
    }
}

/// Tunables of the PDE scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeParams {
    pub cells: usize,
    pub epsilon: Option<f64>,
    pub t_final: Option<f64>,
    pub seed: u64,
    /// Bump radius r of φ_{2,r} and of the space-dependent bumps.
    pub radius: Option<f64>,
    pub zero_forcing: bool,
}

impl Default for PdeParams {
    fn default() -> Self {
        PdeParams {
            cells: 64,
            epsilon: None,
            t_final: None,
            seed: 0,
            radius: None,
            zero_forcing: false,
        }
    }
}

/// PDE scenario by name.
pub fn pde_scenario(name: ScenarioName, p: &PdeParams) -> Result<DOPDEProblem> {
    let grid = GridSpec::new(2, p.cells)?;
    let mut prob = match name {
        ScenarioName::Table1 => table1(grid, p.epsilon.unwrap_or(1.0)),
        ScenarioName::Dowave2d => dowave2d(grid, p.radius.unwrap_or(0.5), p.epsilon.unwrap_or(1.0))?,
        ScenarioName::GeometricEta => {
            let eta = EtaField::quadrants(&grid, SCENARIO_ETA_VALUES)?;
            eta_scenario("geometric_eta", grid, eta, p)
        }
        ScenarioName::RandomfieldEta => {
            let eta = EtaField::random_smooth(&grid, &SCENARIO_ETA_VALUES, p.seed)?;
            eta_scenario("randomfield_eta", grid, eta, p)
        }
        other => return Err(Error::config(format!("{other} is not a PDE scenario"))),
    };
    if let Some(t) = p.t_final {
        prob.t_final = t;
    }
    if p.zero_forcing {
        prob.forcing = None;
        for u in &mut prob.initial {
            u.fill(0.0);
        }
        prob.reference = Some(Arc::new(|_, _| 0.0));
    }
    Ok(prob)
}

/// Eigenvalue of the discrete Laplacian for sin(4πx)(sin(4πy)).
pub fn discrete_eigenvalue(grid: &GridSpec) -> f64 {
    let dx = grid.dx();
    -(grid.dim as f64) * (2.0 - 2.0 * (4.0 * std::f64::consts::PI * dx).cos()) / (dx * dx)
}

fn psi(grid: &GridSpec, x: [f64; 2]) -> f64 {
    let pi4 = 4.0 * std::f64::consts::PI;
    let s = (pi4 * x[0]).sin();
    if grid.dim == 1 {
        s
    } else {
        s * (pi4 * x[1]).sin()
    }
}

/// u = ψ(x)t⁵ with ψ = sin(4πx)sin(4πy), φ(α) = e^{−α}Γ(6−α) and forcing
/// ψ(DO[t⁵] − εμt⁵) built from the discrete eigenvalue μ, so that the
/// semi-discrete solution is exactly ψt⁵.
pub fn table1(grid: GridSpec, epsilon: f64) -> DOPDEProblem {
    let mu = discrete_eigenvalue(&grid);
    let shape = grid.sample(|x| psi(&grid, x));
    let n = grid.ndof();
    let forcing: FieldFn = Arc::new(move |t, _, out| {
        let a = exm1_forcing(t) - epsilon * mu * t.powi(5);
        for (o, s) in out.iter_mut().zip(&shape) {
            *o = a * s;
        }
    });
    DOPDEProblem {
        name: "table1".into(),
        grid,
        epsilon,
        forcing: Some(forcing),
        initial: vec![vec![0.0; n], vec![0.0; n]],
        weight: WeightSource::Global(Arc::new(WeightFunctionSpec::exm1())),
        t_final: 1.0,
        reference: Some(Arc::new(move |t, x| psi(&grid, x) * t.powi(5))),
    }
}

/// Steady manufactured solution sin(πx)sin(πy)eˣ of −Δu = g, returned as
/// (u, g) sampled on the interior nodes.
pub fn poisson_manufactured(grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let pi = std::f64::consts::PI;
    let u = grid.sample(|[x, y]| (pi * x).sin() * (pi * y).sin() * x.exp());
    // Δ(sin πx eˣ) = eˣ((1 − π²) sin πx + 2π cos πx)
    let g = grid.sample(|[x, y]| {
        let sx = (pi * x).sin();
        let sy = (pi * y).sin();
        let dxx = x.exp() * ((1.0 - pi * pi) * sx + 2.0 * pi * (pi * x).cos());
        -(dxx * sy - pi * pi * sx * x.exp() * sy)
    });
    (u, g)
}

/// The one-oscillation pulse 100 sin(20πt) exp(−1/(10t(1 − 10t))) on (0, 0.1).
pub fn pulse(t: f64) -> f64 {
    if t <= 0.0 || t >= 0.1 {
        return 0.0;
    }
    100.0 * (20.0 * std::f64::consts::PI * t).sin() * (-1.0 / (10.0 * t * (1.0 - 10.0 * t))).exp()
}

/// Zero initial data, uniform pulse forcing and φ_{2,r}, the bump centered
/// at 2 cut to [2 − r, 2].
pub fn dowave2d(grid: GridSpec, r: f64, epsilon: f64) -> Result<DOPDEProblem> {
    let n = grid.ndof();
    let forcing: FieldFn = Arc::new(|t, _, out| out.fill(pulse(t)));
    Ok(DOPDEProblem {
        name: "dowave2d".into(),
        grid,
        epsilon,
        forcing: Some(forcing),
        initial: vec![vec![0.0; n], vec![0.0; n]],
        weight: WeightSource::Global(Arc::new(WeightFunctionSpec::bump_truncated(2.0, r, 2.0 - r, 2.0, 2)?)),
        t_final: 2.0,
        reference: None,
    })
}

/// Source centers of the η scenarios, one per quadrant.
pub const SOURCE_CENTERS: [[f64; 2]; 4] = [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]];

/// Σ_l exp(−1000‖x − x_l‖).
pub fn point_sources(grid: &GridSpec, centers: &[[f64; 2]]) -> Vec<f64> {
    grid.sample(|[x, y]| {
        centers
            .iter()
            .map(|c| (-1000.0 * ((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt()).exp())
            .sum()
    })
}

fn eta_scenario(name: &str, grid: GridSpec, eta: EtaField, p: &PdeParams) -> DOPDEProblem {
    let n = grid.ndof();
    DOPDEProblem {
        name: name.into(),
        grid,
        epsilon: p.epsilon.unwrap_or(0.2),
        forcing: None,
        initial: vec![point_sources(&grid, &SOURCE_CENTERS), vec![0.0; n], vec![0.0; n]],
        weight: WeightSource::SpaceDependent {
            eta,
            radius: p.radius.unwrap_or(0.4),
            alpha_max: 3,
        },
        t_final: 3.0,
        reference: None,
    }
}

/// Compressed K_1 … K_αmax of a weight function.
pub fn compress_weight(
    weight: &Arc<WeightFunctionSpec>,
    opts: &CompressOptions,
    cache: Option<&KernelCache>,
) -> Result<Vec<CompressedKernel>> {
    DOKernel::all(weight)?
        .iter()
        .map(|k| Ok(compress_cached(k, opts, cache)?.kernel))
        .collect()
}

/// Kernels of a scalar problem.
pub fn dofde_kernels(
    problem: &DOFDEProblem,
    opts: &CompressOptions,
    cache: Option<&KernelCache>,
) -> Result<Vec<CompressedKernel>> {
    compress_weight(&problem.weight, opts, cache)
}

/// Prepared kernels of a PDE problem.
#[derive(Clone, Debug)]
pub struct PreparedPdeKernels {
    pub kernels: PdeKernels,
    /// Compressed kernels per family.
    pub compressed: Vec<Vec<CompressedKernel>>,
    pub table: Option<SpatialKernelTable>,
}

/// Compress the kernels of `problem`. `m` caps the term count; it is
/// required for space-dependent weights, where every family is padded to it.
pub fn pde_kernels(
    problem: &DOPDEProblem,
    opts: &CompressOptions,
    m: Option<usize>,
    cache: Option<&KernelCache>,
) -> Result<PreparedPdeKernels> {
    match &problem.weight {
        WeightSource::Global(w) => {
            let ks = match m {
                None => compress_weight(w, opts, cache)?,
                Some(m) => DOKernel::all(w)?
                    .iter()
                    .map(|k| Ok(compress_within(k, opts, m, cache)?.kernel))
                    .collect::<Result<Vec<_>>>()?,
            };
            Ok(PreparedPdeKernels {
                kernels: PdeKernels::global(ModeFamily::from_compressed(&ks)?),
                compressed: vec![ks],
                table: None,
            })
        }
        WeightSource::SpaceDependent { eta, radius, alpha_max } => {
            let m = m.ok_or_else(|| Error::config("space-dependent weights need a fixed term count m"))?;
            let (r, amax) = (*radius, *alpha_max);
            let table = spatial_kernel_table(eta, |c| WeightFunctionSpec::bump(c, r, amax), m, opts, cache)?;
            Ok(PreparedPdeKernels {
                kernels: PdeKernels {
                    families: table.families()?,
                    node_class: table.node_index.clone(),
                },
                compressed: table.kernels.clone(),
                table: Some(table),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::grid::assemble_laplacian;

    #[test]
    fn names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.name().parse::<ScenarioName>().unwrap(), n);
        }
        assert_eq!("Geometric-Eta".parse::<ScenarioName>().unwrap(), ScenarioName::GeometricEta);
        assert!("lake".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn table1_forcing_uses_the_discrete_eigenvalue() {
        let g = GridSpec::new(2, 16).unwrap();
        let p = table1(g, 1.0);
        let l = assemble_laplacian(&g);
        let u = g.sample(|x| psi(&g, x));
        let lu = l.matvec(&u);
        let mu = discrete_eigenvalue(&g);
        for (a, b) in lu.iter().zip(&u) {
            assert!((a - mu * b).abs() < 1e-9);
        }
        let mut f = vec![0.0; g.ndof()];
        (p.forcing.unwrap())(0.5, &g, &mut f);
        let expect = exm1_forcing(0.5) - mu * 0.5f64.powi(5);
        let d = 20;
        assert!((f[d] - expect * u[d]).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn poisson_forcing_matches_fine_difference() {
        let g = GridSpec::new(2, 400).unwrap();
        let (u, rhs) = poisson_manufactured(&g);
        let lu = assemble_laplacian(&g).matvec(&u);
        let worst = lu.iter().zip(&rhs).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn pulse_is_one_oscillation() {
        assert_eq!(pulse(0.0), 0.0);
        assert_eq!(pulse(0.2), 0.0);
        assert!(pulse(0.025) > 0.0 && pulse(0.075) < 0.0);
        assert!(pulse(0.05).abs() < 1e-10);
    }

    #[test]
    fn zero_forcing_override() {
        let p = pde_scenario(
            ScenarioName::Dowave2d,
            &PdeParams {
                cells: 8,
                zero_forcing: true,
                ..PdeParams::default()
            },
        )
        .unwrap();
        assert!(p.forcing.is_none());
        assert_eq!(p.t_final, 2.0);
    }

    #[test]
    fn eta_scenarios_have_three_initial_fields() {
        let p = pde_scenario(
            ScenarioName::GeometricEta,
            &PdeParams {
                cells: 8,
                ..PdeParams::default()
            },
        )
        .unwrap();
        assert_eq!(p.amax(), 3);
        assert_eq!(p.initial.len(), 3);
        p.validate().unwrap();
        assert!(pde_scenario(ScenarioName::Example1, &PdeParams::default()).is_err());
    }
}
