//! The distributed-order diffusion-wave equation
//! ∫ φ(α, x) D^α u dα = εΔu + f on (0,1)^d with homogeneous Dirichlet data.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::grid::{assemble_laplacian, BandedLu, BandedMatrix, CsrMatrix, GridSpec};
use super::spatial::EtaField;
use crate::error::{Error, Result};
use crate::kernels::WeightFunctionSpec;
use crate::timestepping::{
    make_tableau, CondensedSystem, ModeFamily, ModeSystemState, NewtonReport, Scheme, Stepper, TimeMesh,
};

/// Nodal forcing: fills f(t, ·) into the output slice.
pub type FieldFn = Arc<dyn Fn(f64, &GridSpec, &mut [f64]) + Send + Sync>;
/// Reference solution u(t, x).
pub type ReferenceFn = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;

/// Global weight function or a space-dependent family indexed by η.
#[derive(Clone, Debug)]
pub enum WeightSource {
    Global(Arc<WeightFunctionSpec>),
    /// Bump of the given radius centered at η(x).
    SpaceDependent { eta: EtaField, radius: f64, alpha_max: u32 },
}

impl WeightSource {
    pub fn amax(&self) -> usize {
        match self {
            WeightSource::Global(w) => w.alpha_max as usize,
            WeightSource::SpaceDependent { alpha_max, .. } => *alpha_max as usize,
        }
    }
}

#[derive(Clone)]
pub struct DOPDEProblem {
    pub name: String,
    pub grid: GridSpec,
    pub epsilon: f64,
    pub forcing: Option<FieldFn>,
    /// u(0), u'(0), … as nodal fields (αmax of them).
    pub initial: Vec<Vec<f64>>,
    pub weight: WeightSource,
    pub t_final: f64,
    pub reference: Option<ReferenceFn>,
}

impl std::fmt::Debug for DOPDEProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DOPDEProblem({}, {:?}, ε = {})", self.name, self.grid, self.epsilon)
    }
}

impl DOPDEProblem {
    pub fn amax(&self) -> usize {
        self.weight.amax()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.ndof();
        if self.initial.len() != self.amax() {
            return Err(Error::config(format!(
                "{} needs {} initial fields, got {}",
                self.name,
                self.amax(),
                self.initial.len()
            )));
        }
        if self.initial.iter().any(|v| v.len() != n) {
            return Err(Error::config("initial fields do not match the grid"));
        }
        if let WeightSource::SpaceDependent { eta, .. } = &self.weight {
            if eta.ndof() != n {
                return Err(Error::config("η field does not match the grid"));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("ε must be finite and non-negative"));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::config("final time must be positive"));
        }
        Ok(())
    }
}

/// Mode families and the node → family map.
#[derive(Clone, Debug)]
pub struct PdeKernels {
    pub families: Vec<ModeFamily>,
    /// Empty when one family covers every node.
    pub node_class: Vec<usize>,
}

impl PdeKernels {
    pub fn global(family: ModeFamily) -> Self {
        PdeKernels {
            families: vec![family],
            node_class: Vec::new(),
        }
    }

    pub fn counts(&self) -> Vec<usize> {
        self.families[0].counts()
    }
}

#[derive(Clone, Debug)]
pub struct PdeOptions {
    /// Relative residual bound of the condensed linear solve.
    pub linear_tol: f64,
    /// Evaluate the mode recurrence defect every step.
    pub check_recurrence: bool,
    /// Times at which to keep the full field (nearest mesh node).
    pub snapshot_times: Vec<f64>,
}

impl Default for PdeOptions {
    fn default() -> Self {
        PdeOptions {
            linear_tol: 1e-12,
            check_recurrence: false,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub field: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DopdeSolution {
    pub times: Vec<f64>,
    /// ‖u_h(t_n) − u(t_n)‖ in the grid L² norm.
    pub l2_errors: Option<Vec<f64>>,
    /// max_n of `l2_errors`.
    pub error: Option<f64>,
    /// ‖u_h(t_n)‖ in the grid L² norm.
    pub l2_norms: Vec<f64>,
    pub final_field: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Implicit unknowns per step, s·Ndof.
    pub unknowns: usize,
    pub modes_per_node: usize,
    pub max_linear_residual: f64,
    pub max_recurrence_residual: Option<f64>,
    /// Wall time per step, including factorizations.
    pub step_seconds: Vec<f64>,
    pub factorizations: usize,
}

/// Banded condensed operator (G_class(d) ⊗ e_d e_dᵀ − ε P0 ⊗ L) in
/// node-major ordering d·s + k, and its LU factors.
struct CondensedOperator {
    matrix: BandedMatrix,
    lu: BandedLu,
}

fn assemble(sys: &CondensedSystem, lap: &CsrMatrix, eps: f64, band: usize) -> Result<CondensedOperator> {
    let (s, n) = (sys.stages(), sys.ndof());
    let mut a = BandedMatrix::zeros(s * n, band, band);
    let p0 = sys.p(0);
    for d in 0..n {
        let g = sys.g(sys.class_of(d));
        for r in 0..s {
            for l in 0..s {
                a.add(d * s + r, d * s + l, g[(r, l)]);
            }
        }
        for (e, lv) in lap.row(d) {
            for r in 0..s {
                for l in 0..s {
                    let v = eps * p0[(r, l)] * lv;
                    if v != 0.0 {
                        a.add(d * s + r, e * s + l, -v);
                    }
                }
            }
        }
    }
    let lu = a.clone().factor()?;
    Ok(CondensedOperator { matrix: a, lu })
}

/// Solve `problem` on `mesh`. The condensed system is linear in the stage
/// derivatives, so each step is one banded solve against factors cached per
/// step size.
pub fn solve_dopde(
    problem: &DOPDEProblem,
    kernels: &PdeKernels,
    scheme: Scheme,
    mesh: &TimeMesh,
    opts: &PdeOptions,
) -> Result<DopdeSolution> {
    problem.validate()?;
    let grid = problem.grid;
    let n = grid.ndof();
    let amax = problem.amax();
    if kernels.families.iter().any(|f| f.amax() != amax) {
        return Err(Error::config("kernel families do not match αmax"));
    }
    if !kernels.node_class.is_empty() && kernels.node_class.len() != n {
        return Err(Error::config("node class map does not match the grid"));
    }
    let lap = assemble_laplacian(&grid);
    let tab = make_tableau(scheme);
    let s = tab.stages();
    let band = s * grid.per_axis().pow(grid.dim as u32 - 1) + s - 1;
    let mut stepper = Stepper::new(tab, kernels.families.clone(), kernels.node_class.clone())?;
    stepper.check_recurrence = opts.check_recurrence;
    let counts = stepper.counts();
    let mut derivs = problem.initial.clone();
    derivs.push(vec![0.0; n]);
    let mut state = ModeSystemState::new(derivs, &counts)?;

    let l2_error = |t: f64, u: &[f64]| {
        problem.reference.as_ref().map(|r| {
            let diff: Vec<f64> = u.iter().enumerate().map(|(d, v)| v - r(t, grid.coords(d))).collect();
            grid.l2_norm(&diff)
        })
    };
    let mut times = vec![0.0];
    let mut errors: Vec<Option<f64>> = vec![l2_error(0.0, state.solution())];
    let mut norms = vec![grid.l2_norm(state.solution())];
    let mut snapshots = Vec::new();
    let take_snapshot = |t: f64, h: f64, u: &[f64], snaps: &mut Vec<Snapshot>| {
        for &ts in &opts.snapshot_times {
            if (t - ts).abs() <= 0.5 * h && !snaps.iter().any(|s: &Snapshot| (s.t - t).abs() < 1e-15) {
                snaps.push(Snapshot { t, field: u.to_vec() });
            }
        }
    };
    take_snapshot(0.0, mesh.step(0), state.solution(), &mut snapshots);

    let mut factors: HashMap<u64, Arc<CondensedOperator>> = HashMap::new();
    let mut factorizations = 0;
    let mut max_lin: f64 = 0.0;
    let mut max_rec: Option<f64> = None;
    let mut step_seconds = Vec::with_capacity(mesh.steps());
    let mut f_stage = vec![0.0; n];
    let eps = problem.epsilon;
    for step in 0..mesh.steps() {
        let h = mesh.step(step);
        let clock = Instant::now();
        let rep = stepper.step(&mut state, h, |sys, _guess| {
            let op = match factors.get(&h.to_bits()) {
                Some(op) => op.clone(),
                None => {
                    if factors.len() >= 4 {
                        factors.clear();
                    }
                    let op = Arc::new(assemble(sys, &lap, eps, band)?);
                    factorizations += 1;
                    factors.insert(h.to_bits(), op.clone());
                    op
                }
            };
            // b = f + εL c0 − s0, stage-major
            let c0 = sys.offset(0);
            let s0 = sys.mode_offset();
            let mut rhs = vec![0.0; s * n];
            for r in 0..s {
                match &problem.forcing {
                    Some(f) => f(sys.stage_times[r], &grid, &mut f_stage),
                    None => f_stage.fill(0.0),
                }
                let lc = lap.matvec(&c0[r * n..(r + 1) * n]);
                for d in 0..n {
                    rhs[d * s + r] = f_stage[d] + eps * lc[d] - s0[r * n + d];
                }
            }
            let mut x = op.lu.solve(&rhs);
            let mut res = residual(&op.matrix, &x, &rhs);
            // one step of iterative refinement
            if res.0 > opts.linear_tol * res.1 {
                let dx = op.lu.solve(&res.2);
                for (a, b) in x.iter_mut().zip(dx) {
                    *a += b;
                }
                res = residual(&op.matrix, &x, &rhs);
            }
            let rel = if res.1 > 0.0 { res.0 / res.1 } else { res.0 };
            if !(rel <= opts.linear_tol) {
                return Err(Error::Accuracy {
                    message: format!("condensed linear solve: relative residual {rel:e} after 2 iterations"),
                    achieved: rel,
                });
            }
            max_lin = max_lin.max(rel);
            let mut k = vec![0.0; s * n];
            for d in 0..n {
                for r in 0..s {
                    k[r * n + d] = x[d * s + r];
                }
            }
            Ok((
                k,
                NewtonReport {
                    iterations: 1,
                    residual_norm: res.0,
                    history: vec![res.0],
                    halvings: 0,
                },
            ))
        })?;
        step_seconds.push(clock.elapsed().as_secs_f64());
        if let Some(r) = rep.recurrence_residual {
            max_rec = Some(max_rec.map_or(r, |m: f64| m.max(r)));
        }
        state.t = mesh.nodes[step + 1];
        let t = state.t;
        times.push(t);
        errors.push(l2_error(t, state.solution()));
        norms.push(grid.l2_norm(state.solution()));
        take_snapshot(t, h, state.solution(), &mut snapshots);
    }
    let l2_errors: Option<Vec<f64>> = errors.into_iter().collect();
    let error = l2_errors.as_ref().map(|e| e.iter().cloned().fold(0.0, f64::max));
    Ok(DopdeSolution {
        times,
        l2_errors,
        error,
        l2_norms: norms,
        final_field: state.solution().to_vec(),
        snapshots,
        unknowns: s * n,
        modes_per_node: counts.iter().sum(),
        max_linear_residual: max_lin,
        max_recurrence_residual: max_rec,
        step_seconds,
        factorizations,
    })
}

/// (‖b − Ax‖∞, ‖b‖∞ + ‖A‖∞‖x‖∞ estimate, b − Ax).
fn residual(a: &BandedMatrix, x: &[f64], b: &[f64]) -> (f64, f64, Vec<f64>) {
    let ax = a.matvec(x);
    let abs_ax = a.abs_matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = b.iter().zip(&abs_ax).fold(0.0f64, |m, (b, a)| m.max(b.abs() + a));
    (rn, scale, r)
}
