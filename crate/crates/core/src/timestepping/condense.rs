//! Static condensation of the mode system onto the stage vector K of the
//! highest derivative.
//!
//! With H = hA, the stage values are
//! Y⁽ⁱ⁾ = Σ_{l=0}^{αmax−i} H^l 1 v⁽ⁱ⁺ˡ⁾ + H^{αmax−i+1} K, the mode stages are
//! Z_{ij} = v_{ij} B_{ij} 1 + w_{ij} H B_{ij} Y⁽ⁱ⁾ with B_{ij} = (I + λ_{ij} H)^{-1},
//! and the mode sum is affine in K. Only K enters the implicit solve; all
//! other stage derivatives follow by linear updates.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::newton::NewtonReport;
use super::tableau::ButcherTableau;
use crate::error::{Error, Result};
use crate::expsum::{CompressedKernel, ExpTerm};

/// Exponential sums of K_1 … K_αmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeFamily {
    pub kernels: Vec<Vec<ExpTerm>>,
}

impl ModeFamily {
    pub fn new(kernels: Vec<Vec<ExpTerm>>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::config("mode family needs αmax ≥ 1 kernels"));
        }
        for (i, k) in kernels.iter().enumerate() {
            for t in k {
                if !(t.lambda >= 0.0 && t.lambda.is_finite() && t.w.is_finite()) {
                    return Err(Error::config(format!(
                        "kernel {} has invalid term w = {:e}, λ = {:e}",
                        i + 1,
                        t.w,
                        t.lambda
                    )));
                }
            }
        }
        Ok(ModeFamily { kernels })
    }

    pub fn from_compressed(ks: &[CompressedKernel]) -> Result<Self> {
        Self::new(ks.iter().map(|k| k.terms.clone()).collect())
    }

    /// Family without modes.
    pub fn empty(amax: usize) -> Self {
        ModeFamily {
            kernels: vec![Vec::new(); amax],
        }
    }

    pub fn amax(&self) -> usize {
        self.kernels.len()
    }

    /// m_i per kernel.
    pub fn counts(&self) -> Vec<usize> {
        self.kernels.iter().map(Vec::len).collect()
    }

    pub fn total_modes(&self) -> usize {
        self.kernels.iter().map(Vec::len).sum()
    }
}

/// Per-mode operators for one (h, λ).
#[derive(Clone, Debug)]
pub struct ModeOps {
    pub w: f64,
    pub lambda: f64,
    /// B = (I + λH)^{-1}.
    pub b: DMatrix<f64>,
    /// B 1.
    pub b1: Vec<f64>,
    /// h bᵀ B.
    pub beta: Vec<f64>,
    /// 1 − λ h bᵀ B 1.
    pub decay: f64,
}

/// Operators of one mode family.
#[derive(Clone, Debug)]
pub struct ClassOps {
    /// M_i = Σ_j w_{ij} H B_{ij}.
    pub gain: Vec<DMatrix<f64>>,
    /// G = Σ_i M_i H^{αmax−i+1}; the mode sum is s₀ + G K.
    pub g: DMatrix<f64>,
    pub modes: Vec<Vec<ModeOps>>,
}

/// Condensation operators for a step size h.
#[derive(Clone, Debug)]
pub struct CondensationOperators {
    pub h: f64,
    pub stages: usize,
    pub amax: usize,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    /// H^p for p = 0..=αmax+1.
    pub hpow: Vec<DMatrix<f64>>,
    /// H^l 1 for l = 0..=αmax.
    pub h1: Vec<DVector<f64>>,
    pub classes: Vec<ClassOps>,
}

impl CondensationOperators {
    /// P_i = H^{αmax−i+1}, the K-coefficient of Y⁽ⁱ⁾.
    pub fn p(&self, i: usize) -> &DMatrix<f64> {
        &self.hpow[self.amax - i + 1]
    }
}

/// B = (I + λhA)^{-1}.
pub fn resolvent(a: &DMatrix<f64>, h: f64, lambda: f64) -> Result<DMatrix<f64>> {
    let s = a.nrows();
    if lambda == 0.0 {
        return Ok(DMatrix::identity(s, s));
    }
    let m = DMatrix::identity(s, s) + a * (lambda * h);
    m.try_inverse()
        .ok_or_else(|| Error::numerical(format!("I + λhA is singular for λ = {lambda:e}, h = {h:e}")))
}

/// Operators for `tab`, step `h` and one family per node class.
pub fn condensation_operators(
    tab: &ButcherTableau,
    h: f64,
    families: &[ModeFamily],
) -> Result<CondensationOperators> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::config(format!("step size h = {h:e} must be positive")));
    }
    let first = families
        .first()
        .ok_or_else(|| Error::config("at least one mode family is required"))?;
    let amax = first.amax();
    let counts = first.counts();
    if families.iter().any(|f| f.counts() != counts) {
        return Err(Error::config("mode families must share the term count per kernel"));
    }
    let s = tab.stages();
    let hm = &tab.a * h;
    let mut hpow = vec![DMatrix::identity(s, s)];
    for p in 1..=amax + 1 {
        let next = &hpow[p - 1] * &hm;
        hpow.push(next);
    }
    let ones = DVector::from_element(s, 1.0);
    let h1: Vec<DVector<f64>> = (0..=amax).map(|l| &hpow[l] * &ones).collect();
    let hb = &tab.b * h;
    let mut by_lambda: HashMap<u64, (DMatrix<f64>, Vec<f64>, Vec<f64>, f64)> = HashMap::new();
    let mut classes = Vec::with_capacity(families.len());
    for fam in families {
        let mut gain = Vec::with_capacity(amax);
        let mut modes = Vec::with_capacity(amax);
        let mut g = DMatrix::zeros(s, s);
        for (i0, terms) in fam.kernels.iter().enumerate() {
            let mut m_i = DMatrix::zeros(s, s);
            let mut ops = Vec::with_capacity(terms.len());
            for t in terms {
                let entry = match by_lambda.get(&t.lambda.to_bits()) {
                    Some(e) => e.clone(),
                    None => {
                        let b = resolvent(&tab.a, h, t.lambda)?;
                        let b1: Vec<f64> = (&b * &ones).iter().copied().collect();
                        let beta: Vec<f64> = (hb.transpose() * &b).iter().copied().collect();
                        // R(−λh); the last stage avoids cancellation for stiff modes.
                        let decay = if tab.stiffly_accurate {
                            b1[s - 1]
                        } else {
                            1.0 - t.lambda * beta.iter().sum::<f64>()
                        };
                        let e = (b, b1, beta, decay);
                        by_lambda.insert(t.lambda.to_bits(), e.clone());
                        e
                    }
                };
                m_i += (&hm * &entry.0) * t.w;
                ops.push(ModeOps {
                    w: t.w,
                    lambda: t.lambda,
                    b: entry.0,
                    b1: entry.1,
                    beta: entry.2,
                    decay: entry.3,
                });
            }
            g += &m_i * &hpow[amax - (i0 + 1) + 1];
            gain.push(m_i);
            modes.push(ops);
        }
        classes.push(ClassOps { gain, g, modes });
    }
    Ok(CondensationOperators {
        h,
        stages: s,
        amax,
        b: tab.b.clone(),
        c: tab.c.clone(),
        hpow,
        h1,
        classes,
    })
}

/// Solution, derivatives and fractional modes at one time level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSystemState {
    pub t: f64,
    pub step: usize,
    pub ndof: usize,
    /// v⁽⁰⁾ … v⁽αmax⁾, each of length ndof.
    pub derivs: Vec<Vec<f64>>,
    /// Modes of K_i at index i−1, laid out as `j * ndof + d`.
    pub modes: Vec<Vec<f64>>,
}

impl ModeSystemState {
    /// State at t = 0 with zero modes.
    pub fn new(derivs: Vec<Vec<f64>>, counts: &[usize]) -> Result<Self> {
        let ndof = derivs.first().map_or(0, Vec::len);
        if ndof == 0 {
            return Err(Error::config("state needs at least one degree of freedom"));
        }
        if derivs.len() != counts.len() + 1 {
            return Err(Error::config(format!(
                "expected {} derivative fields, got {}",
                counts.len() + 1,
                derivs.len()
            )));
        }
        if derivs.iter().any(|v| v.len() != ndof) {
            return Err(Error::config("derivative fields differ in length"));
        }
        Ok(ModeSystemState {
            t: 0.0,
            step: 0,
            ndof,
            derivs,
            modes: counts.iter().map(|&m| vec![0.0; m * ndof]).collect(),
        })
    }

    pub fn amax(&self) -> usize {
        self.derivs.len() - 1
    }

    /// v⁽⁰⁾.
    pub fn solution(&self) -> &[f64] {
        &self.derivs[0]
    }

    /// Mode j of kernel i (1-based i, 0-based j).
    pub fn mode(&self, i: usize, j: usize) -> &[f64] {
        &self.modes[i - 1][j * self.ndof..(j + 1) * self.ndof]
    }

    /// Σ_{i,j} v_{ij}.
    pub fn mode_sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ndof];
        for m in &self.modes {
            for chunk in m.chunks(self.ndof) {
                for (o, v) in out.iter_mut().zip(chunk) {
                    *o += v;
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.derivs.iter().chain(&self.modes).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// y = (M ⊗ I) x on stage-major vectors of `ndof` entries per stage.
pub fn apply_stage_matrix(m: &DMatrix<f64>, x: &[f64], ndof: usize) -> Vec<f64> {
    let s = m.nrows();
    let mut y = vec![0.0; s * ndof];
    for k in 0..s {
        let yk = &mut y[k * ndof..(k + 1) * ndof];
        for l in 0..m.ncols() {
            let c = m[(k, l)];
            if c != 0.0 {
                for (a, b) in yk.iter_mut().zip(&x[l * ndof..(l + 1) * ndof]) {
                    *a += c * b;
                }
            }
        }
    }
    y
}

/// The affine structure of one condensed step. Stage-major vectors hold
/// `ndof` entries per stage.
pub struct CondensedSystem<'a> {
    pub ops: &'a CondensationOperators,
    pub state: &'a ModeSystemState,
    node_class: &'a [usize],
    /// t_n + c_k h.
    pub stage_times: Vec<f64>,
    /// c_i = Σ_l H^l 1 v⁽ⁱ⁺ˡ⁾ for i = 0..=αmax.
    offsets: Vec<Vec<f64>>,
    /// s₀, the mode sum at K = 0.
    mode_offset: Vec<f64>,
}

impl<'a> CondensedSystem<'a> {
    fn build(ops: &'a CondensationOperators, state: &'a ModeSystemState, node_class: &'a [usize]) -> Self {
        let (s, n, amax) = (ops.stages, state.ndof, ops.amax);
        let mut offsets = Vec::with_capacity(amax + 1);
        for i in 0..=amax {
            let mut c = vec![0.0; s * n];
            for l in 0..=amax - i {
                let v = &state.derivs[i + l];
                for k in 0..s {
                    let hk = ops.h1[l][k];
                    for (a, b) in c[k * n..(k + 1) * n].iter_mut().zip(v) {
                        *a += hk * b;
                    }
                }
            }
            offsets.push(c);
        }
        let mut mode_offset = vec![0.0; s * n];
        let single = node_class.is_empty() || ops.classes.len() == 1;
        for i0 in 0..amax {
            let m_i = ops.classes[0].modes[i0].len();
            let modes = &state.modes[i0];
            // Σ_j v_{ij} B_{ij} 1
            for j in 0..m_i {
                let vj = &modes[j * n..(j + 1) * n];
                if single {
                    let b1 = &ops.classes[0].modes[i0][j].b1;
                    for k in 0..s {
                        let bk = b1[k];
                        for (a, v) in mode_offset[k * n..(k + 1) * n].iter_mut().zip(vj) {
                            *a += bk * v;
                        }
                    }
                } else {
                    for (d, v) in vj.iter().enumerate() {
                        let b1 = &ops.classes[node_class[d]].modes[i0][j].b1;
                        for k in 0..s {
                            mode_offset[k * n + d] += b1[k] * v;
                        }
                    }
                }
            }
            // M_i c_i
            let c = &offsets[i0 + 1];
            if single {
                let add = apply_stage_matrix(&ops.classes[0].gain[i0], c, n);
                for (a, b) in mode_offset.iter_mut().zip(add) {
                    *a += b;
                }
            } else {
                for d in 0..n {
                    let g = &ops.classes[node_class[d]].gain[i0];
                    for k in 0..s {
                        let mut acc = 0.0;
                        for l in 0..s {
                            acc += g[(k, l)] * c[l * n + d];
                        }
                        mode_offset[k * n + d] += acc;
                    }
                }
            }
        }
        let stage_times = ops.c.iter().map(|c| state.t + c * ops.h).collect();
        CondensedSystem {
            ops,
            state,
            node_class,
            stage_times,
            offsets,
            mode_offset,
        }
    }

    pub fn stages(&self) -> usize {
        self.ops.stages
    }

    pub fn ndof(&self) -> usize {
        self.state.ndof
    }

    pub fn amax(&self) -> usize {
        self.ops.amax
    }

    /// Implicit unknown count s·ndof.
    pub fn unknowns(&self) -> usize {
        self.ops.stages * self.state.ndof
    }

    pub fn class_of(&self, d: usize) -> usize {
        if self.node_class.is_empty() {
            0
        } else {
            self.node_class[d]
        }
    }

    /// K-coefficient of Y⁽ⁱ⁾.
    pub fn p(&self, i: usize) -> &DMatrix<f64> {
        self.ops.p(i)
    }

    /// K-coefficient of the mode sum for a node class.
    pub fn g(&self, class: usize) -> &DMatrix<f64> {
        &self.ops.classes[class].g
    }

    /// Y⁽ⁱ⁾ at K = 0.
    pub fn offset(&self, i: usize) -> &[f64] {
        &self.offsets[i]
    }

    /// Mode sum at K = 0.
    pub fn mode_offset(&self) -> &[f64] {
        &self.mode_offset
    }

    /// Y⁽ⁱ⁾(K).
    pub fn stage_values(&self, i: usize, k: &[f64]) -> Vec<f64> {
        let mut y = apply_stage_matrix(self.p(i), k, self.ndof());
        for (a, b) in y.iter_mut().zip(&self.offsets[i]) {
            *a += b;
        }
        y
    }

    /// Σ_{i,j} Z_{ij}(K).
    pub fn mode_sum(&self, k: &[f64]) -> Vec<f64> {
        let (s, n) = (self.stages(), self.ndof());
        let mut out = self.mode_offset.clone();
        if self.node_class.is_empty() || self.ops.classes.len() == 1 {
            for (a, b) in out.iter_mut().zip(apply_stage_matrix(self.g(0), k, n)) {
                *a += b;
            }
        } else {
            for d in 0..n {
                let g = self.g(self.node_class[d]);
                for r in 0..s {
                    let mut acc = 0.0;
                    for l in 0..s {
                        acc += g[(r, l)] * k[l * n + d];
                    }
                    out[r * n + d] += acc;
                }
            }
        }
        out
    }

    /// k_{ij} = B(−λ v_{ij} 1 + w Y⁽ⁱ⁾) at node d.
    pub fn mode_stage_derivative(&self, i: usize, j: usize, d: usize, y_i: &[f64]) -> Vec<f64> {
        let (s, n) = (self.stages(), self.ndof());
        let op = &self.ops.classes[self.class_of(d)].modes[i - 1][j];
        let v = self.state.modes[i - 1][j * n + d];
        let rhs = DVector::from_fn(s, |k, _| -op.lambda * v + op.w * y_i[k * n + d]);
        (&op.b * rhs).iter().copied().collect()
    }

    /// Largest relative defect of k_{ij} + λ(v_{ij} 1 + H k_{ij}) − w Y⁽ⁱ⁾ over
    /// all modes, nodes and stages.
    pub fn mode_recurrence_residual(&self, k: &[f64]) -> f64 {
        let (s, n) = (self.stages(), self.ndof());
        let hm = &self.ops.hpow[1];
        let mut worst: f64 = 0.0;
        for i in 1..=self.amax() {
            let y = self.stage_values(i, k);
            for j in 0..self.state.modes[i - 1].len() / n {
                for d in 0..n {
                    let op = &self.ops.classes[self.class_of(d)].modes[i - 1][j];
                    let kij = self.mode_stage_derivative(i, j, d, &y);
                    let v = self.state.modes[i - 1][j * n + d];
                    for r in 0..s {
                        let hk: f64 = (0..s).map(|l| hm[(r, l)] * kij[l]).sum();
                        let wy = op.w * y[r * n + d];
                        let defect = kij[r] + op.lambda * (v + hk) - wy;
                        let scale = kij[r].abs() + op.lambda * (v.abs() + hk.abs()) + wy.abs();
                        if scale > 0.0 {
                            worst = worst.max(defect.abs() / scale);
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Diagnostics of one accepted step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub h: f64,
    pub unknowns: usize,
    pub solve: NewtonReport,
    /// Mode recurrence defect when requested.
    pub recurrence_residual: Option<f64>,
}

/// Advance `state` by one condensed step. `solve` receives the condensed
/// system and an initial guess and returns K.
pub fn condensed_step<F>(
    state: &mut ModeSystemState,
    ops: &CondensationOperators,
    node_class: &[usize],
    guess: Vec<f64>,
    check_recurrence: bool,
    solve: F,
) -> Result<(StepReport, Vec<f64>)>
where
    F: FnOnce(&CondensedSystem, Vec<f64>) -> Result<(Vec<f64>, NewtonReport)>,
{
    if state.amax() != ops.amax {
        return Err(Error::config(format!(
            "state has αmax = {}, operators have {}",
            state.amax(),
            ops.amax
        )));
    }
    if !node_class.is_empty() && node_class.len() != state.ndof {
        return Err(Error::config("node class map does not match the state size"));
    }
    let (s, n, amax, h) = (ops.stages, state.ndof, ops.amax, ops.h);
    let step_index = state.step;
    let (k, solve_rep, ys, recurrence) = {
        let sys = CondensedSystem::build(ops, state, node_class);
        let (k, rep) = solve(&sys, guess).map_err(|e| Error::Step {
            step: step_index + 1,
            time: state.t + h,
            reason: e.to_string(),
        })?;
        if k.len() != s * n {
            return Err(Error::numerical("stage solution has the wrong length"));
        }
        let ys: Vec<Vec<f64>> = (0..=amax).map(|i| sys.stage_values(i, &k)).collect();
        let rec = check_recurrence.then(|| sys.mode_recurrence_residual(&k));
        (k, rep, ys, rec)
    };
    let single = node_class.is_empty() || ops.classes.len() == 1;
    for i0 in 0..amax {
        let y = &ys[i0 + 1];
        let m_i = ops.classes[0].modes[i0].len();
        let modes = &mut state.modes[i0];
        for j in 0..m_i {
            let vj = &mut modes[j * n..(j + 1) * n];
            if single {
                let op = &ops.classes[0].modes[i0][j];
                for (d, v) in vj.iter_mut().enumerate() {
                    let mut by = 0.0;
                    for r in 0..s {
                        by += op.beta[r] * y[r * n + d];
                    }
                    *v = op.decay * *v + op.w * by;
                }
            } else {
                for (d, v) in vj.iter_mut().enumerate() {
                    let op = &ops.classes[node_class[d]].modes[i0][j];
                    let mut by = 0.0;
                    for r in 0..s {
                        by += op.beta[r] * y[r * n + d];
                    }
                    *v = op.decay * *v + op.w * by;
                }
            }
        }
    }
    for i in 0..=amax {
        let ki = if i < amax { &ys[i + 1] } else { &k };
        let v = &mut state.derivs[i];
        for r in 0..s {
            let hb = h * ops.b[r];
            for (a, b) in v.iter_mut().zip(&ki[r * n..(r + 1) * n]) {
                *a += hb * b;
            }
        }
    }
    state.t += h;
    state.step += 1;
    if !state.is_finite() {
        return Err(Error::Step {
            step: state.step,
            time: state.t,
            reason: "state is not finite".into(),
        });
    }
    Ok((
        StepReport {
            step: state.step,
            t: state.t,
            h,
            unknowns: s * n,
            solve: solve_rep,
            recurrence_residual: recurrence,
        },
        k,
    ))
}

/// Owns the tableau, mode families and an operator cache keyed by h.
pub struct Stepper {
    pub tableau: ButcherTableau,
    families: Vec<ModeFamily>,
    node_class: Vec<usize>,
    cache: HashMap<u64, Arc<CondensationOperators>>,
    last_k: Option<Vec<f64>>,
    pub check_recurrence: bool,
}

/// Operator cache entries kept before the cache is flushed.
const CACHE_LIMIT: usize = 64;

impl Stepper {
    /// `node_class` maps nodes to `families`; empty means one family for all.
    pub fn new(tableau: ButcherTableau, families: Vec<ModeFamily>, node_class: Vec<usize>) -> Result<Self> {
        if families.is_empty() {
            return Err(Error::config("at least one mode family is required"));
        }
        if let Some(&c) = node_class.iter().find(|&&c| c >= families.len()) {
            return Err(Error::config(format!("node class {c} has no mode family")));
        }
        let counts = families[0].counts();
        if families.iter().any(|f| f.counts() != counts) {
            return Err(Error::config("mode families must share the term count per kernel"));
        }
        Ok(Stepper {
            tableau,
            families,
            node_class,
            cache: HashMap::new(),
            last_k: None,
            check_recurrence: false,
        })
    }

    pub fn families(&self) -> &[ModeFamily] {
        &self.families
    }

    pub fn counts(&self) -> Vec<usize> {
        self.families[0].counts()
    }

    pub fn amax(&self) -> usize {
        self.families[0].amax()
    }

    /// Operators for step size h, computed once per distinct h.
    pub fn operators(&mut self, h: f64) -> Result<Arc<CondensationOperators>> {
        if let Some(o) = self.cache.get(&h.to_bits()) {
            return Ok(o.clone());
        }
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        let o = Arc::new(condensation_operators(&self.tableau, h, &self.families)?);
        self.cache.insert(h.to_bits(), o.clone());
        Ok(o)
    }

    pub fn cached_step_sizes(&self) -> usize {
        self.cache.len()
    }

    /// Advance by h with the previous stage solution as initial guess.
    pub fn step<F>(&mut self, state: &mut ModeSystemState, h: f64, solve: F) -> Result<StepReport>
    where
        F: FnOnce(&CondensedSystem, Vec<f64>) -> Result<(Vec<f64>, NewtonReport)>,
    {
        let ops = self.operators(h)?;
        let unknowns = ops.stages * state.ndof;
        let guess = match &self.last_k {
            Some(k) if k.len() == unknowns => k.clone(),
            _ => vec![0.0; unknowns],
        };
        let (rep, k) = condensed_step(state, &ops, &self.node_class, guess, self.check_recurrence, solve)?;
        self.last_k = Some(k);
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestepping::tableau::{make_tableau, Scheme};

    fn terms(v: &[(f64, f64)]) -> Vec<ExpTerm> {
        v.iter().map(|&(w, lambda)| ExpTerm { w, lambda }).collect()
    }

    #[test]
    fn zero_rate_resolvent_is_identity() {
        let t = make_tableau(Scheme::RadauIia3);
        assert_eq!(resolvent(&t.a, 0.1, 0.0).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn implicit_euler_resolvent() {
        let t = make_tableau(Scheme::ImplicitEuler);
        assert_eq!(resolvent(&t.a, 1.0, 1.0).unwrap()[(0, 0)], 0.5);
    }

    #[test]
    fn resolvent_residual() {
        let t = make_tableau(Scheme::RadauIia2);
        for (h, lam) in [(0.013, 7.0), (0.5, 1e3), (1e-3, 2.5e5), (0.1, 0.37)] {
            let b = resolvent(&t.a, h, lam).unwrap();
            let m = DMatrix::identity(2, 2) + &t.a * (lam * h);
            let r = (&b * &m - DMatrix::identity(2, 2)).amax();
            assert!(r <= 1e-13, "h={h} λ={lam}: {r:e}");
        }
    }

    #[test]
    fn explicit_forcing_reduces_to_backward_euler_chain() {
        // F = K − g(t) without modes
        let tab = make_tableau(Scheme::ImplicitEuler);
        let fam = ModeFamily::empty(2);
        let ops = condensation_operators(&tab, 0.1, std::slice::from_ref(&fam)).unwrap();
        let mut st = ModeSystemState::new(vec![vec![1.0], vec![2.0], vec![3.0]], &fam.counts()).unwrap();
        let g = |t: f64| t * t;
        condensed_step(&mut st, &ops, &[], vec![0.0], false, |sys, _| {
            Ok((vec![g(sys.stage_times[0])], NewtonReport::default()))
        })
        .unwrap();
        let h = 0.1;
        let v2 = 3.0 + h * g(h);
        let v1 = 2.0 + h * v2;
        let v0 = 1.0 + h * v1;
        assert!((st.derivs[2][0] - v2).abs() < 1e-15);
        assert!((st.derivs[1][0] - v1).abs() < 1e-15);
        assert!((st.derivs[0][0] - v0).abs() < 1e-15);
    }

    #[test]
    fn single_stage_single_mode_by_hand() {
        // αmax = 1, s = 1, F = S − a Y⁽⁰⁾ − g
        let (h, lam, w, a, g) = (0.2, 3.0, 0.7, -1.3, 0.4);
        let (v0, v1, vm) = (0.5, -0.25, 0.125);
        let tab = make_tableau(Scheme::ImplicitEuler);
        let fam = ModeFamily::new(vec![terms(&[(w, lam)])]).unwrap();
        let ops = condensation_operators(&tab, h, std::slice::from_ref(&fam)).unwrap();
        let mut st = ModeSystemState::new(vec![vec![v0], vec![v1]], &fam.counts()).unwrap();
        st.modes[0][0] = vm;
        condensed_step(&mut st, &ops, &[], vec![0.0], false, |sys, _| {
            // linear in K: (G − a P₀) K = g + a c₀ − s₀
            let lhs = sys.g(0)[(0, 0)] - a * sys.p(0)[(0, 0)];
            let rhs = g + a * sys.offset(0)[0] - sys.mode_offset()[0];
            Ok((vec![rhs / lhs], NewtonReport::default()))
        })
        .unwrap();
        let q = 1.0 + lam * h;
        let y1 = (g + a * v0 - vm / q) / (w * h / q - a * h);
        let e0 = v0 + h * y1;
        let em = vm / q + w * h * y1 / q;
        assert!((st.derivs[1][0] - y1).abs() < 1e-14 * y1.abs().max(1.0));
        assert!((st.derivs[0][0] - e0).abs() < 1e-14);
        assert!((st.modes[0][0] - em).abs() < 1e-14);
    }

    #[test]
    fn stiff_modes_stay_bounded() {
        let tab = make_tableau(Scheme::RadauIia3);
        let fam = ModeFamily::new(vec![terms(&[(1e6, 1e12), (3e7, 5e13)])]).unwrap();
        let mut stp = Stepper::new(tab, vec![fam.clone()], vec![]).unwrap();
        let mut st = ModeSystemState::new(vec![vec![1.0], vec![0.0]], &fam.counts()).unwrap();
        st.modes[0][0] = 1.0;
        st.modes[0][1] = -2.0;
        for _ in 0..5 {
            stp.step(&mut st, 0.01, |sys, _| {
                // K chosen so that Y⁽¹⁾ = 1 in every stage
                let p = sys.p(1);
                let rhs = DVector::from_fn(3, |k, _| 1.0 - sys.offset(1)[k]);
                let k = p.clone().lu().solve(&rhs).unwrap();
                Ok((k.iter().copied().collect(), NewtonReport::default()))
            })
            .unwrap();
        }
        assert!(st.is_finite());
        // modes relax to w/λ·Y⁽¹⁾
        assert!((st.modes[0][0] - 1e-6).abs() < 1e-12);
        assert!((st.modes[0][1] - 6e-7).abs() < 1e-12);
        assert_eq!(stp.cached_step_sizes(), 1);
    }
}
