//! The five subcommands.

use std::path::Path;
use std::sync::Arc;

use dokc::expsum::cache::to_json;
use dokc::expsum::{compress_cached, CompressedKernel, KernelCache};
use dokc::kernels::DOKernel;
use dokc::solvers::{
    asymptotic_rate, dofde_kernels, ode_scenario, pde_kernels, pde_scenario, rate_table, solve_dofde, solve_dopde,
    DOFDEProblem, DOPDEProblem, PdeOptions, PreparedPdeKernels, ScenarioName, WeightSource,
};
use dokc::timestepping::{graded_mesh, NewtonOptions, Scheme, TimeMesh};
use dokc::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{num, write_atomic, write_csv, write_metadata};

/// Default AAA tolerance of the solve and converge commands.
const SOLVE_TOL: f64 = 1e-20;

/// Points of the log grid on which K̃ must decrease.
const MONOTONE_POINTS: usize = 200;

#[derive(Serialize)]
struct KernelSummary {
    kernel: String,
    tolerance: f64,
    m: usize,
    l1_error: f64,
    l1_error_unrounded: f64,
}

impl From<&CompressedKernel> for KernelSummary {
    fn from(k: &CompressedKernel) -> Self {
        KernelSummary {
            kernel: k.kernel_id.clone(),
            tolerance: k.tolerance,
            m: k.m(),
            l1_error: k.l1_error,
            l1_error_unrounded: k.l1_error_unrounded,
        }
    }
}

fn file_stem(id: &str, tol: f64) -> String {
    let clean: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect();
    format!("{}_tol{tol:e}", clean.trim_matches('_'))
}

fn kernels_of(c: &RunConfig) -> Result<Vec<DOKernel>> {
    let w = Arc::new(c.weight_spec()?);
    match &c.kernels {
        None => DOKernel::all(&w),
        Some(idx) => idx.iter().map(|&i| DOKernel::new(w.clone(), i)).collect(),
    }
}

/// Compress every requested kernel at every tolerance.
fn sweep(c: &RunConfig, default_tol: &[f64]) -> Result<Vec<(CompressedKernel, bool)>> {
    let cache = KernelCache::new(c.cache_dir())?;
    let tols = c.tol.as_ref().map_or_else(|| default_tol.to_vec(), |t| t.to_vec());
    let kernels = kernels_of(c)?;
    let mut out = Vec::new();
    for tol in tols {
        let opts = c.compress_options(tol)?;
        for k in &kernels {
            let r = compress_cached(k, &opts, Some(&cache))?;
            println!(
                "{} tol={tol:e} m={} l1_error={:e} ({})",
                r.kernel.kernel_id,
                r.kernel.m(),
                r.kernel.l1_error,
                if r.hit { "cache hit" } else { "computed" }
            );
            out.push((r.kernel, r.hit));
        }
    }
    Ok(out)
}

pub fn compress(c: &RunConfig) -> Result<()> {
    let out = c.out_dir();
    let ks = sweep(c, &[SOLVE_TOL])?;
    let mut rows = Vec::new();
    for (k, _) in &ks {
        write_atomic(&out.join("kernels").join(format!("{}.json", file_stem(&k.kernel_id, k.tolerance))), to_json(k).as_bytes())?;
        rows.push(vec![
            k.kernel_id.clone(),
            num(k.tolerance),
            k.m().to_string(),
            num(k.l1_error),
            num(k.l1_error_unrounded),
        ]);
    }
    write_csv(&out.join("compress.csv"), &["kernel", "tolerance", "m", "l1_error", "l1_error_unrounded"], &rows)?;
    let summary: Vec<KernelSummary> = ks.iter().map(|(k, _)| k.into()).collect();
    write_metadata(&out, "compress", c, json!({ "kernels": summary }))
}

pub fn validate_kernel(c: &RunConfig) -> Result<()> {
    let out = c.out_dir();
    let ks = sweep(c, &[1e-6, 1e-13, 1e-20])?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (k, _) in &ks {
        let positive = k.validate().is_ok();
        let decreasing = k.m() == 0 || k.strictly_decreasing(MONOTONE_POINTS);
        if !(positive && decreasing) {
            failures.push(format!("{} at {:e}", k.kernel_id, k.tolerance));
        }
        rows.push(vec![
            k.kernel_id.clone(),
            num(k.tolerance),
            k.m().to_string(),
            num(k.l1_error),
            num(k.l1_error_unrounded),
            positive.to_string(),
            decreasing.to_string(),
        ]);
    }
    write_csv(
        &out.join("validate.csv"),
        &["kernel", "tolerance", "m", "l1_error", "l1_error_unrounded", "positive", "decreasing"],
        &rows,
    )?;
    let summary: Vec<KernelSummary> = ks.iter().map(|(k, _)| k.into()).collect();
    write_metadata(&out, "validate-kernel", c, json!({ "kernels": summary, "failures": failures }))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::validation(format!("invariants violated by {}", failures.join(", "))))
    }
}

fn newton(c: &RunConfig) -> NewtonOptions {
    let mut o = NewtonOptions::default();
    if let Some(t) = c.newton_tol {
        o.abs_tol = t;
    }
    o
}

fn ode_problem(c: &RunConfig, name: ScenarioName) -> Result<DOFDEProblem> {
    let mut p = ode_scenario(name)?;
    if let Some(t) = c.t_final {
        p.t_final = t;
    }
    Ok(p)
}

fn ode_kernels(c: &RunConfig, p: &DOFDEProblem) -> Result<Vec<CompressedKernel>> {
    let cache = KernelCache::new(c.cache_dir())?;
    let opts = c.compress_options(c.tolerance(SOLVE_TOL)?)?;
    match &c.weight {
        None => dofde_kernels(p, &opts, Some(&cache)),
        Some(_) => Err(Error::config("ODE scenarios fix their weight; drop `weight`")),
    }
}

pub fn solve_ode(c: &RunConfig) -> Result<()> {
    let name = c.require_scenario()?;
    if !name.is_ode() {
        return Err(Error::config(format!("{name} is a PDE scenario; use solve-pde")));
    }
    let p = ode_problem(c, name)?;
    let scheme = c.scheme(Scheme::RadauIia2)?;
    let n = c.n(100)?;
    let gamma = c.gamma()?;
    let ks = ode_kernels(c, &p)?;
    let mesh = graded_mesh(n, gamma, p.t_final)?;
    let sol = solve_dofde(&p, &ks, scheme, &mesh, &newton(c))?;
    let out = c.out_dir();
    let rows: Vec<Vec<String>> = sol
        .times
        .iter()
        .zip(&sol.values)
        .enumerate()
        .map(|(i, (t, u))| {
            let mut r = vec![num(*t), num(*u)];
            if let (Some(e), Some(f)) = (&sol.errors, &p.reference) {
                r.extend([num(f(*t)), num(e[i])]);
            }
            r
        })
        .collect();
    let header: &[&str] = if sol.errors.is_some() { &["t", "u", "u_exact", "error"] } else { &["t", "u"] };
    write_csv(&out.join("trajectory.csv"), header, &rows)?;
    let last = *sol.values.last().unwrap_or(&f64::NAN);
    println!(
        "{name} {scheme} N={n} γ={gamma}: u({}) = {} linf_error = {}",
        p.t_final,
        num(last),
        sol.linf_error.map_or("n/a".into(), |e| format!("{e:e}"))
    );
    let summary: Vec<KernelSummary> = ks.iter().map(Into::into).collect();
    write_metadata(
        &out,
        "solve-ode",
        c,
        json!({
            "scheme": scheme.name(),
            "n": n,
            "gamma": gamma,
            "final_value": last,
            "linf_error": sol.linf_error,
            "max_newton_iterations": sol.newton_iterations.iter().max(),
            "unknowns_per_step": sol.unknowns,
            "modes": sol.modes,
            "kernels": summary,
        }),
    )
}

fn pde_problem(c: &RunConfig, name: ScenarioName) -> Result<DOPDEProblem> {
    if name.is_ode() {
        return Err(Error::config(format!("{name} is an ODE scenario; use solve-ode")));
    }
    pde_scenario(name, &c.pde_params())
}

fn prepare_pde_kernels(c: &RunConfig, p: &DOPDEProblem) -> Result<PreparedPdeKernels> {
    let cache = KernelCache::new(c.cache_dir())?;
    let opts = c.compress_options(c.tolerance(SOLVE_TOL)?)?;
    let m = match (&p.weight, c.m) {
        (WeightSource::SpaceDependent { .. }, None) => Some(20),
        (_, m) => m,
    };
    pde_kernels(p, &opts, m, Some(&cache))
}

fn write_field(path: &Path, p: &DOPDEProblem, field: &[f64], column: &str) -> Result<()> {
    let rows: Vec<Vec<String>> = field
        .iter()
        .enumerate()
        .map(|(d, v)| {
            let [x, y] = p.grid.coords(d);
            vec![num(x), num(y), num(*v)]
        })
        .collect();
    write_csv(path, &["x", "y", column], &rows)
}

pub fn solve_pde(c: &RunConfig) -> Result<()> {
    let name = c.require_scenario()?;
    let p = pde_problem(c, name)?;
    let scheme = c.scheme(Scheme::RadauIia2)?;
    let n = c.n((p.t_final / 0.01).round() as usize)?;
    let gamma = c.gamma()?;
    let space_dependent = matches!(p.weight, WeightSource::SpaceDependent { .. });
    let snapshot_times = c.snapshot_times.clone().unwrap_or_else(|| {
        if space_dependent {
            (1..=p.t_final.floor() as usize).map(|t| t as f64).collect()
        } else {
            vec![p.t_final]
        }
    });
    let prepared = prepare_pde_kernels(c, &p)?;
    let mesh = if gamma == 1.0 { TimeMesh::uniform(n, p.t_final)? } else { graded_mesh(n, gamma, p.t_final)? };
    let opts = PdeOptions {
        check_recurrence: c.check_recurrence.unwrap_or(space_dependent),
        snapshot_times,
        ..PdeOptions::default()
    };
    let sol = solve_dopde(&p, &prepared.kernels, scheme, &mesh, &opts)?;
    let out = c.out_dir();
    let mut files = Vec::new();
    for s in &sol.snapshots {
        let rel = format!("snapshots/u_t{:.6}.csv", s.t);
        write_field(&out.join(&rel), &p, &s.field, "u")?;
        files.push(rel);
    }
    if let Some(t) = &prepared.table {
        let eta: Vec<f64> = t.node_index.iter().map(|&i| t.values[i]).collect();
        write_field(&out.join("eta.csv"), &p, &eta, "eta")?;
    }
    let rows: Vec<Vec<String>> = sol
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut r = vec![num(*t), num(sol.l2_norms[i])];
            if let Some(e) = &sol.l2_errors {
                r.push(num(e[i]));
            }
            r
        })
        .collect();
    let header: &[&str] = if sol.l2_errors.is_some() { &["t", "l2_norm", "l2_error"] } else { &["t", "l2_norm"] };
    write_csv(&out.join("norms.csv"), header, &rows)?;
    println!(
        "{name} {scheme} {}² N={n}: unknowns = {}, final L2 norm = {:e}, error = {}, recurrence residual = {}",
        p.grid.cells,
        sol.unknowns,
        sol.l2_norms.last().copied().unwrap_or(f64::NAN),
        sol.error.map_or("n/a".into(), |e| format!("{e:e}")),
        sol.max_recurrence_residual.map_or("n/a".into(), |r| format!("{r:e}"))
    );
    let summary: Vec<Vec<KernelSummary>> =
        prepared.compressed.iter().map(|row| row.iter().map(Into::into).collect()).collect();
    write_metadata(
        &out,
        "solve-pde",
        c,
        json!({
            "scheme": scheme.name(),
            "n": n,
            "gamma": gamma,
            "grid_cells": p.grid.cells,
            "ndof": p.grid.ndof(),
            "epsilon": p.epsilon,
            "t_final": p.t_final,
            "seed": c.pde_params().seed,
            "unknowns_per_step": sol.unknowns,
            "modes_per_node": sol.modes_per_node,
            "l2_error": sol.error,
            "max_linear_residual": sol.max_linear_residual,
            "max_recurrence_residual": sol.max_recurrence_residual,
            "factorizations": sol.factorizations,
            "snapshots": files,
            "eta_values": prepared.table.as_ref().map(|t| t.values.clone()),
            "kernels": summary,
        }),
    )
}

pub fn converge(c: &RunConfig) -> Result<()> {
    let name = c.require_scenario()?;
    let ns = c.n_list(&[10, 20, 40, 80, 160, 320])?;
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("N list must increase"));
    }
    let gammas = c.gammas()?;
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    enum Target {
        Ode(DOFDEProblem, Vec<CompressedKernel>),
        Pde(Box<DOPDEProblem>, PreparedPdeKernels),
    }
    let (target, default_schemes) = if name.is_ode() {
        let p = ode_problem(c, name)?;
        let ks = ode_kernels(c, &p)?;
        (Target::Ode(p, ks), vec![Scheme::RadauIia1, Scheme::RadauIia2, Scheme::RadauIia3])
    } else {
        let p = pde_problem(c, name)?;
        if p.reference.is_none() {
            return Err(Error::config(format!("{name} has no reference solution to converge against")));
        }
        let k = prepare_pde_kernels(c, &p)?;
        (Target::Pde(Box::new(p), k), vec![Scheme::ImplicitEuler, Scheme::Sdirk2, Scheme::RadauIia2])
    };
    let schemes = c.schemes(&default_schemes)?;
    let mut kernel_summary = Vec::new();
    match &target {
        Target::Ode(_, ks) => kernel_summary.extend(ks.iter().map(KernelSummary::from)),
        Target::Pde(_, k) => kernel_summary.extend(k.compressed.iter().flatten().map(KernelSummary::from)),
    }
    for &scheme in &schemes {
        for &gamma in &gammas {
            let mut runs = Vec::new();
            for &n in &ns {
                let (h, err) = match &target {
                    Target::Ode(p, ks) => {
                        let mesh = graded_mesh(n, gamma, p.t_final)?;
                        let sol = solve_dofde(p, ks, scheme, &mesh, &newton(c))?;
                        (mesh.h_max(), sol.linf_error)
                    }
                    Target::Pde(p, k) => {
                        let mesh = graded_mesh(n, gamma, p.t_final)?;
                        let sol = solve_dopde(p, &k.kernels, scheme, &mesh, &PdeOptions::default())?;
                        (mesh.h_max(), sol.error)
                    }
                };
                let err = err.ok_or_else(|| Error::config("scenario has no reference solution"))?;
                runs.push((n, h, err));
            }
            let table = rate_table(&runs);
            for r in &table {
                rows.push(vec![
                    scheme.name().to_string(),
                    num(gamma),
                    r.n.to_string(),
                    num(r.h),
                    num(r.error),
                    r.rate.map(num).unwrap_or_default(),
                    r.plateau.to_string(),
                ]);
            }
            let rate = asymptotic_rate(&table);
            println!(
                "{name} {scheme} γ={gamma}: asymptotic rate {}",
                rate.map_or("n/a".into(), |q| format!("{q:.3}"))
            );
            rates.push(json!({ "scheme": scheme.name(), "gamma": gamma, "asymptotic_rate": rate }));
        }
    }
    let out = c.out_dir();
    write_csv(
        &out.join("converge.csv"),
        &["scheme", "gamma", "N", "h", "error", "observed_rate", "plateau"],
        &rows,
    )?;
    write_metadata(&out, "converge", c, json!({ "rates": rates, "kernels": kernel_summary }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem("bump(0.5,0.4,0,1)/K1", 1e-20), "bump_0.5_0.4_0_1__K1_tol1e-20");
    }
}
