//! Condensed steps against a dense solve of the full, uncondensed stage
//! system for a linear right-hand side f(t, u) = L u + g(t).

use dokc::expsum::ExpTerm;
use dokc::timestepping::{condensation_operators, condensed_step, ModeFamily, ModeSystemState, NewtonReport, Scheme};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    scheme: Scheme,
    h: f64,
    t: f64,
    l: DMatrix<f64>,
    family: ModeFamily,
    state: ModeSystemState,
}

fn forcing(t: f64, d: usize) -> f64 {
    (t + d as f64).sin() + 0.5 * t * t
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let scheme = Scheme::ALL[rng.gen_range(0..Scheme::ALL.len())];
    let amax = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=3);
    let kernels = (0..amax)
        .map(|_| {
            (0..rng.gen_range(0..=5))
                .map(|_| {
                    let lambda = match rng.gen_range(0..4) {
                        0 => 0.0,
                        1 => rng.gen_range(0.0..1e6),
                        _ => 10f64.powf(rng.gen_range(-3.0..6.0)),
                    };
                    ExpTerm {
                        w: 10f64.powf(rng.gen_range(-3.0..1.0)),
                        lambda,
                    }
                })
                .collect()
        })
        .collect();
    let family = ModeFamily::new(kernels).unwrap();
    let derivs = (0..=amax).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut state = ModeSystemState::new(derivs, &family.counts()).unwrap();
    for m in &mut state.modes {
        for v in m.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let t = rng.gen_range(0.0..2.0);
    state.t = t;
    Instance {
        scheme,
        h: 10f64.powf(rng.gen_range(-3.0..0.0)),
        t,
        l: DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0)),
        family,
        state,
    }
}

/// Block (M ⊗ I_n) added into `a` at (row, col), stage-major.
fn add_kron(a: &mut DMatrix<f64>, row: usize, col: usize, m: &DMatrix<f64>, n: usize, scale: f64) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            for d in 0..n {
                a[(row + r * n + d, col + c * n + d)] += scale * m[(r, c)];
            }
        }
    }
}

/// State after one step from the full stage system in the unknowns
/// K⁽⁰⁾ … K⁽αmax⁾ and every mode stage derivative k_{ij}.
fn brute_force(inst: &Instance) -> ModeSystemState {
    let tab = inst.scheme.tableau();
    let (s, n, h) = (tab.stages(), inst.state.ndof, inst.h);
    let amax = inst.family.amax();
    let sn = s * n;
    let ha = &tab.a * h;
    let id = DMatrix::<f64>::identity(s, s);
    let modes: Vec<(usize, usize, ExpTerm)> = inst
        .family
        .kernels
        .iter()
        .enumerate()
        .flat_map(|(i0, k)| k.iter().enumerate().map(move |(j, t)| (i0 + 1, j, *t)))
        .collect();
    let size = (amax + 1 + modes.len()) * sn;
    let deriv_col = |i: usize| i * sn;
    let mode_col = |q: usize| (amax + 1 + q) * sn;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    let v = &inst.state.derivs;
    // K⁽ⁱ⁾ = Y⁽ⁱ⁺¹⁾ = v⁽ⁱ⁺¹⁾ + hA K⁽ⁱ⁺¹⁾
    for i in 0..amax {
        let row = i * sn;
        add_kron(&mut a, row, deriv_col(i), &id, n, 1.0);
        add_kron(&mut a, row, deriv_col(i + 1), &ha, n, -1.0);
        for r in 0..s {
            for d in 0..n {
                rhs[row + r * n + d] = v[i + 1][d];
            }
        }
    }
    // k + λ(v_{ij} + hA k) = w (v⁽ⁱ⁾ + hA K⁽ⁱ⁾)
    for (q, &(i, j, term)) in modes.iter().enumerate() {
        let row = (amax + q) * sn;
        add_kron(&mut a, row, mode_col(q), &id, n, 1.0);
        add_kron(&mut a, row, mode_col(q), &ha, n, term.lambda);
        add_kron(&mut a, row, deriv_col(i), &ha, n, -term.w);
        let vm = inst.state.mode(i, j);
        for r in 0..s {
            for d in 0..n {
                rhs[row + r * n + d] = -term.lambda * vm[d] + term.w * v[i][d];
            }
        }
    }
    // Σ (v_{ij} + hA k_{ij}) = L (v⁽⁰⁾ + hA K⁽⁰⁾) + g
    let row = (amax + modes.len()) * sn;
    for q in 0..modes.len() {
        add_kron(&mut a, row, mode_col(q), &ha, n, 1.0);
    }
    for r in 0..s {
        for c in 0..s {
            for d in 0..n {
                for e in 0..n {
                    a[(row + r * n + d, deriv_col(0) + c * n + e)] -= ha[(r, c)] * inst.l[(d, e)];
                }
            }
        }
    }
    let mode_sum = inst.state.mode_sum();
    for r in 0..s {
        let t = inst.t + tab.c[r] * h;
        for d in 0..n {
            let lv: f64 = (0..n).map(|e| inst.l[(d, e)] * v[0][e]).sum();
            rhs[row + r * n + d] = lv + forcing(t, d) - mode_sum[d];
        }
    }
    let lu = a.clone().lu();
    let mut x = lu.solve(&rhs).expect("full stage system is singular");
    for _ in 0..2 {
        let r = &rhs - &a * &x;
        x += lu.solve(&r).unwrap();
    }
    let mut out = inst.state.clone();
    let update = |field: &mut [f64], col: usize| {
        for r in 0..s {
            for d in 0..n {
                field[d] += h * tab.b[r] * x[col + r * n + d];
            }
        }
    };
    for i in 0..=amax {
        update(&mut out.derivs[i], deriv_col(i));
    }
    for (q, &(i, j, _)) in modes.iter().enumerate() {
        update(&mut out.modes[i - 1][j * n..(j + 1) * n], mode_col(q));
    }
    out.t += h;
    out.step += 1;
    out
}

/// State after one condensed step with Jacobian G ⊗ I − P₀ ⊗ L.
fn condensed(inst: &Instance) -> ModeSystemState {
    let tab = inst.scheme.tableau();
    let ops = condensation_operators(&tab, inst.h, std::slice::from_ref(&inst.family)).unwrap();
    let mut state = inst.state.clone();
    let l = inst.l.clone();
    let unknowns = tab.stages() * state.ndof;
    condensed_step(&mut state, &ops, &[], vec![0.0; unknowns], true, |sys, _| {
        let (s, n) = (sys.stages(), sys.ndof());
        let residual = |k: &[f64]| -> DVector<f64> {
            let z = sys.mode_sum(k);
            let y0 = sys.stage_values(0, k);
            DVector::from_fn(s * n, |idx, _| {
                let (r, d) = (idx / n, idx % n);
                let lu: f64 = (0..n).map(|e| l[(d, e)] * y0[r * n + e]).sum();
                z[idx] - lu - forcing(sys.stage_times[r], d)
            })
        };
        let r0 = residual(&vec![0.0; s * n]);
        let (g, p0) = (sys.g(0), sys.p(0));
        let jac = DMatrix::from_fn(s * n, s * n, |row, col| {
            let (r, d, c, e) = (row / n, row % n, col / n, col % n);
            let diag = if d == e { g[(r, c)] } else { 0.0 };
            diag - p0[(r, c)] * l[(d, e)]
        });
        let k = jac.lu().solve(&(-&r0)).expect("condensed system is singular");
        Ok((k.iter().copied().collect(), NewtonReport::default()))
    })
    .unwrap();
    state
}

/// max |a − b| over the larger magnitude of the field before and after the
/// step; stiff modes shrink by λh and are only determined to that scale.
fn rel_diff(a: &[f64], b: &[f64], before: &[f64]) -> f64 {
    let scale = b.iter().chain(before).fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Worst relative difference over `cases` random instances, or the first
/// instance above `tol`.
pub fn run(cases: usize, tol: f64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut worst: f64 = 0.0;
    let mut seen = std::collections::HashSet::new();
    for case in 0..cases {
        let inst = random_instance(&mut rng);
        seen.insert((inst.scheme, inst.family.amax()));
        let full = brute_force(&inst);
        let cond = condensed(&inst);
        let n = inst.state.ndof;
        let fields = |st: &ModeSystemState| -> Vec<Vec<f64>> {
            let modes = st.modes.iter().flat_map(|m| m.chunks(n).map(<[f64]>::to_vec));
            st.derivs.iter().cloned().chain(modes).collect()
        };
        let (before, full_f, cond_f) = (fields(&inst.state), fields(&full), fields(&cond));
        for (fi, ((a, b), v)) in cond_f.iter().zip(&full_f).zip(&before).enumerate() {
            let e = rel_diff(a, b, v);
            if !(e <= tol) {
                return Err(format!(
                    "case {case} field {fi}: {} αmax {} counts {:?} h {:e}: relative difference {e:e}",
                    inst.scheme,
                    inst.family.amax(),
                    inst.family.counts(),
                    inst.h
                ));
            }
            worst = worst.max(e);
        }
        if cond.t != full.t {
            return Err(format!("case {case}: times differ"));
        }
    }
    if seen.len() != Scheme::ALL.len() * 3 {
        return Err(format!("only {} of {} tableau and αmax pairs exercised", seen.len(), Scheme::ALL.len() * 3));
    }
    Ok(worst)
}
