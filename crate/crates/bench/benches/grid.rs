use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dokc::solvers::{assemble_laplacian, solve_dopde, BandedMatrix, GridSpec, PdeKernels, PdeOptions};
use dokc::solvers::{pde_scenario, PdeParams, ScenarioName};
use dokc::timestepping::{Scheme, TimeMesh};
use dokc_bench::synthetic_family;

fn banded_poisson(c: &mut Criterion) {
    let mut g = c.benchmark_group("banded_poisson");
    for cells in [32, 64] {
        let grid = GridSpec::new(2, cells).unwrap();
        let rhs = vec![1.0; grid.ndof()];
        g.bench_with_input(BenchmarkId::from_parameter(cells), &grid, |b, grid| {
            b.iter(|| {
                let lap = assemble_laplacian(grid);
                let bw = grid.per_axis();
                let mut a = BandedMatrix::zeros(grid.ndof(), bw, bw);
                for r in 0..grid.ndof() {
                    for (c, v) in lap.row(r) {
                        a.add(r, c, -v);
                    }
                }
                a.factor().unwrap().solve(&rhs)
            })
        });
    }
    g.finish();
}

fn pde_steps(c: &mut Criterion) {
    let prob = pde_scenario(ScenarioName::Table1, &PdeParams { cells: 32, ..PdeParams::default() }).unwrap();
    let mesh = TimeMesh::uniform(10, 0.1).unwrap();
    let mut g = c.benchmark_group("pde_32x32_10_steps");
    g.sample_size(10);
    for m in [20, 40] {
        let k = PdeKernels::global(synthetic_family(m));
        g.bench_with_input(BenchmarkId::from_parameter(m), &k, |b, k| {
            b.iter(|| solve_dopde(&prob, k, Scheme::RadauIia2, &mesh, &PdeOptions::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, banded_poisson, pde_steps);
criterion_main!(benches);
