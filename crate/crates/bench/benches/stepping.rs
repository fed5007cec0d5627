use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dokc::solvers::{example2, solve_with_family};
use dokc::timestepping::{NewtonOptions, Scheme, TimeMesh};
use dokc_bench::synthetic_family;

fn ode_steps(c: &mut Criterion) {
    let p = example2();
    let mesh = TimeMesh::uniform(100, p.t_final).unwrap();
    let newton = NewtonOptions::default();
    let mut g = c.benchmark_group("ode_100_steps");
    for m in [20, 40, 80] {
        for scheme in [Scheme::ImplicitEuler, Scheme::RadauIia2] {
            g.bench_with_input(BenchmarkId::new(scheme.name(), m), &m, |b, &m| {
                b.iter(|| solve_with_family(&p, synthetic_family(m), scheme, &mesh, &newton).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, ode_steps);
criterion_main!(benches);
