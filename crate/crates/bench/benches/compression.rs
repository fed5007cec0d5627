use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use dokc::expsum::{compress, CompressOptions};
use dokc::kernels::{DOKernel, WeightFunctionSpec};

fn compression(c: &mut Criterion) {
    let w = Arc::new(WeightFunctionSpec::exm1());
    let k = DOKernel::new(w, 1).unwrap();
    let mut g = c.benchmark_group("compress");
    g.sample_size(10);
    for tol in [1e-6, 1e-10] {
        let opts = CompressOptions::new(tol);
        g.bench_function(format!("exm1_K1_tol{tol:e}"), |b| b.iter(|| compress(&k, &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, compression);
criterion_main!(benches);
