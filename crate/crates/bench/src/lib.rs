//! Shared inputs of the benchmarks.

use dokc::expsum::ExpTerm;
use dokc::timestepping::ModeFamily;

/// Two identical kernels of `m` terms with rates spread over [1e-2, 1e10].
pub fn synthetic_family(m: usize) -> ModeFamily {
    let terms: Vec<ExpTerm> = (0..m)
        .map(|j| ExpTerm {
            w: 1.0 + j as f64,
            lambda: 10f64.powf(-2.0 + 12.0 * j as f64 / m as f64),
        })
        .collect();
    ModeFamily::new(vec![terms.clone(), terms]).expect("valid family")
}
