//! Scalar and PDE problems built on the compressed kernels and the condensed
//! time stepper.

pub mod convergence;
pub mod dofde;
pub mod dopde;
pub mod grid;
pub mod scenarios;
pub mod spatial;

pub use convergence::{asymptotic_rate, rate_table, RateRow};
pub use dofde::{example1, example2, solve_dofde, solve_with_family, zero_problem, DOFDEProblem, DofdeSolution};
pub use dopde::{solve_dopde, DOPDEProblem, DopdeSolution, PdeKernels, PdeOptions, Snapshot, WeightSource};
pub use grid::{assemble_laplacian, BandedLu, BandedMatrix, CsrMatrix, GridSpec};
pub use scenarios::{
    dofde_kernels, ode_scenario, pde_kernels, pde_scenario, PdeParams, PreparedPdeKernels, ScenarioName,
};
pub use spatial::{spatial_kernel_table, EtaField, SpatialKernelTable};
