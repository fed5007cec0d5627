//! Weight functions, quadrature and distributed-order kernels.

pub mod kernel;
pub mod quadrature;
pub mod weight;

pub use kernel::DOKernel;
pub use quadrature::{
    gauss_nodes, integrate_adaptive, AdaptiveOptions, Integral, QuadratureFamily, QuadratureRule,
};
pub use weight::{split_sign, WeightFunctionSpec, WeightKind};
