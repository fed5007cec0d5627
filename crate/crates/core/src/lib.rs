//! Distributed-order kernel compression and condensed Runge–Kutta time stepping.

pub mod error;
pub mod expsum;
pub mod kernels;
pub mod mp;
pub mod solvers;
pub mod timestepping;

pub use error::{Error, Result};

/// Library version recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
