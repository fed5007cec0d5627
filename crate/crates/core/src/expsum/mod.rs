//! Exponential-sum compression of kernels: AAA on s·L[K](s), partial
//! fractions of r(s)/s, inverse Laplace transform, L1 certification and
//! caching.

pub mod aaa;
pub mod barycentric;
pub mod cache;
pub mod compress;
pub mod l1;
pub mod pfd;
pub mod poles;
pub mod support;

pub use aaa::{aaa, AaaOptions, AaaResult, AaaStatus, SvdPath};
pub use barycentric::BarycentricRational;
pub use cache::{compress_cached, CacheOutcome, KernelCache};
pub use compress::{compress, compress_with_report, CompressOptions, CompressedKernel, CompressionReport, ExpTerm};
pub use l1::{l1_error, l1_error_of, L1Options, L1Report, SumTerms};
pub use pfd::{partial_fractions, PfdOptions};
pub use poles::{poles, residues, PoleSet};
pub use support::SupportSet;
