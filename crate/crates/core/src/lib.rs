//! Grassmannian averaging with Chebyshev-filtered power iterations.
//!
//! The crate computes the induced arithmetic mean (IAM) of a collection of
//! subspaces, i.e. the span of the leading `k` eigenvectors of the averaged
//! projector `P = (1/M) Σ U_m U_mᵀ`, without ever forming `P`. Iterations apply
//! an optimal dual-band polynomial of `P` to a starting basis, either exactly
//! (finite variants, fixed horizon) or through a three-term recurrence
//! (asymptotic variants).
//!
//! Modules:
//! - [`manifold`]: Stiefel/Grassmann primitives, sampling and reference means.
//! - [`chebfilter`]: optimal filter roots, recurrence coefficients and the
//!   polynomial tooling used to certify them.
//! - [`rgrav`]: centralized averaging and the block power method.
//! - [`netsim`]: communication graphs, mixing matrices and average consensus.
//! - [`drgrav`]: decentralized averaging with gradient tracking, plus metrics.
//! - [`kmeans`]: K-means on the Grassmannian with pluggable averaging.

pub mod chebfilter;
pub mod drgrav;
pub mod error;
pub mod kmeans;
pub mod manifold;
pub mod netsim;
pub mod ops;
pub mod rgrav;

pub use error::{GravError, Result};
pub use manifold::{GrassmannPoint, StiefelBasis};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
