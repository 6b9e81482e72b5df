//! Weighted prototype selection under the maximum mean discrepancy (MMD)
//! objective.
//!
//! Given a target sample `X1` and a source sample `X2`, the crate picks a
//! small set of source rows and non-negative weights whose weighted kernel
//! mean embedding best matches the target's. Dropping constants from the
//! squared MMD leaves the concave objective
//!
//! ```text
//! l(w) = w' mu - 0.5 w' K w,      w >= 0
//! ```
//!
//! where `K` is the Gram matrix over source rows and `mu_j` averages the
//! kernel between row `j` and the target rows. The set function
//! `f(L) = max { l(w) : supp(w) in L, w >= 0 }` is monotone and weakly
//! submodular, which is what the greedy selectors rely on.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernel`] | kernels, Gram matrix, mean map, median bandwidth |
//! | [`nnqp`] | restricted non-negative QP solver, objective, gradient, KKT residual |
//! | [`selectors`] | ProtoDash, ProtoGreedy, L2C baselines, RandomW, truncation, criticisms |
//! | [`oracle`] | exhaustive optima, submodularity ratios, sparse eigenvalue bounds |
//! | [`ranking`] | cross-dataset ranking and graph export |
//! | [`synthetic`] | seeded data generators |
//!
//! ```
//! use protoselect::kernel::{kernel_matrix, mean_map, Dataset, KernelSpec};
//! use protoselect::selectors::{proto_dash, SelectionConfig};
//!
//! let source = Dataset::from_rows(&[[0.0], [1.0], [5.0], [5.5]]).unwrap();
//! let target = Dataset::from_rows(&[[5.1], [5.3], [0.2]]).unwrap();
//! let spec = KernelSpec::gaussian(1.0).unwrap();
//! let k = kernel_matrix(&source, &spec).unwrap();
//! let mu = mean_map(&target, &source, &spec).unwrap();
//! let result = proto_dash(&k, &mu, &SelectionConfig::sparsity(2)).unwrap();
//! assert_eq!(result.len(), 2);
//! ```

mod clock;
pub mod error;
pub mod kernel;
pub mod nnqp;
pub mod oracle;
mod par;
pub mod ranking;
pub mod selectors;
pub mod synthetic;

pub use error::{Error, Result, SolverFailure};
pub use kernel::{Dataset, KernelMatrix, KernelSpec, MeanMap};
pub use nnqp::{SolverConfig, SupportSet, WeightVector};
pub use selectors::{Method, SelectionConfig, SelectionResult, Termination};
