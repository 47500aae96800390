//! Budget-constrained optimization of activation rates.

pub mod centrality;
pub mod cost;
pub mod gp;
pub mod homogeneous;
pub mod optimize;
pub mod posynomial;

pub use centrality::{allocate_by_centrality, closeness, Centrality};
pub use cost::{uniform_allocation, CostFamily};
pub use gp::{gp_solve, Bounds, GpError, GpOptions, GpProblem, GpSolution};
pub use homogeneous::{solve_homogeneous, HomogeneousOptimum};
pub use optimize::{sgp_optimize, SgpConfig, SgpError, SgpResult};
pub use posynomial::{monomial_approx, Monomial, Posynomial, PosyError};
