//! Concordance correlation coefficient (CCC, ρc) versus MSE-family error metrics.
//!
//! The crate computes the exact relation between ρc and the mean squared error,
//! the ρc envelopes attainable at a fixed MSE or a fixed L_k error norm, the
//! orderings of a fixed error multiset that extremize ρc, and a family of
//! ρc-inspired loss functions with analytic gradients. Every closed form has a
//! brute-force counterpart in [`oracles`].

pub mod cli;
pub mod error;
pub mod even_p;
pub mod loss;
pub mod lp_bounds;
pub mod mapping;
pub mod oracles;
pub mod permutation;
pub mod stats;
pub mod tol;

pub use error::{Error, Result};
pub use stats::{PairStats, Sequence};
