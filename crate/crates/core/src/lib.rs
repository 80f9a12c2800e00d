//! Generative model training by minimizing the entropic optimal transport
//! cost between a generator's push-forward measure and a discrete target.
//!
//! The crate is organized bottom-up:
//!
//! - [`measures`]: points, discrete measures, ground costs, latent samplers and
//!   dataset loaders (CSV, IDX).
//! - [`semidual`]: hard and entropic c-transforms, soft assignments and the
//!   semi-dual objective with its potential gradient.
//! - [`dual_solver`]: stochastic and full-batch ascent on the dual potential,
//!   plus the closed form for a single generated atom.
//! - [`generators`]: parametric maps with exact vector-Jacobian products and
//!   the Adam optimizer.
//! - [`trainer`]: the alternating potential-ascent / generator-descent loop,
//!   trajectories and checkpoints.
//! - [`oracle`]: independent references (log-domain Sinkhorn, relative entropy,
//!   closed-form counterexample values, finite-difference harness).

pub mod dual_solver;
pub mod error;
pub mod generators;
pub mod measures;
pub mod oracle;
pub mod semidual;
pub mod trainer;

pub use error::{Error, Result};
