//! Identifiable sparse-graph latent class models ("Bayesian pyramids") for
//! multivariate categorical data.
//!
//! - [`lcm`]: constrained latent class models, the two-layer pyramid, and
//!   their probability evaluations.
//! - [`identify`]: algorithmic checks of the strict / generic identifiability
//!   conditions and the Khatri-Rao rank oracle.
//! - [`simgen`]: forward simulation of two-layer and deeper pyramids.
//! - [`gibbs`]: Polya-Gamma augmented Gibbs sampler with spike-and-slab graph
//!   selection and a cumulative shrinkage prior over latent columns.
//! - [`postproc`]: alignment, posterior-mode estimators, and recovery metrics.

pub mod error;
pub mod gibbs;
pub mod identify;
pub mod io;
pub mod lcm;
pub mod matrix;
pub mod postproc;
pub mod rngs;
pub mod simgen;

pub use error::{Error, Result};
pub use matrix::BinaryMatrix;
