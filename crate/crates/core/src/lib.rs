//! Random walk in a dynamic random environment that reacts to the walker.
//!
//! Layers, bottom up: model constants and kernels ([`model`]), exact lazy
//! simulation ([`sim`]), the stochastic operator on the spin-product basis
//! ([`spectral`]), dyadic Walsh analysis of functionals of the spin seen by
//! the walker ([`torus`]), and covariance / CLT diagnostics ([`clt`]).

pub mod clt;
pub mod error;
pub mod model;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod torus;

pub use error::{Error, Result};
pub use model::{Model, ModelParams, Site};
