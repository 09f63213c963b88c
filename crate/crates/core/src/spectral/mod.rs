//! Sparse calculus on the basis `Phi_G(eta) = prod_{x in G} eta(x)`.

pub mod conditional;
pub mod functional;
pub mod gamma;
pub mod operator;

pub use conditional::{g_gamma, g_of_cylinder, g_of_cylinder_with_terminal, TimeSet};
pub use functional::FieldFunctional;
pub use gamma::{phi_mul, GammaSet};
pub use operator::{
    contraction_estimate, invariant_mean, invariant_mean_with, one_step_expectation, split_hat, ContractionReport, InvariantMean, ProbeRecord,
    TransferOperator, DEFAULT_PRUNE,
};
