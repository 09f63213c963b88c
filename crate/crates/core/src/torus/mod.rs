//! Dyadic analysis on the circle: the binary map between spin sequences and
//! `[0, 1)`, Walsh functions, coefficients and dyadic partial sums.

pub mod binary;
pub mod function;
pub mod partial;
pub mod walsh;

pub use binary::{bitrev, decode, encode, gamma_of_n, n_of_gamma};
pub use function::{TorusFunction, TorusKind};
pub use partial::{
    approximation_error_check, hoelder_seminorm_estimate, modulus, partial_sum_dyadic, ApproximationReport,
};
pub use walsh::{default_quad_depth, fwht, psi, spectrum, walsh_coeff, WalshSpectrum};
