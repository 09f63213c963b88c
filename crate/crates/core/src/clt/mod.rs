//! Covariances, limiting variance, blocking and Gaussianity diagnostics.

pub mod bernstein;
pub mod bounds;
pub mod covariance;
pub mod functional;
pub mod gaussianity;
pub mod variance;

pub use bernstein::{bernstein_plan, block_sums, remainder_variance_exact, BernsteinPlan, BlockSums};
pub use covariance::{center_cylinder, cov_exact, cov_exact_series, cov_mc, torus_mean, CovMethod, CovarianceSeries, McOptions};
pub use functional::{truncation_depth, ZetaFunctional};
pub use gaussianity::{clt_battery, clt_test, iid_control, ks_normal, moments, CltReport, CltThresholds};
pub use variance::{sigma2_from_series, sigma2_series, SeriesOptions, VarianceReport};
