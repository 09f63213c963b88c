//! Limiting variance `sigma^2 = cov(0) + 2 sum_{t >= 1} cov(t)` with a geometric tail bound.

use serde::Serialize;

use crate::clt::covariance::{cov_exact_series, CovMethod, CovarianceSeries};
use crate::error::{Error, Result};
use crate::spectral::TransferOperator;
use crate::torus::walsh::WalshSpectrum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// `|cov(t)| ~ c kappa^t`.
    pub c: f64,
    pub kappa: f64,
    pub points: usize,
    pub first: usize,
    pub last: usize,
}

/// Least squares of `log |cov(t)|` on `t` over `t >= from` where the value clears
/// its threshold: `100 tol` for exact series, `z` standard errors for MC ones.
pub fn fit_decay(series: &CovarianceSeries, from: usize, tol: f64, z: f64) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .values
        .iter()
        .zip(&series.errors)
        .enumerate()
        .skip(from)
        .filter(|(_, (v, e))| match series.method {
            CovMethod::Exact => v.abs() > 100.0 * tol,
            CovMethod::MonteCarlo => v.abs() > z * **e,
        })
        .map(|(t, (v, _))| (t as f64, v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (slope, intercept) = least_squares(&pts);
    Some(DecayFit {
        c: intercept.exp(),
        kappa: slope.exp(),
        points: pts.len(),
        first: pts[0].0 as usize,
        last: pts[pts.len() - 1].0 as usize,
    })
}

/// `(slope, intercept)` of the ordinary least squares line.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    pub sigma2: f64,
    /// Bound on `2 sum_{t > t_max} |cov(t)|` from the fitted decay.
    pub tail_bound: f64,
    /// Numerical error (exact) or standard error (MC) of the truncated sum.
    pub sum_error: f64,
    pub t_max: usize,
    pub fit: Option<DecayFit>,
    pub method: CovMethod,
}

impl VarianceReport {
    /// Combined uncertainty of `sigma2`.
    pub fn uncertainty(&self) -> f64 {
        self.tail_bound + self.sum_error
    }
}

/// Options for turning a covariance series into a variance report.
#[derive(Clone, Copy, Debug)]
pub struct SeriesOptions {
    /// First lag used in the decay fit (the window width `m` for cylinders).
    pub fit_from: usize,
    pub tol: f64,
    pub z: f64,
}

pub fn sigma2_from_series(series: &CovarianceSeries, opts: SeriesOptions) -> Result<VarianceReport> {
    let v = &series.values;
    let sigma2 = v[0] + 2.0 * v[1..].iter().sum::<f64>();
    let t_max = series.t_max();
    let fit = fit_decay(series, opts.fit_from, opts.tol, opts.z);
    let tail_bound = match fit {
        Some(f) if f.kappa >= 1.0 => return Err(Error::NonGeometricDecay { kappa_hat: f.kappa }),
        Some(f) => {
            // the last lag may sit below the fit threshold; use the larger of the
            // observed value and the fitted envelope there
            let last = v[t_max].abs().max(f.c * f.kappa.powi(t_max as i32));
            2.0 * last * f.kappa / (1.0 - f.kappa)
        }
        None => {
            // no resolvable decay: everything past the fit start is at noise level
            let noise = match series.method {
                CovMethod::Exact => 100.0 * opts.tol,
                CovMethod::MonteCarlo => opts.z * series.errors[t_max],
            };
            if v.iter().skip(opts.fit_from).all(|x| x.abs() <= noise) {
                2.0 * noise
            } else {
                return Err(Error::NonGeometricDecay { kappa_hat: f64::NAN });
            }
        }
    };
    let sum_error = match series.method {
        CovMethod::Exact => series.errors[0] + 2.0 * series.errors[1..].iter().sum::<f64>(),
        CovMethod::MonteCarlo => series.sum_stderr.unwrap_or(f64::NAN),
    };
    Ok(VarianceReport { sigma2, tail_bound, sum_error, t_max, fit, method: series.method })
}

/// Exact series for a centered cylinder functional.
pub fn sigma2_series(op: &TransferOperator, spec: &WalshSpectrum, t_max: usize, tol: f64) -> Result<VarianceReport> {
    let series = cov_exact_series(op, spec, t_max, tol)?;
    let fit_from = spec.support_width().max(1) as usize;
    sigma2_from_series(&series, SeriesOptions { fit_from, tol, z: 3.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelParams};

    #[test]
    fn unperturbed_single_spin() {
        let op = TransferOperator::new(&Model::new(ModelParams::lazy_walk(0.0, 0.1, 1.0, 1.5)).unwrap());
        let spec = WalshSpectrum::from_terms(1, [(1, 1.0)]);
        let r = sigma2_series(&op, &spec, 30, 1e-15).unwrap();
        // 1 + 2 (0.05 + 0.00375 + 0.1^3 * 5/16 + ...)
        assert!((r.sigma2 - (1.0 + 2.0 * (0.05 + 0.00375 + 0.0003125))).abs() < 1e-4);
        assert!(r.tail_bound < 1e-12);
        let fit = r.fit.unwrap();
        assert!(fit.kappa < 0.1);
    }

    #[test]
    fn constant_functional_has_zero_variance() {
        let op = TransferOperator::new(&Model::new(ModelParams::default_lazy()).unwrap());
        let r = sigma2_series(&op, &WalshSpectrum::new(1), 5, 1e-15).unwrap();
        assert_eq!(r.sigma2, 0.0);
    }

    #[test]
    fn non_geometric_is_reported() {
        let s = CovarianceSeries {
            method: CovMethod::Exact,
            values: vec![1.0, 0.5, 0.6, 0.7, 0.8],
            errors: vec![0.0; 5],
            sum_stderr: None,
            samples: 0,
        };
        let r = sigma2_from_series(&s, SeriesOptions { fit_from: 1, tol: 1e-15, z: 3.0 });
        assert!(matches!(r, Err(Error::NonGeometricDecay { .. })));
    }

    #[test]
    fn least_squares_line() {
        let (a, b) = least_squares(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert!((a - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }
}
