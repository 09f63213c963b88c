//! Normalized sums over independent replicas and a small Gaussianity battery.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::clt::covariance::replica_values;
use crate::clt::functional::ZetaFunctional;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng;
use crate::sim::SimOptions;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CltThresholds {
    pub ks: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    /// Allowed deviation of the sample variance, in combined standard errors.
    pub var_sigmas: f64,
}

impl Default for CltThresholds {
    fn default() -> Self {
        CltThresholds { ks: 0.05, skew: 0.15, excess_kurtosis: 0.3, var_sigmas: 3.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    /// Fourth central moment, for the standard error of `var`.
    pub m4: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    Moments {
        mean,
        var: m2 * n / (n - 1.0),
        skew: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        m4,
    }
}

/// One-sample Kolmogorov-Smirnov distance to N(0, 1).
pub fn ks_normal(xs: &[f64]) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, x)| {
        let f = normal.cdf(*x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub n: usize,
    pub replicas: usize,
    pub sigma2: f64,
    pub sigma2_uncertainty: f64,
    /// Moments of `S_n / sqrt(n sigma2)`.
    pub ks_stat: f64,
    pub mean: f64,
    pub var: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    /// Sample variance of `S_n / sqrt(n)` and its standard error.
    pub var_sum: f64,
    pub var_sum_stderr: f64,
    pub thresholds: CltThresholds,
    pub ks_pass: bool,
    pub skew_pass: bool,
    pub kurtosis_pass: bool,
    pub var_pass: bool,
    pub pass: bool,
}

/// Battery on raw sums `S_n` (one per replica).
pub fn clt_battery(sums: &[f64], n: usize, sigma2: f64, sigma2_uncertainty: f64, th: CltThresholds) -> Result<CltReport> {
    if !(sigma2 > 0.0) {
        return Err(Error::ZeroDispersion(sigma2));
    }
    if sums.len() < 8 {
        return Err(Error::Precondition("need at least 8 replicas".into()));
    }
    let rn = (n as f64).sqrt();
    let per_root_n: Vec<f64> = sums.iter().map(|s| s / rn).collect();
    let raw = moments(&per_root_n);
    let r = sums.len() as f64;
    let var_sum_stderr = ((raw.m4 - raw.var * raw.var).max(0.0) / r).sqrt();
    let z: Vec<f64> = per_root_n.iter().map(|s| s / sigma2.sqrt()).collect();
    let m = moments(&z);
    let ks = ks_normal(&z);
    let ks_pass = ks < th.ks;
    let skew_pass = m.skew.abs() < th.skew;
    let kurtosis_pass = m.excess_kurtosis.abs() < th.excess_kurtosis;
    let var_pass = (raw.var - sigma2).abs() <= th.var_sigmas * var_sum_stderr.hypot(sigma2_uncertainty);
    Ok(CltReport {
        n,
        replicas: sums.len(),
        sigma2,
        sigma2_uncertainty,
        ks_stat: ks,
        mean: m.mean,
        var: m.var,
        skew: m.skew,
        excess_kurtosis: m.excess_kurtosis,
        var_sum: raw.var,
        var_sum_stderr,
        thresholds: th,
        ks_pass,
        skew_pass,
        kurtosis_pass,
        var_pass,
        pass: ks_pass && skew_pass && kurtosis_pass && var_pass,
    })
}

/// `S_n = sum_{t<n} f(S^t zeta)` for each replica, in replica order.
pub fn replica_sums(model: &Model, f: &ZetaFunctional, n: usize, replicas: usize, seed: u64, opts: &SimOptions) -> Result<Vec<f64>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| Ok(replica_values(model, f, n, seed, r, opts)?.iter().sum()))
        .collect()
}

/// Simulates `replicas` trajectories and runs the battery against `sigma2`.
#[allow(clippy::too_many_arguments)]
pub fn clt_test(
    model: &Model,
    f: &ZetaFunctional,
    n: usize,
    replicas: usize,
    seed: u64,
    sigma2: f64,
    sigma2_uncertainty: f64,
    opts: &SimOptions,
    th: CltThresholds,
) -> Result<(CltReport, Vec<f64>)> {
    if !(sigma2 > 0.0) {
        return Err(Error::ZeroDispersion(sigma2));
    }
    let sums = replica_sums(model, f, n, replicas, seed, opts)?;
    Ok((clt_battery(&sums, n, sigma2, sigma2_uncertainty, th)?, sums))
}

/// Same battery on sums of i.i.d. fair signs (`sigma2 = 1`).
pub fn iid_control(n: usize, replicas: usize, seed: u64, th: CltThresholds) -> Result<CltReport> {
    let sums: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r);
            (0..n).map(|_| if g.gen::<bool>() { 1.0 } else { -1.0 }).sum()
        })
        .collect();
    clt_battery(&sums, n, 1.0, 0.0, th)
}

/// Histogram of `z` with the standard normal density overlaid.
pub fn histogram_svg(z: &[f64], bins: usize) -> String {
    let (lo, hi) = (-4.0, 4.0);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in z {
        if *x >= lo && *x < hi {
            counts[((x - lo) / width) as usize] += 1;
        }
    }
    let dens: Vec<f64> = counts.iter().map(|c| *c as f64 / (z.len() as f64 * width)).collect();
    let peak = dens.iter().copied().fold(0.45, f64::max);
    let (w, h) = (640.0, 400.0);
    let sx = |x: f64| (x - lo) / (hi - lo) * w;
    let sy = |y: f64| h - y / peak * (h - 10.0);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    for (i, d) in dens.iter().enumerate() {
        let x0 = sx(lo + i as f64 * width);
        s += &format!(
            "<rect x=\"{x0:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#9ab\"/>\n",
            sy(*d),
            sx(lo + width) - sx(lo),
            h - sy(*d)
        );
    }
    let pts: Vec<String> = (0..=200)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            let y = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            format!("{:.2},{:.2}", sx(x), sy(y))
        })
        .collect();
    s += &format!("<polyline fill=\"none\" stroke=\"#c33\" stroke-width=\"2\" points=\"{}\"/>\n</svg>\n", pts.join(" "));
    s
}
