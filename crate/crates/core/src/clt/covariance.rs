//! Stationary means and autocovariances of `f(S^t zeta)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::clt::functional::ZetaFunctional;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::sim::{SimOptions, Simulator};
use crate::spectral::{
    g_of_cylinder, g_of_cylinder_with_terminal, invariant_mean, FieldFunctional, InvariantMean, TransferOperator,
};
use crate::torus::walsh::WalshSpectrum;

/// `<f>` under the stationary law of the spin sequence.
pub fn cylinder_mean(op: &TransferOperator, spec: &WalshSpectrum, tol: f64) -> Result<InvariantMean> {
    invariant_mean(op, &g_of_cylinder(op, spec), tol)
}

/// `f - <f>`, with the mean that was removed.
pub fn center_cylinder(op: &TransferOperator, spec: &WalshSpectrum, tol: f64) -> Result<(WalshSpectrum, InvariantMean)> {
    let mean = cylinder_mean(op, spec, tol)?;
    let mut out = spec.clone();
    out.set(0, spec.coeff(0) - mean.value);
    Ok((out, mean))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceSeries {
    pub method: CovMethod,
    /// `cov(t)` for `t = 0..=t_max`.
    pub values: Vec<f64>,
    /// Standard errors (MC) or numerical error bounds (exact).
    pub errors: Vec<f64>,
    /// Standard error of the truncated series `cov(0) + 2 sum cov(t)` (MC only).
    pub sum_stderr: Option<f64>,
    pub samples: usize,
}

impl CovarianceSeries {
    pub fn t_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,cov,error")?;
        for (t, (v, e)) in self.values.iter().zip(&self.errors).enumerate() {
            writeln!(w, "{t},{v:e},{e:e}")?;
        }
        Ok(())
    }
}

/// Kernel of the exact covariance computation: `<f f(S^t) | eta_0>` for all `t`.
pub struct PairConditional<'a> {
    op: &'a TransferOperator,
    spec: &'a WalshSpectrum,
    width: u32,
    /// `T^{t-m+1} G^(f)` for the current `t >= m - 1`.
    terminal: FieldFunctional,
    terminal_t: usize,
}

impl<'a> PairConditional<'a> {
    pub fn new(op: &'a TransferOperator, spec: &'a WalshSpectrum) -> PairConditional<'a> {
        let width = spec.support_width().max(1);
        let terminal = g_of_cylinder(op, spec);
        PairConditional { op, spec, width, terminal, terminal_t: width as usize - 1 }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// `G^(f)`.
    pub fn g(&self) -> FieldFunctional {
        g_of_cylinder(self.op, self.spec)
    }

    /// `<f(zeta) f(S^t zeta) | eta_0>`. Calls must use nondecreasing `t` once `t >= m - 1`.
    pub fn at(&mut self, t: usize) -> FieldFunctional {
        let m = self.width as usize;
        if t + 1 < m {
            return g_of_cylinder(self.op, &self.spec.shifted_product(t as u32));
        }
        assert!(t >= self.terminal_t, "pair conditional queried out of order");
        while self.terminal_t < t {
            self.terminal = self.op.apply(&self.terminal);
            self.terminal_t += 1;
        }
        g_of_cylinder_with_terminal(self.op, self.spec, self.width, &self.terminal)
    }
}

/// `cov(t) = <f f(S^t)> - <f>^2`, exactly up to operator iteration error.
pub fn cov_exact(op: &TransferOperator, spec: &WalshSpectrum, t: usize, tol: f64) -> Result<f64> {
    let mean = cylinder_mean(op, spec, tol)?.value;
    let mut pc = PairConditional::new(op, spec);
    Ok(invariant_mean(op, &pc.at(t), tol)?.value - mean * mean)
}

pub fn cov_exact_series(op: &TransferOperator, spec: &WalshSpectrum, t_max: usize, tol: f64) -> Result<CovarianceSeries> {
    let mean = cylinder_mean(op, spec, tol)?;
    let mut pc = PairConditional::new(op, spec);
    let mut values = Vec::with_capacity(t_max + 1);
    let mut errors = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let r = invariant_mean(op, &pc.at(t), tol)?;
        values.push(r.value - mean.value * mean.value);
        errors.push(r.error_bound + 2.0 * mean.value.abs() * mean.error_bound + mean.error_bound.powi(2));
    }
    Ok(CovarianceSeries { method: CovMethod::Exact, values, errors, sum_stderr: None, samples: 0 })
}

#[derive(Clone, Debug)]
pub struct McOptions {
    pub sim: SimOptions,
    /// Known stationary mean; if absent each replica uses its own time average.
    pub mean: Option<f64>,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { sim: SimOptions { burn_in: 100, ..SimOptions::default() }, mean: None }
    }
}

/// `len` consecutive values of `f` along one replica.
pub fn replica_values(
    model: &Model,
    f: &ZetaFunctional,
    len: usize,
    seed: u64,
    replica: u64,
    opts: &SimOptions,
) -> Result<Vec<f64>> {
    let ev = f.evaluator()?;
    let mut sim = Simulator::new(model, seed, replica, opts.clone())?;
    let zeta = sim.zeta_sequence(len + ev.width() - 1);
    ev.values(&zeta)
}

/// Time-average covariance estimates over independent replicas, with standard
/// errors from the spread across replicas.
pub fn cov_mc(
    model: &Model,
    f: &ZetaFunctional,
    t_max: usize,
    n: usize,
    replicas: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<CovarianceSeries> {
    if replicas < 2 || n == 0 {
        return Err(Error::Precondition("need n >= 1 and at least 2 replicas".into()));
    }
    let per_replica: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let v = replica_values(model, f, n + t_max, seed, r, &opts.sim)?;
            let m = opts.mean.unwrap_or_else(|| v[..n].iter().sum::<f64>() / n as f64);
            let c: Vec<f64> = (0..=t_max)
                .map(|t| (0..n).map(|s| (v[s] - m) * (v[s + t] - m)).sum::<f64>() / n as f64)
                .collect();
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let rr = replicas as f64;
    let mut values = vec![0.0; t_max + 1];
    let mut errors = vec![0.0; t_max + 1];
    for t in 0..=t_max {
        let xs: Vec<f64> = per_replica.iter().map(|c| c[t]).collect();
        let (mean, var) = mean_var(&xs);
        values[t] = mean;
        errors[t] = (var / rr).sqrt();
    }
    let sums: Vec<f64> = per_replica.iter().map(|c| c[0] + 2.0 * c[1..].iter().sum::<f64>()).collect();
    let (_, var) = mean_var(&sums);
    Ok(CovarianceSeries {
        method: CovMethod::MonteCarlo,
        values,
        errors,
        sum_stderr: Some((var / rr).sqrt()),
        samples: n * replicas,
    })
}

pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Stationary mean of a torus functional: exact mean of the depth-`k` partial
/// sum plus a Monte Carlo estimate of the (small) remainder. Returns `(mean, stderr)`.
pub fn torus_mean(
    op: &TransferOperator,
    f: &crate::torus::TorusFunction,
    depth: u32,
    exact_depth: u32,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<(f64, f64)> {
    let q = (exact_depth + 4).max(20);
    let spec = crate::torus::spectrum(f, exact_depth, q)?;
    let exact = cylinder_mean(op, &spec, tol)?.value;
    if depth <= exact_depth {
        return Ok((exact, 0.0));
    }
    let fine = ZetaFunctional::Torus { f: f.clone(), depth, shift: 0.0 };
    let coarse = ZetaFunctional::Torus { f: f.clone(), depth: exact_depth, shift: 0.0 };
    let chunks = 8usize;
    let len = samples.div_ceil(chunks);
    let opts = McOptions::default().sim;
    let parts: Vec<f64> = (0..chunks as u64)
        .into_par_iter()
        .map(|r| {
            let mut sim = Simulator::new(op.model(), seed, r, opts.clone())?;
            let zeta = sim.zeta_sequence(len + fine.window() - 1);
            let a = fine.values(&zeta)?;
            let b = coarse.values(&zeta)?;
            Ok(a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / len as f64)
        })
        .collect::<Result<_>>()?;
    let (m, v) = mean_var(&parts);
    Ok((exact + m, (v / chunks as f64).sqrt()))
}
