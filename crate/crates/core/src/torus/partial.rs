use serde::Serialize;

use crate::error::{Error, Result};
use crate::torus::function::TorusFunction;
use crate::torus::walsh::{default_quad_depth, MAX_QUAD_DEPTH};

/// Average of `f` over `[m 2^-k, (m+1) 2^-k)` by the midpoint rule at depth `q >= k`.
pub fn cell_average(f: &TorusFunction, k: u32, m: u64, q: u32) -> f64 {
    let per = 1u64 << (q - k);
    let h = 0.5f64.powi(q as i32);
    let start = m * per;
    (0..per).map(|i| f.eval(((start + i) as f64 + 0.5) * h)).sum::<f64>() / per as f64
}

/// `Sigma_{2^k}(f; x)`: the average of `f` over the depth-`k` dyadic cell of `x`.
pub fn partial_sum_dyadic(f: &TorusFunction, k: u32, x: f64) -> Result<f64> {
    partial_sum_dyadic_at(f, k, x, default_quad_depth(k))
}

pub fn partial_sum_dyadic_at(f: &TorusFunction, k: u32, x: f64, q: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Precondition(format!("x = {x} not in [0,1)")));
    }
    if q < k || q > MAX_QUAD_DEPTH || k > 62 {
        return Err(Error::Precondition(format!("need k <= q <= {MAX_QUAD_DEPTH}, got k={k}, q={q}")));
    }
    let m = (x * 2f64.powi(k as i32)).floor() as u64;
    Ok(cell_average(f, k, m, q))
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproximationReport {
    pub n: u32,
    pub sup_error: f64,
    /// `||f||_alpha 2^{-alpha n}`.
    pub bound: f64,
    /// Quadrature error of the cell averages, added to the bound.
    pub quadrature_slack: f64,
    pub pass: bool,
}

/// Grid sup of `|f - Sigma_{2^n} f|` against `||f||_alpha 2^{-alpha n}`.
pub fn approximation_error_check(f: &TorusFunction, n: u32) -> Result<ApproximationReport> {
    if n > 16 {
        return Err(Error::Precondition(format!("level {n} > 16 not supported")));
    }
    let q = default_quad_depth(n);
    let sub = 6u32;
    let per = 1u64 << sub;
    let mut sup: f64 = 0.0;
    for m in 0..(1u64 << n) {
        let avg = cell_average(f, n, m, q);
        let h = 0.5f64.powi((n + sub) as i32);
        for i in 0..per {
            let x = (m * per + i) as f64 * h;
            sup = sup.max((f.eval(x) - avg).abs());
        }
    }
    let bound = f.seminorm_alpha * 2f64.powf(-f.alpha * f64::from(n));
    let quadrature_slack = f.seminorm_alpha * 2f64.powf(-f.alpha * f64::from(q));
    Ok(ApproximationReport { n, sup_error: sup, bound, quadrature_slack, pass: sup <= bound + quadrature_slack })
}

/// `omega(f; delta) = sup |f(x) - f(x')| / delta` over pairs at distance exactly
/// `delta`, with `x` on a grid of `samples` points. Pairs wrap around the circle
/// only for periodic functions.
pub fn modulus(f: &TorusFunction, delta: f64, samples: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition(format!("delta = {delta} not in (0,1)")));
    }
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let mut sup: f64 = 0.0;
    for i in 0..samples {
        let x = i as f64 / samples as f64;
        let mut y = x + delta;
        if y >= 1.0 {
            if !f.periodic {
                continue;
            }
            y -= 1.0;
        }
        sup = sup.max((f.eval(y) - f.eval(x)).abs());
    }
    Ok(sup / delta)
}

/// Sup of `|f(x) - f(y)| / d(x,y)^alpha` over a level-`level` dyadic grid, for a
/// geometric ladder of separations.
pub fn hoelder_seminorm_estimate(f: &TorusFunction, level: u32) -> f64 {
    let n = 1usize << level;
    let values: Vec<f64> = (0..n).map(|i| f.eval(i as f64 / n as f64)).collect();
    let mut seps: Vec<usize> = (1..=64.min(n / 2)).collect();
    let mut d = 64.0f64;
    while (d as usize) < n / 2 {
        d *= 1.1;
        seps.push((d as usize).min(n / 2));
    }
    seps.dedup();
    let mut best: f64 = 0.0;
    for &s in &seps {
        let dist = s as f64 / n as f64;
        let scale = dist.powf(f.alpha);
        let mut top: f64 = 0.0;
        for i in 0..n {
            let j = i + s;
            let dv = if j < n {
                values[j] - values[i]
            } else if f.periodic {
                values[j - n] - values[i]
            } else {
                continue;
            };
            top = top.max(dv.abs());
        }
        best = best.max(top / scale);
    }
    best
}
