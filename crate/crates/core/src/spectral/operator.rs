//! The one-step conditional expectation `(T f)(eta) = E[f(eta_{t+1}) | eta_t = eta]`.
//!
//! Given the jump `u`, the environment seen from the walker moves by `u`, and
//! each site is updated independently; the site under the walker (`x = -u` in
//! the shifted frame) by `Q1`, all others by `Q0`. Averaging over `u` with
//! weights `P0(u) + eps c(u) eta(0)` gives
//!
//! `T Phi_G = sum_u w_u(G) [P0(u) Phi_{G+u} + eps c(u) Phi_{(G+u) xor {0}}]`
//!
//! with `w_u(G) = mu^{|G|-b} mu1^b`, `b = [-u in G]`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Model, Site};
use crate::spectral::functional::FieldFunctional;
use crate::spectral::gamma::GammaSet;

pub const DEFAULT_PRUNE: f64 = 1e-15;

#[derive(Clone, Debug)]
pub struct TransferOperator {
    model: Model,
    prune: f64,
    jumps: Vec<(Site, f64, f64)>,
}

impl TransferOperator {
    pub fn new(model: &Model) -> TransferOperator {
        Self::with_prune(model, DEFAULT_PRUNE)
    }

    pub fn with_prune(model: &Model, prune: f64) -> TransferOperator {
        let eps = model.epsilon();
        let jumps = model
            .offsets()
            .iter()
            .zip(model.p0_table().iter().zip(model.c_table()))
            .map(|(u, (p, c))| (*u, *p, eps * c))
            .collect();
        TransferOperator { model: model.clone(), prune, jumps }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    /// `T f`, pruned; returns the dropped l1 mass alongside.
    pub fn apply_tracked(&self, f: &FieldFunctional) -> (FieldFunctional, f64) {
        let (mu, mu1) = (self.model.mu(), self.model.mu1());
        let mut out: BTreeMap<GammaSet, f64> = BTreeMap::new();
        for (g, c) in f.iter() {
            let k = g.len() as i32;
            for &(u, p, ec) in &self.jumps {
                let b = g.contains(&u.neg());
                let w = if b { mu.powi(k - 1) * mu1 } else { mu.powi(k) };
                let cw = c * w;
                if cw == 0.0 {
                    continue;
                }
                let mut shifted = g.shift(u);
                if p != 0.0 {
                    *out.entry(shifted.clone()).or_insert(0.0) += cw * p;
                }
                if ec != 0.0 {
                    shifted.toggle(Site::ORIGIN);
                    *out.entry(shifted).or_insert(0.0) += cw * ec;
                }
            }
        }
        let mut result = FieldFunctional::from_terms(out);
        let dropped = result.prune(self.prune);
        (result, dropped)
    }

    pub fn apply(&self, f: &FieldFunctional) -> FieldFunctional {
        self.apply_tracked(f).0
    }

    /// `T^k f` with accumulated pruning mass.
    pub fn pow_tracked(&self, f: &FieldFunctional, k: u64) -> (FieldFunctional, f64) {
        let mut g = f.clone();
        let mut dropped = 0.0;
        for _ in 0..k {
            let (h, d) = self.apply_tracked(&g);
            g = h;
            dropped += d;
        }
        (g, dropped)
    }

    pub fn pow(&self, f: &FieldFunctional, k: u64) -> FieldFunctional {
        self.pow_tracked(f, k).0
    }
}

/// `(T f)(eta)` evaluated directly from the one-step law: average over the jump
/// `u` of `prod_{x in G} lambda(u + x) eta(u + x)`, where `lambda` is `mu1` at the
/// walker's old site and `mu` elsewhere. Independent of the closed form above.
pub fn one_step_expectation(model: &Model, f: &FieldFunctional, eta: impl Fn(&Site) -> Option<i8>) -> Result<f64> {
    let s0 = eta(&Site::ORIGIN).ok_or_else(|| Error::Precondition("configuration misses the origin".into()))?;
    let mut total = 0.0;
    for (i, u) in model.offsets().iter().enumerate() {
        let p = model.jump_prob(i, s0);
        if p == 0.0 {
            continue;
        }
        let mut v = 0.0;
        for (g, c) in f.iter() {
            let mut term = c;
            for x in g.sites() {
                let y = u.add(*x);
                let lambda = if y.is_origin() { model.mu1() } else { model.mu() };
                let spin = eta(&y).ok_or_else(|| Error::Precondition(format!("configuration misses site {y:?}")))?;
                term *= lambda * f64::from(spin);
            }
            v += term;
        }
        total += p * v;
    }
    Ok(total)
}

/// `(f_empty, f - f_empty Phi_empty)`.
pub fn split_hat(f: &FieldFunctional) -> (f64, FieldFunctional) {
    let c = f.constant_term();
    (c, f.axpy(-c, &FieldFunctional::constant(1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvariantMean {
    pub value: f64,
    /// Sup-norm residual of the non-constant part plus all pruned mass.
    pub error_bound: f64,
    pub iterations: usize,
}

pub const DEFAULT_MAX_ITER: usize = 10_000;

/// `<f>_Pi` by iterating `T` until the non-constant part is below `tol` in `H_M`.
pub fn invariant_mean(op: &TransferOperator, f: &FieldFunctional, tol: f64) -> Result<InvariantMean> {
    invariant_mean_with(op, f, tol, DEFAULT_MAX_ITER)
}

pub fn invariant_mean_with(
    op: &TransferOperator,
    f: &FieldFunctional,
    tol: f64,
    max_iter: usize,
) -> Result<InvariantMean> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be > 0, got {tol}")));
    }
    let m = op.model().m();
    let mut g = f.clone();
    let mut dropped = 0.0;
    for it in 0..=max_iter {
        let c = g.constant_term();
        let residual = g.hm_norm(m) - c.abs();
        if residual < tol {
            return Ok(InvariantMean { value: c, error_bound: residual.max(0.0) + dropped, iterations: it });
        }
        if it == max_iter {
            return Err(Error::NonConvergence { iterations: max_iter, residual });
        }
        let (h, d) = op.apply_tracked(&g);
        g = h;
        dropped += d;
    }
    unreachable!()
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRecord {
    pub index: usize,
    pub centered_norm: f64,
    /// Ratios `||T^{k+1} f|| / ||T^k f||` for the iterates above the noise floor.
    pub ratios: Vec<f64>,
    pub max_ratio: Option<f64>,
    pub skipped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub mu_hat: f64,
    pub probes: Vec<ProbeRecord>,
    pub iterations: usize,
}

impl ContractionReport {
    /// The conservative `mu_bar = max(|mu1|, mu_hat)`.
    pub fn mu_bar(&self, model: &Model) -> f64 {
        self.mu_hat.max(model.mu1().abs())
    }
}

/// Iterates below this fraction of the probe's initial norm are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Measured contraction of `T` on Pi-centered probes over `k_max` iterations.
pub fn contraction_estimate(
    op: &TransferOperator,
    probes: &[FieldFunctional],
    k_max: usize,
    tol: f64,
) -> Result<ContractionReport> {
    let m = op.model().m();
    let mut records = Vec::with_capacity(probes.len());
    let mut mu_hat: f64 = 0.0;
    for (index, probe) in probes.iter().enumerate() {
        let mean = invariant_mean(op, probe, tol)?;
        let centered = probe.axpy(-mean.value, &FieldFunctional::constant(1.0));
        let norm0 = centered.hm_norm(m);
        let scale = probe.hm_norm(m).max(f64::MIN_POSITIVE);
        if norm0 <= NOISE_FLOOR * scale || centered.is_empty() {
            records.push(ProbeRecord { index, centered_norm: norm0, ratios: vec![], max_ratio: None, skipped: true });
            continue;
        }
        let floor = NOISE_FLOOR * norm0;
        let mut ratios = Vec::new();
        let mut g = centered;
        let mut prev = norm0;
        for _ in 0..k_max {
            let h = op.apply(&g);
            let next = h.hm_norm(m);
            if prev > floor && next > floor * 1e-2 {
                ratios.push(next / prev);
            } else {
                break;
            }
            g = h;
            prev = next;
        }
        let max_ratio = ratios.iter().copied().fold(None, |a: Option<f64>, r| Some(a.map_or(r, |x| x.max(r))));
        if let Some(r) = max_ratio {
            mu_hat = mu_hat.max(r);
        }
        records.push(ProbeRecord { index, centered_norm: norm0, ratios, max_ratio, skipped: max_ratio.is_none() });
    }
    Ok(ContractionReport { mu_hat, probes: records, iterations: k_max })
}
