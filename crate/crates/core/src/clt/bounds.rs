//! Ledger of the closed-form inequalities, each evaluated as a numerical assertion.
//!
//! Inequalities with explicit constants are checked directly. Those with an
//! unspecified constant get a stability check: the constant is fitted on the
//! first part of the size range and the rest must stay below it (with slack).

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::clt::covariance::{cylinder_mean, PairConditional};
use crate::error::Result;
use crate::model::Model;
use crate::spectral::{
    contraction_estimate, g_gamma, g_of_cylinder, g_of_cylinder_with_terminal, invariant_mean, one_step_expectation,
    ContractionReport, FieldFunctional, GammaSet, TimeSet, TransferOperator,
};
use crate::torus::function::TorusFunction;
use crate::torus::partial::{approximation_error_check, modulus};
use crate::torus::walsh::{default_quad_depth, spectrum, WalshSpectrum};
use crate::model::Site;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotInRegime,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "true",
            Status::Fail => "false",
            Status::NotInRegime => "not-in-regime",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerRow {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub status: Status,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Regime {
    pub mu1: f64,
    pub mu_hat: f64,
    /// `max(|mu1|, mu_hat)`.
    pub mu_bar: f64,
    /// `M sqrt(mu_bar (1 + 2 mu_bar))`.
    pub mu_star: f64,
    pub alpha: f64,
    /// `2^-alpha (1 + mu_star)`.
    pub kappa: f64,
}

impl Regime {
    pub fn from_mu_hat(model: &Model, mu_hat: f64, alpha: f64) -> Regime {
        let mu1 = model.mu1();
        let mu_bar = mu_hat.max(mu1.abs());
        let mu_star = model.m() * (mu_bar * (1.0 + 2.0 * mu_bar)).sqrt();
        Regime { mu1, mu_hat, mu_bar, mu_star, alpha, kappa: kappa(alpha, mu_star) }
    }

    pub fn contracting(&self) -> bool {
        self.mu_hat < 1.0
    }
}

pub fn kappa(alpha: f64, mu_star: f64) -> f64 {
    2f64.powf(-alpha) * (1.0 + mu_star)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundLedger {
    pub params_hash: String,
    pub regime: Option<Regime>,
    pub rows: Vec<LedgerRow>,
}

impl BoundLedger {
    pub fn new(params_hash: &str) -> BoundLedger {
        BoundLedger { params_hash: params_hash.to_string(), regime: None, rows: Vec::new() }
    }

    /// `lhs <= rhs + slack`.
    pub fn explicit(&mut self, check: String, lhs: f64, rhs: f64, slack: f64) {
        let status = if lhs <= rhs + slack { Status::Pass } else { Status::Fail };
        self.rows.push(LedgerRow { check, lhs, rhs, margin: rhs - lhs, status });
    }

    pub fn not_in_regime(&mut self, check: String, lhs: f64, rhs: f64) {
        self.rows.push(LedgerRow { check, lhs, rhs, margin: rhs - lhs, status: Status::NotInRegime });
    }

    /// Stability of `lhs / scale` over a size parameter: fitted on the first
    /// `fit` points, the others must not exceed the fit by more than `slack`.
    pub fn stability(&mut self, check: &str, pts: &[(String, f64, f64)], fit: usize, slack: f64) {
        let c = pts.iter().take(fit).map(|(_, l, s)| l / s).fold(0.0, f64::max);
        for (i, (label, lhs, scale)) in pts.iter().enumerate() {
            let factor = if i < fit { 1.0 } else { 1.0 + slack };
            // relative round-off allowance so the fit rows pass by construction
            let rhs = c * scale * factor;
            self.explicit(format!("{check};{label}"), *lhs, rhs, 1e-12 * rhs.abs());
        }
    }

    pub fn extend(&mut self, other: BoundLedger) {
        if self.regime.is_none() {
            self.regime = other.regime;
        }
        self.rows.extend(other.rows);
    }

    pub fn count(&self, status: Status) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }

    pub fn failures(&self) -> Vec<&LedgerRow> {
        self.rows.iter().filter(|r| r.status == Status::Fail).collect()
    }

    pub fn rows_for<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a LedgerRow> + 'a {
        self.rows.iter().filter(move |r| r.check == prefix || r.check.starts_with(&format!("{prefix};")))
    }

    /// CSV `check,params_hash,lhs,rhs,margin,pass`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "check,params_hash,lhs,rhs,margin,pass")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{}",
                r.check,
                self.params_hash,
                r.lhs,
                r.rhs,
                r.margin,
                r.status.as_str()
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    /// Tolerance of invariant means.
    pub tol: f64,
    /// Iterations per contraction probe.
    pub k_max: usize,
    pub random_probes: usize,
    pub probe_terms: usize,
    pub probe_radius: i32,
    pub probe_degree: usize,
    pub seed: u64,
    /// `G_gamma` checks run over all nonempty `gamma` inside `{0..gamma_times-1}`.
    pub gamma_times: u32,
    /// Allowed growth of fitted constants.
    pub slack: f64,
    /// `mu_bar` reference `|mu1| + eps_factor * eps`.
    pub eps_factor: f64,
    /// Registry names of the torus test functions.
    pub functions: Vec<String>,
    /// Exponent used for the regime report.
    pub alpha: f64,
    pub coeff_depth: u32,
    pub agg_max_m: u32,
    pub norma_max_k: u32,
    pub ineq_t_max: usize,
    pub giesse_n: usize,
    pub approx_levels: u32,
    pub oddeven_lags: u32,
    pub probz_n: u32,
    pub probz_fit_n: u32,
    pub hoelder_depth: u32,
    pub modulus_samples: usize,
    /// Functionals and windows for the one-step oracle check.
    pub oracle_functionals: usize,
    pub oracle_windows: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            tol: 1e-12,
            k_max: 10,
            random_probes: 50,
            probe_terms: 8,
            probe_radius: 3,
            probe_degree: 3,
            seed: 7,
            gamma_times: 8,
            slack: 0.05,
            eps_factor: 5.0,
            functions: vec!["linear".into(), "weierstrass:alpha=0.6".into()],
            alpha: 0.6,
            coeff_depth: 10,
            agg_max_m: 6,
            norma_max_k: 8,
            ineq_t_max: 12,
            giesse_n: 12,
            approx_levels: 12,
            oddeven_lags: 10,
            probz_n: 12,
            probz_fit_n: 6,
            hoelder_depth: 6,
            modulus_samples: 1 << 16,
            oracle_functionals: 20,
            oracle_windows: 5,
        }
    }
}

fn gamma_label(mask: u64) -> String {
    let ts: Vec<String> = TimeSet::from_mask(mask).times().iter().map(|t| t.to_string()).collect();
    format!("gamma={{{}}}", ts.join(" "))
}

/// Exact sup of a cylinder function over its `2^width` points.
fn cylinder_sup(spec: &WalshSpectrum) -> f64 {
    let w = spec.support_width();
    (0..1u64 << w).map(|a| spec.eval_bits(a).abs()).fold(0.0, f64::max)
}

/// `G_gamma` for every nonempty mask below `2^times`, sharing suffixes.
fn all_g_gamma(op: &TransferOperator, times: u32) -> Result<BTreeMap<u64, FieldFunctional>> {
    let mut out = BTreeMap::new();
    for mask in 1..(1u64 << times) {
        out.insert(mask, g_gamma(op, &TimeSet::from_mask(mask))?);
    }
    Ok(out)
}

/// Random probes, centered later by the contraction estimate.
pub fn random_probes(model: &Model, cfg: &BoundConfig) -> Vec<FieldFunctional> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.random_probes)
        .map(|_| loop {
            let f = FieldFunctional::random(&mut rng, model.dim(), cfg.probe_terms, cfg.probe_radius, cfg.probe_degree);
            // a probe with only a constant term has nothing to contract
            if f.iter().any(|(g, _)| !g.is_empty()) {
                break f;
            }
        })
        .collect()
}

/// `(T f)(eta)` from the closed form against the direct one-step average, on
/// random functionals and random windows.
pub fn check_t_oracle(op: &TransferOperator, cfg: &BoundConfig) -> Result<BoundLedger> {
    let model = op.model();
    let mut ledger = BoundLedger::new(&model.params().hash());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7a);
    let reach = cfg.probe_radius + model.offsets().iter().map(|u| u.max_abs()).max().unwrap_or(0);
    for i in 0..cfg.oracle_functionals {
        let f = FieldFunctional::random(&mut rng, model.dim(), cfg.probe_terms, cfg.probe_radius, cfg.probe_degree);
        let tf = op.apply(&f);
        for j in 0..cfg.oracle_windows {
            let window = random_window(&mut rng, model.dim(), reach);
            let eta = |s: &Site| window.get(s).copied();
            let a = tf.eval(eta)?;
            let b = one_step_expectation(model, &f, eta)?;
            let scale = f.sup_bound().max(1.0);
            ledger.explicit(format!("T-oracle;f={i};window={j}"), (a - b).abs(), 1e-12 * scale, 0.0);
        }
    }
    Ok(ledger)
}

/// Uniform spins on the box `[-reach, reach]^dim`.
pub fn random_window(rng: &mut impl rand::Rng, dim: usize, reach: i32) -> BTreeMap<Site, i8> {
    let side = (2 * reach + 1) as usize;
    let total = side.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let coords: Vec<i32> = (0..dim)
                .map(|_| {
                    let c = (k % side) as i32 - reach;
                    k /= side;
                    c
                })
                .collect();
            (Site::new(&coords).expect("valid dimension"), if rng.gen::<bool>() { 1 } else { -1 })
        })
        .collect()
}

/// The prefix dynamic program against the product formula for single Walsh terms.
pub fn check_g_gamma(op: &TransferOperator, cfg: &BoundConfig) -> Result<BoundLedger> {
    let m = op.model().m();
    let mut ledger = BoundLedger::new(&op.model().params().hash());
    for mask in 1..(1u64 << cfg.gamma_times.min(6)) {
        let gamma = TimeSet::from_mask(mask);
        let t0 = gamma.min_time().unwrap_or(0);
        let direct = op.pow(&g_gamma(op, &gamma)?, u64::from(t0));
        let dp = g_of_cylinder(op, &WalshSpectrum::from_terms(gamma.max_time().unwrap_or(0) + 1, [(mask, 1.0)]));
        let diff = dp.sub(&direct).hm_norm(m);
        ledger.explicit(format!("g-gamma;{}", gamma_label(mask)), diff, cfg.tol * direct.hm_norm(m).max(1.0), 0.0);
    }
    Ok(ledger)
}

/// Criterion-style contraction check on the random probes alone.
pub fn check_contraction(op: &TransferOperator, cfg: &BoundConfig) -> Result<(BoundLedger, ContractionReport)> {
    let model = op.model();
    let probes = random_probes(model, cfg);
    let report = contraction_estimate(op, &probes, cfg.k_max, cfg.tol)?;
    let reference = model.mu1().abs() + cfg.eps_factor * model.epsilon();
    let mut ledger = BoundLedger::new(&model.params().hash());
    for p in &report.probes {
        if let Some(r) = p.max_ratio {
            ledger.explicit(format!("contraction;probe={}", p.index), r, reference, 0.0);
        }
    }
    ledger.explicit("contraction;mu_hat".into(), report.mu_hat, reference, 0.0);
    ledger.regime = Some(Regime::from_mu_hat(model, report.mu_hat, cfg.alpha));
    Ok((ledger, report))
}

/// Probes for the suite's `mu_hat`: random ones, `Phi_0`, every `G_gamma` and the
/// conditioned test cylinders.
fn suite_probes(
    op: &TransferOperator,
    cfg: &BoundConfig,
    gammas: &BTreeMap<u64, FieldFunctional>,
    functions: &[TorusFunction],
) -> Result<Vec<FieldFunctional>> {
    let mut probes = random_probes(op.model(), cfg);
    probes.push(FieldFunctional::phi0());
    probes.extend(gammas.values().cloned());
    for f in functions {
        for m in 1..=cfg.agg_max_m {
            probes.push(g_of_cylinder(op, &spectrum(f, m, default_quad_depth(m))?));
        }
    }
    Ok(probes)
}

/// Regime from the suite probes.
pub fn measure_regime(op: &TransferOperator, cfg: &BoundConfig) -> Result<(Regime, ContractionReport)> {
    let gammas = all_g_gamma(op, cfg.gamma_times)?;
    let functions = load_functions(cfg)?;
    let probes = suite_probes(op, cfg, &gammas, &functions)?;
    let report = contraction_estimate(op, &probes, cfg.k_max, cfg.tol)?;
    Ok((Regime::from_mu_hat(op.model(), report.mu_hat, cfg.alpha), report))
}

fn load_functions(cfg: &BoundConfig) -> Result<Vec<TorusFunction>> {
    cfg.functions.iter().map(|n| TorusFunction::from_registry(n)).collect()
}

/// `||G_gamma||_M` against the closed form, exhaustively over small `gamma`.
pub fn check_lemmadue(op: &TransferOperator, cfg: &BoundConfig) -> Result<BoundLedger> {
    let gammas = all_g_gamma(op, cfg.gamma_times)?;
    let functions = load_functions(cfg)?;
    let probes = suite_probes(op, cfg, &gammas, &functions)?;
    let report = contraction_estimate(op, &probes, cfg.k_max, cfg.tol)?;
    let regime = Regime::from_mu_hat(op.model(), report.mu_hat, cfg.alpha);
    let mut ledger = BoundLedger::new(&op.model().params().hash());
    ledger.regime = Some(regime);
    lemmadue_rows(&mut ledger, op, &gammas, &regime);
    Ok(ledger)
}

fn lemmadue_rhs(m: f64, mu_bar: f64, k: usize) -> f64 {
    m.powi(k as i32) * mu_bar.powi((k / 2) as i32) * (1.0 + 2.0 * mu_bar).powi(((k - 1) / 2) as i32)
}

/// Gap-aware product bound: `B({t}) = M`, then `M mu_bar^r B` when the new size is
/// even and `M (1 + 2 mu_bar^r) B` when odd.
fn iterazione_rhs(m: f64, mu_bar: f64, gamma: &TimeSet) -> f64 {
    let gaps = gamma.gaps();
    let mut b = m;
    for (i, r) in gaps.iter().rev().enumerate() {
        let size = i + 2;
        let w = mu_bar.powi(*r as i32);
        b *= if size % 2 == 0 { m * w } else { m * (1.0 + 2.0 * w) };
    }
    b
}

fn lemmadue_rows(ledger: &mut BoundLedger, op: &TransferOperator, gammas: &BTreeMap<u64, FieldFunctional>, regime: &Regime) {
    let m = op.model().m();
    for (mask, g) in gammas {
        let lhs = g.hm_norm(m);
        let rhs = lemmadue_rhs(m, regime.mu_bar, mask.count_ones() as usize);
        let check = format!("lemmadue;{}", gamma_label(*mask));
        if regime.contracting() {
            ledger.explicit(check, lhs, rhs, 1e-12 * rhs);
        } else {
            ledger.not_in_regime(check, lhs, rhs);
        }
    }
}

/// Runs every check.
pub fn bound_suite(op: &TransferOperator, cfg: &BoundConfig) -> Result<BoundLedger> {
    let model = op.model();
    let m = model.m();
    let hash = model.params().hash();
    let mut ledger = BoundLedger::new(&hash);
    let functions = load_functions(cfg)?;

    // contraction on random probes
    let (contraction, _) = check_contraction(op, cfg)?;
    let regime_random = contraction.regime;
    ledger.extend(contraction);

    // mu-bar on the full probe set
    let gammas = all_g_gamma(op, cfg.gamma_times)?;
    let probes = suite_probes(op, cfg, &gammas, &functions)?;
    let report = contraction_estimate(op, &probes, cfg.k_max, cfg.tol)?;
    let regime = Regime::from_mu_hat(model, report.mu_hat, cfg.alpha);
    ledger.regime = Some(regime);
    let _ = regime_random;
    for p in &report.probes {
        if let Some(r) = p.max_ratio {
            ledger.explicit(format!("mu-bar;measured;probe={}", p.index), r, report.mu_hat, 0.0);
        }
    }
    let reference = model.mu1().abs() + cfg.eps_factor * model.epsilon();
    ledger.explicit("mu-bar;mu1+5eps".into(), report.mu_hat, reference, 0.0);

    if !regime.contracting() {
        ledger.not_in_regime("suite;mu_hat".into(), regime.mu_hat, 1.0);
        return Ok(ledger);
    }
    let mu_bar = regime.mu_bar;
    let mu_star = regime.mu_star;

    lemmadue_rows(&mut ledger, op, &gammas, &regime);
    for (mask, g) in &gammas {
        let lhs = g.hm_norm(m);
        let rhs = iterazione_rhs(m, mu_bar, &TimeSet::from_mask(*mask));
        ledger.explicit(format!("iterazione;{}", gamma_label(*mask)), lhs, rhs, 1e-12 * rhs);
    }

    // agg: stability over the window width m
    for f in &functions {
        let mut pts = Vec::new();
        for w in 1..=cfg.agg_max_m {
            let spec = spectrum(f, w, default_quad_depth(w))?;
            let lhs = g_of_cylinder(op, &spec).hm_norm(m);
            let scale = spec.max_abs() * (1.0 + mu_star).powi(w as i32);
            pts.push((format!("m={w}"), lhs, scale));
        }
        ledger.stability(&format!("agg;f={}", f.name), &pts, (cfg.agg_max_m as usize).div_ceil(2), cfg.slack);
    }

    // norma: per-level contributions decay like kappa^k (stability), and their
    // geometric sum bounds the whole conditioned functional; gated on kappa
    for f in &functions {
        let k_f = kappa(f.alpha, mu_star);
        if k_f >= 1.0 {
            ledger.not_in_regime(format!("norma;f={}", f.name), k_f, 1.0);
            continue;
        }
        let levels = cfg.norma_max_k;
        let spec = spectrum(f, levels, default_quad_depth(levels))?;
        let norm = f.c_alpha_norm();
        let mut pts = Vec::new();
        for k in 0..levels {
            let part = WalshSpectrum::from_terms(k + 1, spec.iter().filter(|(n, _)| *n > 0 && 63 - n.leading_zeros() == k));
            pts.push((format!("level={k}"), g_of_cylinder(op, &part).hm_norm(m), norm * k_f.powi(k as i32)));
        }
        let fit = (levels as usize).div_ceil(2);
        let c_level = pts.iter().take(fit).map(|(_, l, s)| l / s).fold(0.0, f64::max);
        ledger.stability(&format!("norma;f={};levels", f.name), &pts, fit, cfg.slack);
        let total = g_of_cylinder(op, &spec).hm_norm(m);
        let rhs = spec.coeff(0).abs() + c_level * (1.0 + cfg.slack) * norm / (1.0 - k_f);
        ledger.explicit(format!("norma;f={};total", f.name), total, rhs, 1e-12 * rhs);
    }

    coefficient_rows(&mut ledger, &functions, cfg)?;

    // cylinder test functionals for the system inequalities
    let mut cylinders: Vec<(String, WalshSpectrum)> = vec![("zeta0".into(), WalshSpectrum::from_terms(1, [(1, 1.0)]))];
    for f in &functions {
        cylinders.push((format!("{}@3", f.name), spectrum(f, 3, default_quad_depth(3))?));
    }
    for (name, raw) in &cylinders {
        let mean = cylinder_mean(op, raw, cfg.tol)?.value;
        let mut spec = raw.clone();
        spec.set(0, raw.coeff(0) - mean);
        system_rows(&mut ledger, op, cfg, &regime, name, &spec)?;
    }

    // nnjeravv: Hoelder functionals, gated on kappa
    for f in &functions {
        let k_f = kappa(f.alpha, mu_star);
        let check = format!("nnjeravv;f={}", f.name);
        if k_f >= 1.0 {
            ledger.not_in_regime(check, k_f, 1.0);
            continue;
        }
        let raw = spectrum(f, cfg.hoelder_depth, default_quad_depth(cfg.hoelder_depth))?;
        let mean = cylinder_mean(op, &raw, cfg.tol)?.value;
        let mut spec = raw.clone();
        spec.set(0, raw.coeff(0) - mean);
        let norm2 = f.c_alpha_norm().powi(2);
        let mut pair = PairConditional::new(op, &spec);
        let pts: Vec<(String, f64, f64)> = (0..=cfg.ineq_t_max)
            .map(|t| (format!("t={t}"), pair.at(t).hm_norm(m), norm2 * k_f.powi(t as i32)))
            .collect();
        ledger.stability(&check, &pts, cfg.ineq_t_max.div_ceil(2), cfg.slack);
    }

    // njerav5: explicit
    for f in &functions {
        for n in 1..=cfg.approx_levels {
            let r = approximation_error_check(f, n)?;
            ledger.explicit(format!("njerav5;f={};n={n}", f.name), r.sup_error, r.bound, r.quadrature_slack);
        }
    }

    oddeven_rows(&mut ledger, op, cfg, &regime)?;
    probz_rows(&mut ledger, op, cfg, &regime)?;
    Ok(ledger)
}

/// Coefficient bounds for every `gamma` inside `{0..coeff_depth-1}`.
pub fn coefficient_rows(ledger: &mut BoundLedger, functions: &[TorusFunction], cfg: &BoundConfig) -> Result<()> {
    let k = cfg.coeff_depth;
    for f in functions {
        let spec = spectrum(f, k, default_quad_depth(k))?;
        let quad = spec.quadrature_error;
        let omegas: Vec<f64> = (0..k)
            .map(|t| modulus(f, 0.5f64.powi(t as i32 + 1), cfg.modulus_samples))
            .collect::<Result<_>>()?;
        for n in 1..(1u64 << k) {
            let top = 63 - n.leading_zeros();
            let c = spec.coeff(n).abs();
            let rhs = omegas[top as usize] * 0.5f64.powi(top as i32 + 2);
            ledger.explicit(format!("stimacoeff;f={};n={n}", f.name), c, rhs, quad + 1e-9 * rhs);
            let rhs = f.seminorm_alpha / 2f64.powf(1.0 + f.alpha) * 2f64.powf(-(top as f64) * f.alpha);
            ledger.explicit(format!("correz;f={};n={n}", f.name), c, rhs, quad + 1e-9 * rhs);
        }
    }
    Ok(())
}

/// ineq1, giesse (both parts) and ineq2 for one centered cylinder.
fn system_rows(
    ledger: &mut BoundLedger,
    op: &TransferOperator,
    cfg: &BoundConfig,
    regime: &Regime,
    name: &str,
    spec: &WalshSpectrum,
) -> Result<()> {
    let m = op.model().m();
    let width = spec.support_width().max(1) as i32;
    let sup = cylinder_sup(spec);
    let grow = (1.0 + regime.mu_star).powi(width);

    let mut pair = PairConditional::new(op, spec);
    let pts: Vec<(String, f64, f64)> = (0..=cfg.ineq_t_max)
        .map(|t| {
            let lag = (t as i32 - width + 1).max(0);
            (format!("t={t}"), pair.at(t).hm_norm(m), sup * sup * regime.mu_bar.powi(lag) * grow * grow)
        })
        .collect();
    ledger.stability(&format!("ineq1;f={name}"), &pts, cfg.ineq_t_max.div_ceil(2), cfg.slack);

    // first part of giesse: G of S_n = sum_j T^j G^(f)
    let n_max = cfg.giesse_n;
    let g = g_of_cylinder(op, spec);
    let mut it = g.clone();
    let mut acc = FieldFunctional::zero();
    let mut pts = Vec::new();
    for n in 1..=n_max {
        acc = acc.add(&it);
        it = op.apply(&it);
        pts.push((format!("n={n}"), acc.hm_norm(m), sup * grow));
    }
    ledger.stability(&format!("giesse;S;f={name}"), &pts, n_max.div_ceil(2), cfg.slack);

    // second part through the ineq2 sums; pieces[t][j] = T^j hat G^(f f(S^t))
    let hat = |h: FieldFunctional| -> Result<FieldFunctional> {
        let c = invariant_mean(op, &h, cfg.tol)?.value;
        Ok(h.axpy(-c, &FieldFunctional::constant(1.0)))
    };
    let mut pair = PairConditional::new(op, spec);
    let mut pieces: Vec<Vec<FieldFunctional>> = Vec::with_capacity(n_max);
    for t in 0..n_max {
        let mut row = vec![hat(pair.at(t))?];
        for _ in 1..n_max - t {
            let next = op.apply(row.last().expect("nonempty"));
            row.push(next);
        }
        pieces.push(row);
    }
    let norms: Vec<Vec<f64>> = pieces.iter().map(|r| r.iter().map(|h| h.hm_norm(m)).collect()).collect();
    let mut direct = FieldFunctional::zero();
    let mut pts = Vec::new();
    for n in 1..=n_max {
        let mut bound: f64 = (0..n).map(|j| norms[0][j]).sum();
        for j in 0..n.saturating_sub(1) {
            for t in 1..n - j {
                bound += 2.0 * norms[t][j];
            }
        }
        // terms with j + t = n - 1 are new at this n
        direct = direct.add(&pieces[0][n - 1]);
        for t in 1..n {
            direct = direct.axpy(2.0, &pieces[t][n - 1 - t]);
        }
        let lhs = direct.hm_norm(m);
        ledger.explicit(format!("ineq2;f={name};n={n}"), lhs, bound, 1e-12 * bound);
        pts.push((format!("n={n}"), bound, sup * sup * f64::from(width) * grow));
    }
    ledger.stability(&format!("giesse;S2;f={name}"), &pts, n_max.div_ceil(2), cfg.slack);
    Ok(())
}

/// `<Psi_gamma G(eta_t) | M_0>` for odd and even centered `G`, stability of `C_*` in `t - t_k`.
fn oddeven_rows(ledger: &mut BoundLedger, op: &TransferOperator, cfg: &BoundConfig, regime: &Regime) -> Result<()> {
    let m = op.model().m();
    let centered = |h: FieldFunctional| -> Result<FieldFunctional> {
        let c = invariant_mean(op, &h, cfg.tol)?.value;
        Ok(h.axpy(-c, &FieldFunctional::constant(1.0)))
    };
    let terminals = [
        ("odd", centered(FieldFunctional::phi0())?),
        ("even", centered(FieldFunctional::phi(GammaSet::new(vec![Site::ORIGIN, first_offset(op)])))?),
    ];
    for mask in [1u64, 0b101, 0b1011] {
        let gamma = TimeSet::from_mask(mask);
        let tk = gamma.max_time().unwrap_or(0);
        let spec = WalshSpectrum::from_terms(tk + 1, [(mask, 1.0)]);
        for (kind, g) in &terminals {
            let gn = g.hm_norm(m);
            let mut term = g.clone();
            let mut pts = Vec::new();
            for s in 0..=cfg.oddeven_lags {
                // g_of_cylinder_with_terminal conditions H(eta_{w-1}); T^s moves it to t_k + s
                let lhs = g_of_cylinder_with_terminal(op, &spec, tk + 1, &term).hm_norm(m);
                let scale = gn * regime.mu_bar.powi(s as i32) * regime.mu_star.powi(gamma.len() as i32);
                pts.push((format!("s={s}"), lhs, scale));
                term = op.apply(&term);
            }
            ledger.stability(
                &format!("oddeven;{};G={kind}", gamma_label(mask)),
                &pts,
                (cfg.oddeven_lags as usize).div_ceil(2).max(1),
                cfg.slack,
            );
        }
    }
    Ok(())
}

fn first_offset(op: &TransferOperator) -> Site {
    let mut c = vec![0; op.model().dim()];
    c[0] = 1;
    Site::new(&c).expect("valid dimension")
}

/// `P(Z_n)` for the all-(+1) point against `C ((1 + mu_*)/2)^n`.
fn probz_rows(ledger: &mut BoundLedger, op: &TransferOperator, cfg: &BoundConfig, regime: &Regime) -> Result<()> {
    let pts = probz_values(op, cfg.probz_n, cfg.tol)?
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let n = i as i32 + 1;
            (format!("n={n}"), p, ((1.0 + regime.mu_star) / 2.0).powi(n))
        })
        .collect::<Vec<_>>();
    ledger.stability("probz", &pts, cfg.probz_fit_n as usize, cfg.slack);
    Ok(())
}

/// `P(zeta_0 = .. = zeta_{n-1} = +1)` for `n = 1..=n_max`, from the exact Walsh sums.
pub fn probz_values(op: &TransferOperator, n_max: u32, tol: f64) -> Result<Vec<f64>> {
    (1..=n_max)
        .map(|n| {
            let w = 0.5f64.powi(n as i32);
            let spec = WalshSpectrum::from_terms(n, (0..1u64 << n).map(|g| (g, w)));
            Ok(cylinder_mean(op, &spec, tol)?.value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn closed_forms() {
        assert_eq!(lemmadue_rhs(2.0, 0.5, 1), 2.0);
        assert_eq!(lemmadue_rhs(2.0, 0.5, 2), 2.0);
        assert_eq!(lemmadue_rhs(2.0, 0.5, 3), 8.0);
        let g = TimeSet::new(vec![0, 2, 3]);
        // sizes 2 (gap 1, even) then 3 (gap 2, odd)
        let b = iterazione_rhs(2.0, 0.5, &g);
        assert!((b - 2.0 * (2.0 * 0.5) * (2.0 * (1.0 + 2.0 * 0.25))).abs() < 1e-12);
        assert!(b <= lemmadue_rhs(2.0, 0.5, 3));
    }

    #[test]
    fn stability_rows_fit_then_check() {
        let mut l = BoundLedger::new("h");
        let pts = vec![("a".into(), 1.0, 1.0), ("b".into(), 2.0, 4.0), ("c".into(), 1.04, 1.0), ("d".into(), 1.2, 1.0)];
        l.stability("x", &pts, 2, 0.05);
        let st: Vec<Status> = l.rows.iter().map(|r| r.status).collect();
        assert_eq!(st, vec![Status::Pass, Status::Pass, Status::Pass, Status::Fail]);
    }

    #[test]
    fn oracle_and_g_gamma_checks() {
        let op = TransferOperator::new(&Model::new(ModelParams::default_lazy()).unwrap());
        let cfg = BoundConfig { oracle_functionals: 5, oracle_windows: 3, gamma_times: 5, ..BoundConfig::default() };
        let l = check_t_oracle(&op, &cfg).unwrap();
        assert_eq!(l.rows.len(), 15);
        assert!(l.failures().is_empty());
        let l = check_g_gamma(&op, &cfg).unwrap();
        assert_eq!(l.rows.len(), 31);
        assert!(l.failures().is_empty(), "{:?}", l.failures());
    }

    #[test]
    fn probz_is_a_decreasing_probability() {
        let op = TransferOperator::new(&Model::new(ModelParams::default_lazy()).unwrap());
        let p = probz_values(&op, 6, 1e-13).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        let op0 = TransferOperator::new(&Model::new(ModelParams::lazy_walk(0.0, 0.1, 1.0, 1.5)).unwrap());
        // two spins: (1 + cov(1)) / 4
        let p = probz_values(&op0, 2, 1e-13).unwrap();
        assert!((p[1] - (1.0 + 0.05) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let mut l = BoundLedger::new("abc");
        l.explicit("lemmadue;gamma={0 1}".into(), 1.0, 2.0, 0.0);
        l.not_in_regime("norma;f=linear".into(), 1.1, 1.0);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "check,params_hash,lhs,rhs,margin,pass");
        assert!(lines[1].ends_with(",true") && lines[1].starts_with("lemmadue;gamma={0 1},abc,"));
        assert!(lines[2].ends_with(",not-in-regime"));
    }
}
