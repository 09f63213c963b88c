use std::path::Path;

use rayon::prelude::*;
use rwie_core::clt::bernstein::{bernstein_plan, block_sums, remainder_variance_exact};
use rwie_core::clt::bounds::{
    bound_suite, check_contraction, check_g_gamma, check_lemmadue, check_t_oracle, BoundLedger, Status,
};
use rwie_core::clt::covariance::{center_cylinder, cov_exact_series, cov_mc, replica_values, torus_mean, McOptions};
use rwie_core::clt::functional::{truncation_depth, ZetaFunctional};
use rwie_core::clt::gaussianity::{clt_battery, histogram_svg};
use rwie_core::clt::variance::{sigma2_from_series, SeriesOptions};
use rwie_core::sim;
use rwie_core::spectral::TransferOperator;
use rwie_core::torus::{default_quad_depth, spectrum, TorusFunction};
use rwie_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{Functional, Loaded};
use crate::output::Outputs;

// master-seed offsets keeping auxiliary simulations off the CLT replica streams
const MEAN_STREAM: u64 = 0x6d65_616e;
const COV_STREAM: u64 = 0x636f_7673;

pub fn simulate(loaded: &Loaded, out: &Path, replicas: usize) -> Result<(), Error> {
    let run = &loaded.config.run;
    let opts = run.sim_options(&loaded.model);
    let mut outputs = Outputs::new(out, &loaded.hash, "simulate")?;
    let trajectories: Vec<sim::Trajectory> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| sim::run(&loaded.model, run.n, run.seed, r, opts.clone()))
        .collect::<Result<_, _>>()?;
    let mut metas = Vec::new();
    for t in &trajectories {
        let name = if replicas == 1 { "trajectory.csv".to_string() } else { format!("trajectory-r{}.csv", t.replica) };
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        outputs.write(&name, &buf)?;
        metas.push(json!({ "file": name, "replica": t.replica, "meta": t.meta() }));
    }
    outputs.write_json("trajectory.json", json!({ "trajectories": metas }))?;
    outputs.finish()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Check {
    #[value(name = "T-oracle")]
    TOracle,
    #[value(name = "contraction")]
    Contraction,
    #[value(name = "g-gamma")]
    GGamma,
    #[value(name = "lemmadue")]
    Lemmadue,
    #[value(name = "suite")]
    Suite,
}

impl Check {
    fn name(self) -> &'static str {
        match self {
            Check::TOracle => "T-oracle",
            Check::Contraction => "contraction",
            Check::GGamma => "g-gamma",
            Check::Lemmadue => "lemmadue",
            Check::Suite => "suite",
        }
    }
}

#[derive(Serialize)]
struct LedgerSummary<'a> {
    check: &'a str,
    params_hash: &'a str,
    regime: Option<rwie_core::clt::bounds::Regime>,
    rows: usize,
    pass: usize,
    fail: usize,
    not_in_regime: usize,
}

pub fn operator(loaded: &Loaded, out: &Path, check: Check) -> Result<BoundLedger, Error> {
    let op = TransferOperator::new(&loaded.model);
    let cfg = &loaded.config.run.bounds;
    let ledger = match check {
        Check::TOracle => check_t_oracle(&op, cfg)?,
        Check::Contraction => check_contraction(&op, cfg)?.0,
        Check::GGamma => check_g_gamma(&op, cfg)?,
        Check::Lemmadue => check_lemmadue(&op, cfg)?,
        Check::Suite => bound_suite(&op, cfg)?,
    };
    let mut outputs = Outputs::new(out, &loaded.hash, "operator")?;
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf)?;
    outputs.write(&format!("ledger-{}.csv", check.name()), &buf)?;
    outputs.write_json(
        &format!("ledger-{}.json", check.name()),
        LedgerSummary {
            check: check.name(),
            params_hash: &ledger.params_hash,
            regime: ledger.regime,
            rows: ledger.rows.len(),
            pass: ledger.count(Status::Pass),
            fail: ledger.count(Status::Fail),
            not_in_regime: ledger.count(Status::NotInRegime),
        },
    )?;
    outputs.finish()?;
    Ok(ledger)
}

/// Spectrum CSV with the coefficient bound: `sup |f|` for the empty set and
/// `||f||_alpha 2^{-1-alpha} 2^{-k alpha}` (plus quadrature error) at level `k`.
pub fn walsh(name: &str, depth: u32, quad: Option<u32>, out: &Path) -> Result<(), Error> {
    let f = TorusFunction::from_registry(name)?;
    let q = quad.unwrap_or_else(|| default_quad_depth(depth));
    let spec = spectrum(&f, depth, q)?;
    let hash = {
        use sha2::{Digest, Sha256};
        let key = format!("walsh|{name}|{depth}|{q}");
        Sha256::digest(key.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect::<String>()
    };
    let mut outputs = Outputs::new(out, &hash, "walsh")?;
    let quad_err = spec.quadrature_error;
    let bound = |n: u64| {
        if n == 0 {
            f.sup_norm
        } else {
            let k = f64::from(63 - n.leading_zeros());
            f.seminorm_alpha / 2f64.powf(1.0 + f.alpha) * 2f64.powf(-k * f.alpha) + quad_err
        }
    };
    let mut buf = Vec::new();
    spec.write_csv(&mut buf, bound)?;
    outputs.write("spectrum.csv", &buf)?;
    outputs.write_json(
        "spectrum.json",
        json!({
            "function": name,
            "depth": depth,
            "quadrature_depth": q,
            "quadrature_error": quad_err,
            "alpha": f.alpha,
            "seminorm_alpha": f.seminorm_alpha,
            "sup_norm": f.sup_norm,
        }),
    )?;
    outputs.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct BernsteinSummary {
    plan: rwie_core::clt::bernstein::BernsteinPlan,
    /// Mean square of `S^(R)_n` over replicas, divided by `n`.
    remainder_var_over_n: f64,
    /// Same from the stationary covariance series, when it is exact.
    remainder_var_over_n_exact: Option<f64>,
}

pub fn clt(loaded: &Loaded, out: &Path) -> Result<(), Error> {
    let cfg = &loaded.config;
    let run = &cfg.run;
    let model = &loaded.model;
    let tol = run.tolerances.mean;
    let op = TransferOperator::new(model);
    let sim_opts = run.sim_options(model);

    let (zf, series, fit_from, mean_info) = match &loaded.functional {
        Functional::Cylinder(spec) => {
            let (centered, mean) = center_cylinder(&op, spec, tol)?;
            let series = cov_exact_series(&op, &centered, run.t_max, tol)?;
            let w = centered.support_width().max(1) as usize;
            (ZetaFunctional::Cylinder(centered), series, w, json!({ "mean": mean.value, "error": mean.error_bound }))
        }
        Functional::Torus(f) => {
            let depth = cfg.functional.depth.unwrap_or_else(|| truncation_depth(f.alpha, run.n));
            let exact_depth = cfg.functional.exact_depth.min(depth);
            let (mean, se) =
                torus_mean(&op, f, depth, exact_depth, cfg.functional.mean_samples, run.seed ^ MEAN_STREAM, tol)?;
            let zf = ZetaFunctional::Torus { f: f.clone(), depth, shift: mean };
            let mc = McOptions { sim: sim_opts.clone(), mean: Some(0.0) };
            let series = cov_mc(model, &zf, run.t_max, run.cov_n, run.cov_replicas, run.seed ^ COV_STREAM, &mc)?;
            (zf, series, 1, json!({ "mean": mean, "error": se, "depth": depth }))
        }
    };
    let report = sigma2_from_series(&series, SeriesOptions { fit_from, tol, z: run.tolerances.mc_z })?;

    let mut outputs = Outputs::new(out, &loaded.hash, "clt")?;
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    outputs.write("covariance.csv", &buf)?;
    outputs.write_json("variance.json", json!({ "variance": report, "functional_mean": mean_info }))?;

    if !(report.sigma2 > report.uncertainty().max(1e-12)) {
        outputs.finish()?;
        return Err(Error::ZeroDispersion(report.sigma2));
    }

    let plan = bernstein_plan(run.n as u64, run.bernstein.beta, run.bernstein.delta)?;
    let per: Vec<(f64, f64)> = (0..run.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let v = replica_values(model, &zf, run.n, run.seed, r, &sim_opts)?;
            let b = block_sums(&v, &plan)?;
            Ok((v.iter().sum::<f64>(), b.remainder()))
        })
        .collect::<Result<_, Error>>()?;
    let sums: Vec<f64> = per.iter().map(|p| p.0).collect();
    let clt = clt_battery(&sums, run.n, report.sigma2, report.uncertainty(), run.clt)?;
    let nf = run.n as f64;
    let remainder = per.iter().map(|p| p.1 * p.1).sum::<f64>() / per.len() as f64 / nf;
    let exact = matches!(loaded.functional, Functional::Cylinder(_))
        .then(|| remainder_variance_exact(&plan, &series.values) / nf);
    outputs.write_json(
        "clt.json",
        json!({
            "clt": clt,
            "bernstein": BernsteinSummary { plan, remainder_var_over_n: remainder, remainder_var_over_n_exact: exact },
        }),
    )?;
    if cfg.outputs.wants("svg") {
        let z: Vec<f64> = sums.iter().map(|s| s / (nf * report.sigma2).sqrt()).collect();
        outputs.write("histogram.svg", histogram_svg(&z, 40).as_bytes())?;
    }
    outputs.finish()?;
    Ok(())
}
