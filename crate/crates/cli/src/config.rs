use std::path::{Path, PathBuf};

use rwie_core::clt::bounds::BoundConfig;
use rwie_core::clt::gaussianity::CltThresholds;
use rwie_core::model::{validate_params, ParamsDoc};
use rwie_core::sim::{Engine, InitialLaw, SimOptions};
use rwie_core::torus::{TorusFunction, WalshSpectrum};
use rwie_core::{Error, Model, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "RWIE_OUT_DIR";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_params")]
    pub params: ParamsDoc,
    #[serde(default)]
    pub functional: FunctionalConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

fn default_params() -> ParamsDoc {
    ParamsDoc::from(&ModelParams::default_lazy())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalConfig {
    /// `zeta0`, `zero`, `cylinder` (with `terms`), or a torus registry name.
    pub name: String,
    /// Walsh terms `[n, coeff]` of a `cylinder` functional.
    pub terms: Vec<(u64, f64)>,
    /// Truncation depth of torus functionals; default `floor((4/alpha) log2 n)`.
    pub depth: Option<u32>,
    /// Depth of the exact part of a torus functional's stationary mean.
    pub exact_depth: u32,
    /// Simulated steps for the remainder of that mean.
    pub mean_samples: usize,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        FunctionalConfig { name: "zeta0".into(), terms: vec![], depth: None, exact_depth: 10, mean_samples: 400_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EngineName {
    #[default]
    Lazy,
    Eager,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Residual of invariant means.
    pub mean: f64,
    /// Standard errors a Monte Carlo covariance must clear to enter the decay fit.
    pub mc_z: f64,
    /// Forget horizon is chosen so that `|mu|^tau` is below this, unless given.
    pub forget: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { mean: 1e-12, mc_z: 3.0, forget: None }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernsteinConfig {
    pub beta: f64,
    pub delta: f64,
}

impl Default for BernsteinConfig {
    fn default() -> Self {
        BernsteinConfig { beta: 0.24, delta: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub t_max: usize,
    pub burn_in: u64,
    pub forget_horizon: Option<u64>,
    pub engine: EngineName,
    /// Trajectory length and replicas of the Monte Carlo covariance series
    /// (used for torus functionals).
    pub cov_n: usize,
    pub cov_replicas: usize,
    pub tolerances: Tolerances,
    pub bernstein: BernsteinConfig,
    pub clt: CltThresholds,
    pub bounds: BoundConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 10_000,
            replicas: 2000,
            seed: 1,
            t_max: 30,
            burn_in: 100,
            forget_horizon: None,
            engine: EngineName::Lazy,
            cov_n: 20_000,
            cov_replicas: 200,
            tolerances: Tolerances::default(),
            bernstein: BernsteinConfig::default(),
            clt: CltThresholds::default(),
            bounds: BoundConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Any of `csv`, `json`, `svg`.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, formats: vec!["csv".into(), "json".into()] }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

/// A functional ready for the library.
#[derive(Clone, Debug)]
pub enum Functional {
    Cylinder(WalshSpectrum),
    Torus(TorusFunction),
}

/// Failure while reading or validating a config; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "config error:")?;
        for m in &self.0 {
            writeln!(f, "  - {m}")?;
        }
        Ok(())
    }
}

pub struct Loaded {
    pub config: ExperimentConfig,
    pub model: Model,
    pub functional: Functional,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(vec![format!("{}: {e}", path.display())]))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Loaded, ConfigError> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError(vec![e.to_string()]))?;
    let mut problems = Vec::new();
    if config.schema_version != SCHEMA_VERSION {
        problems.push(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", config.schema_version));
    }
    let params = match ModelParams::try_from(config.params.clone()) {
        Ok(p) => {
            problems.extend(validate_params(&p).iter().map(|v| v.to_string()));
            Some(p)
        }
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    let b = config.run.bernstein;
    if !(0.0 < b.delta && b.delta < b.beta && b.beta < 0.25) {
        problems.push(format!("bernstein: need 0 < delta < beta < 1/4, got beta={}, delta={}", b.beta, b.delta));
    }
    if config.run.n == 0 {
        problems.push("run.n must be >= 1".into());
    }
    if config.run.replicas == 0 {
        problems.push("run.replicas must be >= 1".into());
    }
    if !(config.run.tolerances.mean > 0.0) {
        problems.push("run.tolerances.mean must be > 0".into());
    }
    for f in &config.outputs.formats {
        if !["csv", "json", "svg"].contains(&f.as_str()) {
            problems.push(format!("unknown output format {f:?}"));
        }
    }
    let functional = match build_functional(&config.functional) {
        Ok(f) => Some(f),
        Err(e) => {
            problems.push(e);
            None
        }
    };
    if !problems.is_empty() {
        return Err(ConfigError(problems));
    }
    let model = Model::new(params.expect("checked")).map_err(|e| ConfigError(vec![e.to_string()]))?;
    let hash = config_hash(&config);
    Ok(Loaded { config, model, functional: functional.expect("checked"), hash })
}

fn build_functional(fc: &FunctionalConfig) -> Result<Functional, String> {
    match fc.name.as_str() {
        "zeta0" => Ok(Functional::Cylinder(WalshSpectrum::from_terms(1, [(1, 1.0)]))),
        "zero" => Ok(Functional::Cylinder(WalshSpectrum::new(1))),
        "cylinder" => {
            if fc.terms.is_empty() {
                return Err("functional \"cylinder\" needs terms".into());
            }
            let width = fc.terms.iter().map(|(n, _)| 64 - n.leading_zeros()).max().unwrap_or(0);
            if width > 20 {
                return Err(format!("cylinder window {width} > 20"));
            }
            Ok(Functional::Cylinder(WalshSpectrum::from_terms(width.max(1), fc.terms.iter().copied())))
        }
        name => TorusFunction::from_registry(name).map(Functional::Torus).map_err(|e: Error| e.to_string()),
    }
}

/// Hash of everything that affects numbers (the output location does not).
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.outputs.dir = None;
    let bytes = serde_json::to_vec(&c).expect("config serializes");
    Sha256::digest(&bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn sim_options(&self, model: &Model) -> SimOptions {
        let forget_horizon = self.forget_horizon.or_else(|| {
            self.tolerances.forget.map(|t| rwie_core::sim::horizon_for_tolerance(model.mu(), t))
        });
        SimOptions {
            engine: match self.engine {
                EngineName::Lazy => Engine::Lazy,
                EngineName::Eager => Engine::Eager,
            },
            forget_horizon,
            burn_in: self.burn_in,
            initial: InitialLaw::ProductUniform,
            mirrored: false,
        }
    }
}

/// `--out`, then the config, then the environment, then `./rwie-out`.
pub fn output_dir(flag: Option<&Path>, config: Option<&OutputConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config.and_then(|c| c.dir.clone()) {
        return p;
    }
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("rwie-out"))
}
