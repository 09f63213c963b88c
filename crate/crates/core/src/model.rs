//! Model constants and the single-site, single-step kernels.
//!
//! The walker jumps by `u` with probability `P0(u) + eps * c(u) * s`, where `s`
//! is the environment spin under the walker. Every environment site evolves by
//! the symmetric two-state kernel `Q0` (second eigenvalue `mu`), except the site
//! occupied by the walker, which uses `Q1` with eigenvalue `mu1 = mu + eps * rho`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;
/// Largest admissible |coordinate| of a jump offset.
pub const MAX_RANGE: i32 = 64;
/// Absolute slack for all probability checks.
pub const PROB_TOL: f64 = 1e-12;

/// A lattice site (or offset) in Z^d, d <= [`MAX_DIM`]. Unused coordinates are zero,
/// so sites of the same model compare and hash structurally.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn new(coords: &[i32]) -> Result<Site> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Malformed(format!(
                "site must have 1..={MAX_DIM} coordinates, got {}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site(c))
    }

    /// One-dimensional shorthand.
    pub fn x(x: i32) -> Site {
        let mut c = [0; MAX_DIM];
        c[0] = x;
        Site(c)
    }

    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }

    pub fn is_origin(&self) -> bool {
        self.0 == [0; MAX_DIM]
    }

    pub fn neg(self) -> Site {
        let mut c = self.0;
        c.iter_mut().for_each(|v| *v = -*v);
        Site(c)
    }

    pub fn add(self, other: Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(other.0) {
            *a += b;
        }
        Site(c)
    }

    pub fn max_abs(&self) -> i32 {
        self.0.iter().map(|v| v.abs()).max().unwrap_or(0)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.0.iter().rposition(|&v| v != 0).unwrap_or(0);
        write!(f, "{:?}", &self.0[..=last])
    }
}

/// Raw model constants as entered by the user. Not necessarily valid; see
/// [`validate_params`] and [`Model::new`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub p0: BTreeMap<Site, f64>,
    pub c: BTreeMap<Site, f64>,
    pub epsilon: f64,
    pub mu: f64,
    pub rho: f64,
    pub m: f64,
}

impl ModelParams {
    /// The lazy nearest-neighbour walk in d = 1 with
    /// `P0 = {-1: 1/4, 0: 1/2, 1: 1/4}`, `c = {1: 1/2, -1: -1/2}`.
    pub fn lazy_walk(epsilon: f64, mu: f64, rho: f64, m: f64) -> ModelParams {
        let p0 = BTreeMap::from([(Site::x(-1), 0.25), (Site::x(0), 0.5), (Site::x(1), 0.25)]);
        let c = BTreeMap::from([(Site::x(-1), -0.5), (Site::x(0), 0.0), (Site::x(1), 0.5)]);
        ModelParams { dim: 1, p0, c, epsilon, mu, rho, m }
    }

    /// Default experiment parameters: lazy walk, eps = 0.05, mu = 0.1, rho = 1, M = 1.5.
    pub fn default_lazy() -> ModelParams {
        Self::lazy_walk(0.05, 0.1, 1.0, 1.5)
    }

    pub fn mu1(&self) -> f64 {
        self.mu + self.epsilon * self.rho
    }

    /// Union of the supports of `P0` and `c`, in canonical order.
    pub fn support(&self) -> Vec<Site> {
        let mut s: Vec<Site> = self.p0.keys().chain(self.c.keys()).copied().collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn p0_at(&self, u: &Site) -> f64 {
        self.p0.get(u).copied().unwrap_or(0.0)
    }

    pub fn c_at(&self, u: &Site) -> f64 {
        self.c.get(u).copied().unwrap_or(0.0)
    }

    /// Same model with every `c(u)` negated.
    pub fn with_negated_c(&self) -> ModelParams {
        let mut p = self.clone();
        p.c.values_mut().for_each(|v| *v = -*v);
        p
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ParamsDoc::from(self)).expect("params serialize")
    }

    pub fn from_json(s: &str) -> Result<ModelParams> {
        let doc: ParamsDoc = serde_json::from_str(s)?;
        doc.try_into()
    }

    /// Short stable fingerprint of the parameters (hex of a SHA-256 prefix).
    pub fn hash(&self) -> String {
        short_hash(self.to_json().as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON document form: offsets are arrays of `d` integers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub d: usize,
    #[serde(rename = "P0")]
    pub p0: Vec<(Vec<i32>, f64)>,
    pub c: Vec<(Vec<i32>, f64)>,
    pub epsilon: f64,
    pub mu: f64,
    pub rho: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl From<&ModelParams> for ParamsDoc {
    fn from(p: &ModelParams) -> Self {
        let conv = |m: &BTreeMap<Site, f64>| {
            m.iter()
                .map(|(k, v)| (k.coords(p.dim).to_vec(), *v))
                .collect::<Vec<_>>()
        };
        ParamsDoc {
            d: p.dim,
            p0: conv(&p.p0),
            c: conv(&p.c),
            epsilon: p.epsilon,
            mu: p.mu,
            rho: p.rho,
            m: p.m,
        }
    }
}

impl TryFrom<ParamsDoc> for ModelParams {
    type Error = Error;

    fn try_from(doc: ParamsDoc) -> Result<ModelParams> {
        if doc.d == 0 || doc.d > MAX_DIM {
            return Err(Error::Malformed(format!("d must be in 1..={MAX_DIM}, got {}", doc.d)));
        }
        let conv = |entries: Vec<(Vec<i32>, f64)>, name: &str| -> Result<BTreeMap<Site, f64>> {
            let mut out = BTreeMap::new();
            for (off, v) in entries {
                if off.len() != doc.d {
                    return Err(Error::Malformed(format!(
                        "{name} offset {off:?} has {} coordinates, expected {}",
                        off.len(),
                        doc.d
                    )));
                }
                if out.insert(Site::new(&off)?, v).is_some() {
                    return Err(Error::Malformed(format!("{name} offset {off:?} listed twice")));
                }
            }
            Ok(out)
        };
        Ok(ModelParams {
            dim: doc.d,
            p0: conv(doc.p0, "P0")?,
            c: conv(doc.c, "c")?,
            epsilon: doc.epsilon,
            mu: doc.mu,
            rho: doc.rho,
            m: doc.m,
        })
    }
}

/// A violated parameter invariant.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub enum Violation {
    NonFinite { field: &'static str },
    OffsetOutOfRange { offset: Site },
    P0NotNormalized { sum: f64 },
    P0OutOfUnit { offset: Site, value: f64 },
    P0NotEven { offset: Site },
    CNotOdd { offset: Site },
    JumpOutOfRange { offset: Site, sign: i8, value: f64 },
    EpsilonNegative { epsilon: f64 },
    MuOutOfRange { mu: f64 },
    Mu1OutOfRange { mu1: f64 },
    MNotAboveOne { m: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field } => write!(f, "{field} is not finite"),
            Violation::OffsetOutOfRange { offset } => {
                write!(f, "offset {offset:?} exceeds range {MAX_RANGE}")
            }
            Violation::P0NotNormalized { sum } => write!(f, "sum of P0 is {sum}, expected 1"),
            Violation::P0OutOfUnit { offset, value } => {
                write!(f, "P0({offset:?}) = {value} not in [0,1]")
            }
            Violation::P0NotEven { offset } => write!(f, "P0 not even at {offset:?}"),
            Violation::CNotOdd { offset } => write!(f, "c not odd at {offset:?}"),
            Violation::JumpOutOfRange { offset, sign, value } => write!(
                f,
                "P0({offset:?}) {} eps*c({offset:?}) = {value} not in [0,1)",
                if *sign > 0 { "+" } else { "-" }
            ),
            Violation::EpsilonNegative { epsilon } => write!(f, "epsilon = {epsilon} < 0"),
            Violation::MuOutOfRange { mu } => write!(f, "|mu| = {} >= 1", mu.abs()),
            Violation::Mu1OutOfRange { mu1 } => write!(f, "|mu1| = {} >= 1", mu1.abs()),
            Violation::MNotAboveOne { m } => write!(f, "M = {m} <= 1"),
        }
    }
}

/// Every violated invariant, in a canonical order. Empty iff the parameters are valid.
pub fn validate_params(p: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();
    for (field, v) in [("epsilon", p.epsilon), ("mu", p.mu), ("rho", p.rho), ("M", p.m)] {
        if !v.is_finite() {
            out.push(Violation::NonFinite { field });
        }
    }
    if p.p0.values().chain(p.c.values()).any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite { field: "kernel entry" });
    }
    let support = p.support();
    for u in &support {
        if u.max_abs() > MAX_RANGE {
            out.push(Violation::OffsetOutOfRange { offset: *u });
        }
    }
    let sum: f64 = p.p0.values().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        out.push(Violation::P0NotNormalized { sum });
    }
    for (u, &v) in &p.p0 {
        if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v) {
            out.push(Violation::P0OutOfUnit { offset: *u, value: v });
        }
    }
    for u in &support {
        if (p.p0_at(u) - p.p0_at(&u.neg())).abs() > PROB_TOL {
            out.push(Violation::P0NotEven { offset: *u });
        }
    }
    for u in &support {
        if (p.c_at(u) + p.c_at(&u.neg())).abs() > PROB_TOL {
            out.push(Violation::CNotOdd { offset: *u });
        }
    }
    for u in &support {
        for sign in [1i8, -1] {
            let value = p.p0_at(u) + f64::from(sign) * p.epsilon * p.c_at(u);
            if value < -PROB_TOL || value >= 1.0 {
                out.push(Violation::JumpOutOfRange { offset: *u, sign, value });
            }
        }
    }
    if p.epsilon < 0.0 {
        out.push(Violation::EpsilonNegative { epsilon: p.epsilon });
    }
    if p.mu.abs() >= 1.0 {
        out.push(Violation::MuOutOfRange { mu: p.mu });
    }
    if p.mu1().abs() >= 1.0 {
        out.push(Violation::Mu1OutOfRange { mu1: p.mu1() });
    }
    if !(p.m > 1.0) {
        out.push(Violation::MNotAboveOne { m: p.m });
    }
    out
}

/// Symmetric row-stochastic 2x2 kernel on {+1, -1} with eigenvalues {1, lambda}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricKernel {
    lambda: f64,
}

impl SymmetricKernel {
    pub fn new(lambda: f64) -> Result<SymmetricKernel> {
        if !(lambda.abs() < 1.0) {
            return Err(Error::Precondition(format!("kernel eigenvalue {lambda} not in (-1,1)")));
        }
        Ok(SymmetricKernel { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Rows and columns indexed by (+1, -1).
    pub fn entries(&self) -> [[f64; 2]; 2] {
        let stay = (1.0 + self.lambda) / 2.0;
        let flip = (1.0 - self.lambda) / 2.0;
        [[stay, flip], [flip, stay]]
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        [1.0, self.lambda]
    }

    /// Probability of a sign change after `steps` applications.
    pub fn flip_probability(&self, steps: u64) -> f64 {
        let steps = i32::try_from(steps).unwrap_or(i32::MAX);
        (1.0 - self.lambda.powi(steps)) / 2.0
    }

    /// Kernel product (as matrices). The symmetric class is a semigroup:
    /// `K(a) K(b) = K(a b)`.
    pub fn compose(&self, other: &SymmetricKernel) -> [[f64; 2]; 2] {
        let a = self.entries();
        let b = other.entries();
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (0..2).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    pub fn stationary(&self) -> [f64; 2] {
        [0.5, 0.5]
    }
}

/// Validated model with precomputed jump tables. Immutable once built.
#[derive(Clone, Debug)]
pub struct Model {
    params: ModelParams,
    offsets: Vec<Site>,
    p0: Vec<f64>,
    c: Vec<f64>,
    q0: SymmetricKernel,
    q1: SymmetricKernel,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Model> {
        let violations = validate_params(&params);
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations));
        }
        let offsets = params.support();
        let p0 = offsets.iter().map(|u| params.p0_at(u)).collect();
        let c = offsets.iter().map(|u| params.c_at(u)).collect();
        let q0 = SymmetricKernel::new(params.mu)?;
        let q1 = SymmetricKernel::new(params.mu1())?;
        Ok(Model { params, offsets, p0, c, q0, q1 })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn mu(&self) -> f64 {
        self.params.mu
    }

    pub fn mu1(&self) -> f64 {
        self.params.mu1()
    }

    pub fn m(&self) -> f64 {
        self.params.m
    }

    pub fn q0(&self) -> SymmetricKernel {
        self.q0
    }

    pub fn q1(&self) -> SymmetricKernel {
        self.q1
    }

    /// Jump offsets in canonical order, with `P0` and `c` aligned.
    pub fn offsets(&self) -> &[Site] {
        &self.offsets
    }

    pub fn p0_table(&self) -> &[f64] {
        &self.p0
    }

    pub fn c_table(&self) -> &[f64] {
        &self.c
    }

    /// Probability of jump `offsets()[i]` when the spin under the walker is `s`.
    #[inline]
    pub fn jump_prob(&self, i: usize, s: i8) -> f64 {
        self.p0[i] + self.params.epsilon * self.c[i] * f64::from(s)
    }

    /// Quenched one-step jump law `u -> P0(u) + eps c(u) s`.
    pub fn jump_distribution(&self, s: i64) -> Result<BTreeMap<Site, f64>> {
        let s = spin(s)?;
        Ok(self
            .offsets
            .iter()
            .enumerate()
            .map(|(i, u)| (*u, self.jump_prob(i, s)))
            .collect())
    }
}

/// Checks that `s` is a spin value.
pub fn spin(s: i64) -> Result<i8> {
    match s {
        1 => Ok(1),
        -1 => Ok(-1),
        _ => Err(Error::InvalidSpin(s)),
    }
}

/// Quenched jump law for raw parameters. The parameters must be valid.
pub fn quenched_jump_distribution(p: &ModelParams, s: i64) -> Result<BTreeMap<Site, f64>> {
    Model::new(p.clone())?.jump_distribution(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyReport {
    pub grid: usize,
    /// max of |p0~(lambda)| over grid points other than lambda = 0.
    pub max_abs_off_origin: f64,
    pub argmax: Vec<f64>,
    pub nondegenerate: bool,
    /// min of |p0~| over the grid; 0 means 1/p0~ is singular on the grid.
    pub min_abs: f64,
    /// For d = 1: l1 norm of the discrete Fourier coefficients of 1/p0~ and the
    /// share of that mass carried by the upper half of the frequencies.
    pub inverse_coeff_l1: Option<f64>,
    pub inverse_coeff_tail_share: Option<f64>,
}

/// Grid evaluation of the characteristic function of `P0`. Advisory only.
pub fn nondegeneracy_diagnostic(p: &ModelParams, grid: usize) -> Result<NondegeneracyReport> {
    const DEGENERACY_TOL: f64 = 1e-9;
    if grid < 16 {
        return Err(Error::Precondition(format!("grid {grid} too small, need >= 16")));
    }
    let total = grid
        .checked_pow(p.dim as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::Precondition(format!("grid {grid}^{} too large", p.dim)))?;
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let mut values = Vec::with_capacity(total);
    let (mut best, mut argmax, mut min_abs) = (0.0f64, vec![0.0; p.dim], f64::INFINITY);
    for idx in 0..total {
        let mut rem = idx;
        let lambda: Vec<f64> = (0..p.dim)
            .map(|_| {
                let k = rem % grid;
                rem /= grid;
                k as f64 * step
            })
            .collect();
        let (mut re, mut im) = (0.0, 0.0);
        for (u, &w) in &p.p0 {
            let phase: f64 = u.coords(p.dim).iter().zip(&lambda).map(|(&a, &l)| f64::from(a) * l).sum();
            re += w * phase.cos();
            im += w * phase.sin();
        }
        let abs = re.hypot(im);
        min_abs = min_abs.min(abs);
        if idx != 0 && abs > best {
            best = abs;
            argmax = lambda;
        }
        values.push((re, im));
    }
    let (l1, tail) = if p.dim == 1 && min_abs > 1e-12 {
        // Fourier coefficients of 1 / p0~ by direct DFT over the grid.
        let mags: Vec<f64> = (0..grid)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &(a, b)) in values.iter().enumerate() {
                    let d = a * a + b * b;
                    let (ir, ii) = (a / d, -b / d);
                    let ph = -(k as f64) * (j as f64) * step;
                    re += ir * ph.cos() - ii * ph.sin();
                    im += ir * ph.sin() + ii * ph.cos();
                }
                re.hypot(im) / grid as f64
            })
            .collect();
        let l1: f64 = mags.iter().sum();
        // Frequencies |k| > grid/4 (k and grid-k are the same frequency).
        let tail: f64 = mags
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k).min(grid - *k) > grid / 4)
            .map(|(_, m)| m)
            .sum();
        (Some(l1), Some(tail / l1))
    } else {
        (None, None)
    };
    Ok(NondegeneracyReport {
        grid,
        max_abs_off_origin: best,
        argmax,
        nondegenerate: best < 1.0 - DEGENERACY_TOL,
        min_abs,
        inverse_coeff_l1: l1,
        inverse_coeff_tail_share: tail,
    })
}
