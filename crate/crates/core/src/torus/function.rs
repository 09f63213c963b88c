use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::torus::partial::hoelder_seminorm_estimate;

/// Number of lacunary terms beyond the first in the Weierstrass family.
pub const WEIERSTRASS_TERMS: u32 = 20;

#[derive(Clone)]
pub enum TorusKind {
    Constant(f64),
    /// `x` on `[0,1)`; not periodic, so distances are taken on the interval.
    Linear,
    /// `cos(2 pi x)`.
    Cos1,
    /// `sum_{j=0}^{J} 2^{-alpha j} cos(2 pi 2^j x)`.
    Weierstrass { alpha: f64, terms: u32 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TorusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorusKind::Constant(c) => write!(f, "Constant({c})"),
            TorusKind::Linear => write!(f, "Linear"),
            TorusKind::Cos1 => write!(f, "Cos1"),
            TorusKind::Weierstrass { alpha, terms } => write!(f, "Weierstrass({alpha}, {terms})"),
            TorusKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A Hoelder function on the circle together with its regularity data.
#[derive(Clone, Debug)]
pub struct TorusFunction {
    pub name: String,
    pub kind: TorusKind,
    pub alpha: f64,
    /// `||f||_alpha`, exact where known, otherwise a grid estimate.
    pub seminorm_alpha: f64,
    pub sup_norm: f64,
    pub periodic: bool,
}

/// Grid level used when a seminorm has to be estimated.
pub const SEMINORM_GRID: u32 = 16;

impl TorusFunction {
    pub fn constant(c: f64) -> TorusFunction {
        TorusFunction {
            name: format!("constant:{c}"),
            kind: TorusKind::Constant(c),
            alpha: 1.0,
            seminorm_alpha: 0.0,
            sup_norm: c.abs(),
            periodic: true,
        }
    }

    pub fn linear() -> TorusFunction {
        TorusFunction {
            name: "linear".into(),
            kind: TorusKind::Linear,
            alpha: 1.0,
            seminorm_alpha: 1.0,
            sup_norm: 1.0,
            periodic: false,
        }
    }

    pub fn cos1() -> TorusFunction {
        TorusFunction {
            name: "cos1".into(),
            kind: TorusKind::Cos1,
            alpha: 1.0,
            seminorm_alpha: 2.0 * PI,
            sup_norm: 1.0,
            periodic: true,
        }
    }

    pub fn weierstrass(alpha: f64) -> Result<TorusFunction> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Precondition(format!("alpha = {alpha} not in (0,1]")));
        }
        let terms = WEIERSTRASS_TERMS;
        let sup_norm = (0..=terms).map(|j| 2f64.powf(-alpha * f64::from(j))).sum();
        let mut f = TorusFunction {
            name: format!("weierstrass:alpha={alpha}"),
            kind: TorusKind::Weierstrass { alpha, terms },
            alpha,
            seminorm_alpha: f64::NAN,
            sup_norm,
            periodic: true,
        };
        f.seminorm_alpha = hoelder_seminorm_estimate(&f, SEMINORM_GRID);
        Ok(f)
    }

    /// User-supplied function with declared regularity.
    pub fn custom(
        name: &str,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        alpha: f64,
        seminorm_alpha: f64,
        sup_norm: f64,
        periodic: bool,
    ) -> TorusFunction {
        TorusFunction { name: name.into(), kind: TorusKind::Custom(eval), alpha, seminorm_alpha, sup_norm, periodic }
    }

    /// Parses a registry name: `linear`, `cos1`, `constant:<c>`, `weierstrass:alpha=<a>`.
    pub fn from_registry(name: &str) -> Result<TorusFunction> {
        let bad = || Error::Malformed(format!("unknown function {name:?} (known: linear, cos1, constant:<c>, weierstrass:alpha=<a>)"));
        match name {
            "linear" => Ok(Self::linear()),
            "cos1" => Ok(Self::cos1()),
            _ => {
                if let Some(rest) = name.strip_prefix("weierstrass:alpha=") {
                    Self::weierstrass(rest.parse().map_err(|_| bad())?)
                } else if let Some(rest) = name.strip_prefix("constant:") {
                    Ok(Self::constant(rest.parse().map_err(|_| bad())?))
                } else {
                    Err(bad())
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            TorusKind::Constant(c) => *c,
            TorusKind::Linear => x,
            TorusKind::Cos1 => (2.0 * PI * x).cos(),
            TorusKind::Weierstrass { alpha, terms } => {
                let mut s = 0.0;
                let mut freq = 1.0;
                for j in 0..=*terms {
                    // reduce the phase mod 1 first so large frequencies stay accurate
                    let ph = (freq * x).fract();
                    s += 2f64.powf(-alpha * f64::from(j)) * (2.0 * PI * ph).cos();
                    freq *= 2.0;
                }
                s
            }
            TorusKind::Custom(g) => g(x),
        }
    }

    /// `||f||_{C^alpha} = ||f||_inf + ||f||_alpha`.
    pub fn c_alpha_norm(&self) -> f64 {
        self.sup_norm + self.seminorm_alpha
    }

    /// Distance used for the seminorm: circle for periodic functions, interval otherwise.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.periodic {
            d.min(1.0 - d)
        } else {
            d
        }
    }
}
