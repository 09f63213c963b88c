//! Functionals `f(S^t zeta)` evaluated along a spin sequence.

use crate::error::{Error, Result};
use crate::torus::binary::bitrev;
use crate::torus::function::TorusFunction;
use crate::torus::partial::cell_average;
use crate::torus::walsh::WalshSpectrum;

/// Windows up to this width are evaluated by table lookup.
const TABLE_WIDTH: u32 = 20;
/// Bits of the window that can influence an f64 cell midpoint.
const MIDPOINT_BITS: u32 = 62;

#[derive(Clone, Debug)]
pub enum ZetaFunctional {
    /// Finite Walsh expansion on `zeta_0 .. zeta_{w-1}`.
    Cylinder(WalshSpectrum),
    /// `f~` composed with the binary map, replaced by its dyadic partial sum of
    /// order `2^depth` (cell average), minus `shift`.
    Torus { f: TorusFunction, depth: u32, shift: f64 },
}

/// `m_n = floor((4 / alpha) log2 n)`.
pub fn truncation_depth(alpha: f64, n: usize) -> u32 {
    ((4.0 / alpha) * (n as f64).log2() + 1e-9).floor() as u32
}

impl ZetaFunctional {
    pub fn window(&self) -> usize {
        match self {
            ZetaFunctional::Cylinder(s) => s.support_width().max(1) as usize,
            ZetaFunctional::Torus { depth, .. } => (*depth).max(1) as usize,
        }
    }

    /// Upper bound on `sup |f|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            ZetaFunctional::Cylinder(s) => s.l1(),
            ZetaFunctional::Torus { f, shift, .. } => f.sup_norm + shift.abs(),
        }
    }

    /// Prepared evaluator; builds lookup tables once.
    pub fn evaluator(&self) -> Result<Evaluator> {
        let w = self.window() as u32;
        match self {
            ZetaFunctional::Cylinder(s) => {
                if w > TABLE_WIDTH {
                    return Err(Error::Precondition(format!("cylinder window {w} > {TABLE_WIDTH}")));
                }
                let table = (0..1u64 << w).map(|a| s.eval_bits(a)).collect();
                Ok(Evaluator { width: w, kind: EvalKind::Table(table) })
            }
            ZetaFunctional::Torus { f, depth, shift } => {
                if *depth <= TABLE_WIDTH {
                    let q = (depth + 4).clamp(20, 24);
                    let k = *depth;
                    let table = (0..1u64 << k).map(|a| cell_average(f, k, bitrev(a, k), q) - shift).collect();
                    Ok(Evaluator { width: w, kind: EvalKind::Table(table) })
                } else {
                    Ok(Evaluator { width: w, kind: EvalKind::Midpoint { f: f.clone(), shift: *shift } })
                }
            }
        }
    }

    /// `f(S^t zeta)` for every `t` with a full window.
    pub fn values(&self, zeta: &[i8]) -> Result<Vec<f64>> {
        self.evaluator()?.values(zeta)
    }
}

#[derive(Clone, Debug)]
enum EvalKind {
    Table(Vec<f64>),
    Midpoint { f: TorusFunction, shift: f64 },
}

#[derive(Clone, Debug)]
pub struct Evaluator {
    width: u32,
    kind: EvalKind,
}

impl Evaluator {
    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn values(&self, zeta: &[i8]) -> Result<Vec<f64>> {
        let w = self.width as usize;
        if zeta.len() < w {
            return Err(Error::Precondition(format!("window {w} longer than sequence {}", zeta.len())));
        }
        let bit = |z: i8| u64::from(z < 0);
        // a-mask of the window, bit j = a_{t+j}; only the low `keep` positions are stored
        let keep = self.width.min(MIDPOINT_BITS) as usize;
        let mut a = 0u64;
        for (j, &z) in zeta.iter().take(keep).enumerate() {
            a |= bit(z) << j;
        }
        let out_len = zeta.len() - w + 1;
        let mut out = Vec::with_capacity(out_len);
        for t in 0..out_len {
            out.push(match &self.kind {
                EvalKind::Table(tab) => tab[a as usize],
                EvalKind::Midpoint { f, shift } => {
                    let x = (bitrev(a, keep as u32) as f64 + 0.5) * 0.5f64.powi(keep as i32);
                    f.eval(x) - shift
                }
            });
            if t + 1 < out_len {
                a = (a >> 1) | (bit(zeta[t + keep]) << (keep - 1));
            }
        }
        Ok(out)
    }
}
