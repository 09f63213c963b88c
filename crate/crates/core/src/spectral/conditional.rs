//! Conditional expectations of products of `zeta_t = eta_t(0)` given the present.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::spectral::functional::FieldFunctional;
use crate::spectral::operator::TransferOperator;
use crate::torus::walsh::WalshSpectrum;

/// Finite set of nonnegative times, sorted.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TimeSet(Vec<u32>);

impl TimeSet {
    pub fn new(mut times: Vec<u32>) -> TimeSet {
        times.sort_unstable();
        times.dedup();
        TimeSet(times)
    }

    pub fn empty() -> TimeSet {
        TimeSet(Vec::new())
    }

    pub fn from_mask(mask: u64) -> TimeSet {
        TimeSet((0..64).filter(|t| mask >> t & 1 == 1).collect())
    }

    /// `sum_{t in gamma} 2^t`; `None` if some t >= 64.
    pub fn to_mask(&self) -> Option<u64> {
        self.0.iter().try_fold(0u64, |acc, &t| (t < 64).then(|| acc | 1 << t))
    }

    pub fn times(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `m_gamma`.
    pub fn min_time(&self) -> Option<u32> {
        self.0.first().copied()
    }

    /// `M_gamma`.
    pub fn max_time(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// `r_j = t_{j+1} - t_j`.
    pub fn gaps(&self) -> Vec<u32> {
        self.0.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn shift(&self, by: u32) -> TimeSet {
        TimeSet(self.0.iter().map(|t| t + by).collect())
    }

    pub fn symmetric_difference(&self, other: &TimeSet) -> TimeSet {
        let a: std::collections::BTreeSet<u32> = self.0.iter().copied().collect();
        let b: std::collections::BTreeSet<u32> = other.0.iter().copied().collect();
        TimeSet(a.symmetric_difference(&b).copied().collect())
    }
}

impl fmt::Debug for TimeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

/// `G_gamma = E[prod_{t in gamma} zeta_t | eta_{t_0}]`, right to left: start
/// from `Phi_{{0}}` at `t_k`, then `G <- Phi_{{0}} T^{r_j} G`.
pub fn g_gamma(op: &TransferOperator, gamma: &TimeSet) -> Result<FieldFunctional> {
    if gamma.is_empty() {
        return Err(Error::Precondition("g_gamma needs a nonempty time set".into()));
    }
    let mut g = FieldFunctional::phi0();
    for r in gamma.gaps().iter().rev() {
        g = op.pow(&g, u64::from(*r)).mul_phi0();
    }
    Ok(g)
}

/// `E[f(zeta_0, zeta_1, ...) | eta_0]` for a cylinder spectrum.
pub fn g_of_cylinder(op: &TransferOperator, spec: &WalshSpectrum) -> FieldFunctional {
    let width = spec.support_width();
    g_of_cylinder_with_terminal(op, spec, width, &FieldFunctional::constant(1.0))
}

/// `E[f(zeta_0..zeta_{w-1}) H(eta_{w-1}) | eta_0]` for `f` supported on `{0..w-1}`.
///
/// Backward dynamic program over prefixes: the state at level `j` is a map
/// from `alpha = gamma & [0, j)` to a functional of `eta_j`.
pub fn g_of_cylinder_with_terminal(
    op: &TransferOperator,
    spec: &WalshSpectrum,
    width: u32,
    terminal: &FieldFunctional,
) -> FieldFunctional {
    assert!(spec.support_width() <= width, "spectrum wider than the declared window");
    let unit = terminal.constant_term() == 1.0 && terminal.len() == 1;
    if width == 0 {
        return terminal.scale(spec.coeff(0));
    }
    let top = width - 1;
    let low = |j: u32| if j == 0 { 0 } else { u64::MAX >> (64 - j) };
    let mut level: BTreeMap<u64, FieldFunctional> = BTreeMap::new();
    for (mask, c) in spec.iter() {
        let alpha = mask & low(top);
        let term = if mask >> top & 1 == 1 { FieldFunctional::phi0() } else { FieldFunctional::constant(1.0) };
        let entry = level.entry(alpha).or_default();
        *entry = entry.axpy(c, &term);
    }
    if !unit {
        for v in level.values_mut() {
            *v = v.mul(terminal);
        }
    }
    for j in (0..top).rev() {
        let mut next: BTreeMap<u64, FieldFunctional> = BTreeMap::new();
        for (alpha, l) in level {
            let tl = op.apply(&l);
            let tl = if alpha >> j & 1 == 1 { tl.mul_phi0() } else { tl };
            let entry = next.entry(alpha & low(j)).or_default();
            *entry = entry.add(&tl);
        }
        level = next;
    }
    level.remove(&0).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelParams};
    use crate::spectral::gamma::GammaSet;

    fn op(eps: f64, mu: f64) -> TransferOperator {
        TransferOperator::new(&Model::new(ModelParams::lazy_walk(eps, mu, 1.0, 1.5)).unwrap())
    }

    #[test]
    fn time_set_accessors() {
        let g = TimeSet::new(vec![5, 0, 2]);
        assert_eq!(g.to_mask(), Some(0b100101));
        assert_eq!(TimeSet::from_mask(0b100101), g);
        assert_eq!(g.gaps(), vec![2, 3]);
        assert_eq!((g.min_time(), g.max_time()), (Some(0), Some(5)));
        assert_eq!(g.symmetric_difference(&TimeSet::new(vec![2, 7])), TimeSet::new(vec![0, 5, 7]));
        assert_eq!(TimeSet::new(vec![70]).to_mask(), None);
    }

    #[test]
    fn singleton_is_phi0() {
        let t = op(0.05, 0.1);
        assert_eq!(g_gamma(&t, &TimeSet::new(vec![3])).unwrap(), FieldFunctional::phi0());
        assert!(g_gamma(&t, &TimeSet::empty()).is_err());
    }

    #[test]
    fn pair_unperturbed() {
        let t = op(0.0, 0.1);
        let g = g_gamma(&t, &TimeSet::new(vec![0, 1])).unwrap();
        let expect = FieldFunctional::from_terms([
            (GammaSet::of_x(&[-1, 0]), 0.025),
            (GammaSet::empty(), 0.05),
            (GammaSet::of_x(&[0, 1]), 0.025),
        ]);
        assert!(g.sub(&expect).sup_bound() < 1e-16);
    }

    #[test]
    fn prefix_dp_matches_literal_recursion() {
        let t = op(0.05, 0.1);
        for mask in 1u64..64 {
            let gamma = TimeSet::from_mask(mask);
            let spec = WalshSpectrum::from_terms(6, [(mask, 1.0)]);
            let dp = g_of_cylinder(&t, &spec);
            let lit = t.pow(&g_gamma(&t, &gamma).unwrap(), u64::from(gamma.min_time().unwrap()));
            assert!(dp.sub(&lit).sup_bound() < 1e-14, "{gamma:?}");
        }
    }
}
