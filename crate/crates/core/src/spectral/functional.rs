use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Site;
use crate::spectral::gamma::{phi_mul, GammaSet};

/// Finite expansion `f = sum_G f_G Phi_G`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldFunctional {
    coeffs: BTreeMap<GammaSet, f64>,
}

impl FieldFunctional {
    pub fn zero() -> FieldFunctional {
        FieldFunctional::default()
    }

    pub fn constant(c: f64) -> FieldFunctional {
        FieldFunctional::from_terms([(GammaSet::empty(), c)])
    }

    pub fn phi(g: GammaSet) -> FieldFunctional {
        FieldFunctional::from_terms([(g, 1.0)])
    }

    /// `Phi_{{0}}`, the spin under the walker.
    pub fn phi0() -> FieldFunctional {
        FieldFunctional::phi(GammaSet::origin())
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (GammaSet, f64)>) -> FieldFunctional {
        let mut f = FieldFunctional::zero();
        for (g, c) in terms {
            f.add_term(g, c);
        }
        f
    }

    pub fn add_term(&mut self, g: GammaSet, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.coeffs.entry(g).or_insert(0.0);
        *e += c;
    }

    pub fn coeff(&self, g: &GammaSet) -> f64 {
        self.coeffs.get(g).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&GammaSet::empty())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GammaSet, f64)> {
        self.coeffs.iter().map(|(g, c)| (g, *c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `sum |f_G| M^|G|`.
    pub fn hm_norm(&self, m: f64) -> f64 {
        self.coeffs.iter().map(|(g, c)| c.abs() * m.powi(g.len() as i32)).sum()
    }

    /// `sum |f_G|`, an upper bound for the sup norm.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.values().map(|c| c.abs()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.keys().map(GammaSet::len).max().unwrap_or(0)
    }

    /// Drops terms with `|f_G| <= threshold`; returns the dropped l1 mass.
    pub fn prune(&mut self, threshold: f64) -> f64 {
        let mut dropped = 0.0;
        self.coeffs.retain(|_, c| {
            if c.abs() <= threshold {
                dropped += c.abs();
                false
            } else {
                true
            }
        });
        dropped
    }

    pub fn scale(&self, a: f64) -> FieldFunctional {
        let mut f = self.clone();
        f.coeffs.values_mut().for_each(|c| *c *= a);
        f.coeffs.retain(|_, c| *c != 0.0);
        f
    }

    pub fn add(&self, other: &FieldFunctional) -> FieldFunctional {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &FieldFunctional) -> FieldFunctional {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &FieldFunctional) -> FieldFunctional {
        let mut f = self.clone();
        for (g, c) in &other.coeffs {
            f.add_term(g.clone(), a * c);
        }
        f.coeffs.retain(|_, c| *c != 0.0);
        f
    }

    /// Pointwise product, expanded through `phi_mul`.
    pub fn mul(&self, other: &FieldFunctional) -> FieldFunctional {
        let mut out: BTreeMap<GammaSet, f64> = BTreeMap::new();
        for (a, x) in &self.coeffs {
            for (b, y) in &other.coeffs {
                *out.entry(phi_mul(a, b)).or_insert(0.0) += x * y;
            }
        }
        out.retain(|_, c| *c != 0.0);
        FieldFunctional { coeffs: out }
    }

    /// `Phi_{{0}} * f`: toggles the origin in every set.
    pub fn mul_phi0(&self) -> FieldFunctional {
        let mut out = BTreeMap::new();
        for (g, c) in &self.coeffs {
            let mut h = g.clone();
            h.toggle(Site::ORIGIN);
            out.insert(h, *c);
        }
        FieldFunctional { coeffs: out }
    }

    /// Random expansion with at most `terms` terms, sites in `[-radius, radius]^dim`,
    /// degree at most `max_degree`, coefficients uniform in `(-1, 1)`.
    pub fn random(rng: &mut impl rand::Rng, dim: usize, terms: usize, radius: i32, max_degree: usize) -> FieldFunctional {
        let mut f = FieldFunctional::zero();
        for _ in 0..terms {
            let deg = rng.gen_range(0..=max_degree);
            let sites: Vec<Site> = (0..deg)
                .map(|_| {
                    let c: Vec<i32> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
                    Site::new(&c).expect("dimension checked by caller")
                })
                .collect();
            f.add_term(GammaSet::new(sites), rng.gen_range(-1.0..1.0));
        }
        f
    }

    /// Value at a configuration; `eta` must cover every site used.
    pub fn eval(&self, eta: impl Fn(&Site) -> Option<i8>) -> Result<f64> {
        let mut total = 0.0;
        for (g, c) in &self.coeffs {
            let mut sign = 1i8;
            for s in g.sites() {
                sign *= eta(s).ok_or_else(|| Error::Precondition(format!("configuration misses site {s:?}")))?;
            }
            total += c * f64::from(sign);
        }
        Ok(total)
    }

    /// Composition with spin flip and spatial reflection:
    /// `(R f)(eta) = f(-eta(-.))`, so `R Phi_G = (-1)^|G| Phi_{-G}`.
    pub fn reflect_flip(&self) -> FieldFunctional {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(g, c)| (g.reflect(), if g.len() % 2 == 1 { -c } else { *c }))
            .collect();
        FieldFunctional { coeffs }
    }

    /// Composition with the spin flip alone: `Phi_G -> (-1)^|G| Phi_G`.
    pub fn flip(&self) -> FieldFunctional {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(g, c)| (g.clone(), if g.len() % 2 == 1 { -c } else { *c }))
            .collect();
        FieldFunctional { coeffs }
    }

    pub fn to_json(&self, dim: usize) -> String {
        let terms: Vec<TermDoc> = self
            .coeffs
            .iter()
            .map(|(g, c)| TermDoc { gamma: g.sites().iter().map(|s| s.coords(dim).to_vec()).collect(), coeff: *c })
            .collect();
        serde_json::to_string(&terms).expect("functional serializes")
    }

    pub fn from_json(s: &str) -> Result<FieldFunctional> {
        let terms: Vec<TermDoc> = serde_json::from_str(s)?;
        let mut f = FieldFunctional::zero();
        for t in terms {
            let sites = t.gamma.iter().map(|c| Site::new(c)).collect::<Result<Vec<_>>>()?;
            let n = sites.len();
            let g = GammaSet::new(sites);
            if g.len() != n {
                return Err(Error::Malformed("repeated site in gamma".into()));
            }
            f.add_term(g, t.coeff);
        }
        Ok(f)
    }
}

#[derive(Serialize, Deserialize)]
struct TermDoc {
    gamma: Vec<Vec<i32>>,
    coeff: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norm_examples() {
        assert_eq!(FieldFunctional::phi0().hm_norm(1.5), 1.5);
        let f = FieldFunctional::from_terms([(GammaSet::empty(), 2.0), (GammaSet::of_x(&[0, 3]), 1.0)]);
        assert!((f.hm_norm(1.5) - 4.25).abs() < 1e-15);
        assert_eq!(f.sup_bound(), 3.0);
    }

    #[test]
    fn eval_and_symmetry() {
        let f = FieldFunctional::from_terms([(GammaSet::of_x(&[0]), 2.0), (GammaSet::of_x(&[1, 2]), -1.0)]);
        let eta = |s: &Site| Some(if s.0[0] == 2 { -1 } else { 1 });
        assert_eq!(f.eval(eta).unwrap(), 3.0);
        assert!(f.eval(|_| None).is_err());
        let r = f.reflect_flip();
        assert_eq!(r.coeff(&GammaSet::of_x(&[0])), -2.0);
        assert_eq!(r.coeff(&GammaSet::of_x(&[-2, -1])), -1.0);
        assert_eq!(r.reflect_flip(), f);
    }

    #[test]
    fn json_round_trip() {
        let f = FieldFunctional::from_terms([(GammaSet::of_x(&[-1, 0]), 0.25), (GammaSet::empty(), 0.5)]);
        let g = FieldFunctional::from_json(&f.to_json(1)).unwrap();
        assert_eq!(f, g);
        assert!(FieldFunctional::from_json(r#"[{"gamma":[[1],[1]],"coeff":1.0}]"#).is_err());
    }

    fn arb_functional() -> impl Strategy<Value = FieldFunctional> {
        prop::collection::vec((prop::collection::btree_set(-4i32..5, 0..4), -2.0f64..2.0), 1..6).prop_map(|terms| {
            FieldFunctional::from_terms(
                terms.into_iter().map(|(s, c)| (GammaSet::of_x(&s.into_iter().collect::<Vec<_>>()), c)),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn product_norm_is_submultiplicative(f in arb_functional(), g in arb_functional(), m in 1.01f64..3.0) {
            let lhs = f.mul(&g).hm_norm(m);
            prop_assert!(lhs <= f.hm_norm(m) * g.hm_norm(m) * (1.0 + 1e-12) + 1e-12);
            prop_assert!(f.sup_bound() <= f.hm_norm(m));
        }

        #[test]
        fn product_matches_pointwise(f in arb_functional(), g in arb_functional(), bits in 0u32..512) {
            let eta = |s: &Site| Some(if bits >> (s.0[0] + 4) & 1 == 1 { -1 } else { 1 });
            let lhs = f.mul(&g).eval(eta).unwrap();
            let rhs = f.eval(eta).unwrap() * g.eval(eta).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
