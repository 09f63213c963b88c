use std::fmt;

use crate::model::Site;

/// Finite lattice set, kept sorted so equality and ordering are structural.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GammaSet(Vec<Site>);

impl GammaSet {
    pub fn empty() -> GammaSet {
        GammaSet(Vec::new())
    }

    pub fn singleton(s: Site) -> GammaSet {
        GammaSet(vec![s])
    }

    pub fn origin() -> GammaSet {
        GammaSet::singleton(Site::ORIGIN)
    }

    pub fn new(mut sites: Vec<Site>) -> GammaSet {
        sites.sort();
        sites.dedup();
        GammaSet(sites)
    }

    /// 1-d shorthand.
    pub fn of_x(xs: &[i32]) -> GammaSet {
        GammaSet::new(xs.iter().map(|&x| Site::x(x)).collect())
    }

    pub fn sites(&self) -> &[Site] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.0.binary_search(s).is_ok()
    }

    /// `{x + u : x in G}`. Translation preserves lexicographic order.
    pub fn shift(&self, u: Site) -> GammaSet {
        GammaSet(self.0.iter().map(|x| x.add(u)).collect())
    }

    /// `-G`.
    pub fn reflect(&self) -> GammaSet {
        GammaSet::new(self.0.iter().map(|x| x.neg()).collect())
    }

    /// `G xor {s}` in place.
    pub fn toggle(&mut self, s: Site) {
        match self.0.binary_search(&s) {
            Ok(i) => {
                self.0.remove(i);
            }
            Err(i) => self.0.insert(i, s),
        }
    }
}

impl fmt::Debug for GammaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

/// `Phi_a Phi_b = Phi_{a xor b}`: merge of two sorted lists.
pub fn phi_mul(a: &GammaSet, b: &GammaSet) -> GammaSet {
    let (x, y) = (&a.0, &b.0);
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => {
                out.push(x[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(y[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&x[i..]);
    out.extend_from_slice(&y[j..]);
    GammaSet(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_difference_examples() {
        let a = GammaSet::of_x(&[0, 1]);
        let b = GammaSet::of_x(&[1, 2]);
        assert_eq!(phi_mul(&a, &b), GammaSet::of_x(&[0, 2]));
        assert_eq!(phi_mul(&a, &a), GammaSet::empty());
        assert_eq!(phi_mul(&a, &GammaSet::empty()), a);
    }

    #[test]
    fn toggle_and_shift() {
        let mut g = GammaSet::of_x(&[-1, 3]);
        g.toggle(Site::x(0));
        assert_eq!(g, GammaSet::of_x(&[-1, 0, 3]));
        g.toggle(Site::x(-1));
        assert_eq!(g, GammaSet::of_x(&[0, 3]));
        assert_eq!(g.shift(Site::x(-2)), GammaSet::of_x(&[-2, 1]));
        assert_eq!(g.reflect(), GammaSet::of_x(&[-3, 0]));
        assert_eq!(GammaSet::of_x(&[2, 2, 1]).len(), 2);
    }
}
