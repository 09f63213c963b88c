//! Big-block / small-block split of `[0, n-1]`.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BernsteinPlan {
    pub n: u64,
    pub beta: f64,
    pub delta: f64,
    /// `floor(n^beta)`.
    pub p: u64,
    /// `floor(n^delta)`.
    pub q: u64,
    /// `floor(n / (p + q))`.
    pub k: u64,
}

// guards floor(n^beta) against round-off at exact powers
const FLOOR_SLACK: f64 = 1e-9;

pub fn bernstein_plan(n: u64, beta: f64, delta: f64) -> Result<BernsteinPlan> {
    if !(0.0 < delta && delta < beta && beta < 0.25) {
        return Err(Error::Precondition(format!("need 0 < delta < beta < 1/4, got beta={beta}, delta={delta}")));
    }
    let nf = n as f64;
    let p = (nf.powf(beta) + FLOOR_SLACK).floor() as u64;
    let q = (nf.powf(delta) + FLOOR_SLACK).floor() as u64;
    if p == 0 || q == 0 || n / (p + q) == 0 {
        return Err(Error::Precondition(format!("n = {n} too small for a block")));
    }
    Ok(BernsteinPlan { n, beta, delta, p, q, k: n / (p + q) })
}

impl BernsteinPlan {
    pub fn period(&self) -> u64 {
        self.p + self.q
    }

    /// `I_l`, `l = 1..=k`, as a half-open range.
    pub fn i_block(&self, l: u64) -> Range<u64> {
        let start = (l - 1) * self.period();
        start..start + self.p
    }

    /// `J_l`, `l = 1..=k`.
    pub fn j_block(&self, l: u64) -> Range<u64> {
        let start = l * self.p + (l - 1) * self.q;
        start..start + self.q
    }

    /// `J_* = [k (p + q), n - 1]`, possibly empty.
    pub fn j_star(&self) -> Range<u64> {
        self.k * self.period()..self.n
    }

    /// Every block in order `I_1, J_1, I_2, ..., J_k, J_*`.
    pub fn blocks(&self) -> Vec<Range<u64>> {
        let mut v: Vec<Range<u64>> = (1..=self.k).flat_map(|l| [self.i_block(l), self.j_block(l)]).collect();
        v.push(self.j_star());
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSums {
    pub i_sums: Vec<f64>,
    pub j_sums: Vec<f64>,
    pub j_star: f64,
}

impl BlockSums {
    /// `S^(M)`.
    pub fn main(&self) -> f64 {
        self.i_sums.iter().sum()
    }

    /// `S^(R)`.
    pub fn remainder(&self) -> f64 {
        self.j_sums.iter().sum::<f64>() + self.j_star
    }

    pub fn total(&self) -> f64 {
        self.main() + self.remainder()
    }
}

pub fn block_sums(values: &[f64], plan: &BernsteinPlan) -> Result<BlockSums> {
    if (values.len() as u64) < plan.n {
        return Err(Error::Precondition(format!("{} values for a plan over n = {}", values.len(), plan.n)));
    }
    let sum = |r: Range<u64>| values[r.start as usize..r.end as usize].iter().sum::<f64>();
    Ok(BlockSums {
        i_sums: (1..=plan.k).map(|l| sum(plan.i_block(l))).collect(),
        j_sums: (1..=plan.k).map(|l| sum(plan.j_block(l))).collect(),
        j_star: sum(plan.j_star()),
    })
}

/// `sum_{a in A, b in B} cov(|a - b|)` for two intervals, with `cov = 0` past `cov.len()`.
fn cross(cov: &[f64], a: &Range<u64>, b: &Range<u64>) -> f64 {
    let tmax = cov.len() as i64 - 1;
    let (a0, la) = (a.start as i64, (a.end - a.start) as i64);
    let (b0, lb) = (b.start as i64, (b.end - b.start) as i64);
    if la == 0 || lb == 0 {
        return 0.0;
    }
    // d = j - i ranges over [b0 - a0 - (la-1), b0 - a0 + lb - 1]
    let lo = b0 - a0 - (la - 1);
    let hi = b0 - a0 + lb - 1;
    let mut s = 0.0;
    for d in lo.max(-tmax)..=hi.min(tmax) {
        // number of (i, j) with j - i = d, 0 <= i < la, 0 <= j < lb, relative offset b0 - a0
        let off = d - (b0 - a0);
        let count = (la.min(lb - off) - 0.max(-off)).clamp(0, la.min(lb));
        s += count as f64 * cov[d.unsigned_abs() as usize];
    }
    s
}

/// `Var(S^(R)_n)` for a stationary sequence with autocovariance `cov`
/// (taken as zero beyond its length).
pub fn remainder_variance_exact(plan: &BernsteinPlan, cov: &[f64]) -> f64 {
    let reach = cov.len() as u64;
    let ell = plan.period();
    let k = plan.k as f64;
    let j1 = plan.j_block(1);
    let v_q = cross(cov, &j1, &j1);
    // stationary blocks: k V_q + 2 sum_h (k - h) C_h
    let mut v = k * v_q;
    let mut h = 1u64;
    while h < plan.k && h * ell < reach + plan.q {
        let jh = plan.j_block(1 + h);
        v += 2.0 * (k - h as f64) * cross(cov, &j1, &jh);
        h += 1;
    }
    let js = plan.j_star();
    if !js.is_empty() {
        v += cross(cov, &js, &js);
        let mut l = plan.k;
        while l >= 1 && js.start - plan.j_block(l).end < reach {
            v += 2.0 * cross(cov, &plan.j_block(l), &js);
            l -= 1;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn example_plan() {
        let p = bernstein_plan(10_000, 0.24, 0.1).unwrap();
        assert_eq!((p.p, p.q, p.k), (9, 2, 909));
        assert_eq!(p.i_block(1), 0..9);
        assert_eq!(p.j_block(1), 9..11);
        assert_eq!(p.j_star(), 9999..10_000);
        assert!(bernstein_plan(10_000, 0.1, 0.24).is_err());
        assert!(bernstein_plan(10_000, 0.3, 0.1).is_err());
    }

    #[test]
    fn exact_variance_matches_brute_force() {
        let cov: Vec<f64> = (0..12).map(|t| 0.6f64.powi(t) * if t % 2 == 0 { 1.0 } else { -0.5 }).collect();
        for n in [50u64, 137, 1000] {
            let plan = bernstein_plan(n, 0.24, 0.1).unwrap();
            let idx: Vec<u64> = (1..=plan.k).flat_map(|l| plan.j_block(l)).chain(plan.j_star()).collect();
            let mut brute = 0.0;
            for &a in &idx {
                for &b in &idx {
                    let d = a.abs_diff(b) as usize;
                    if d < cov.len() {
                        brute += cov[d];
                    }
                }
            }
            let fast = remainder_variance_exact(&plan, &cov);
            assert!((fast - brute).abs() < 1e-9 * brute.abs().max(1.0), "n={n}: {fast} vs {brute}");
        }
    }

    proptest! {
        #[test]
        fn blocks_partition(n in 16u64..5000, vals in prop::collection::vec(-1.0f64..1.0, 5000)) {
            let plan = bernstein_plan(n, 0.24, 0.1).unwrap();
            let mut next = 0;
            for b in plan.blocks() {
                prop_assert_eq!(b.start, next);
                next = b.end;
            }
            prop_assert_eq!(next, n);
            for l in 1..=plan.k {
                prop_assert_eq!(plan.i_block(l).end - plan.i_block(l).start, plan.p);
                prop_assert_eq!(plan.j_block(l).end - plan.j_block(l).start, plan.q);
            }
            let s = block_sums(&vals, &plan).unwrap();
            let direct: f64 = vals[..n as usize].iter().sum();
            prop_assert!((s.total() - direct).abs() < 1e-9);
        }
    }
}
