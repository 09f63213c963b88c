use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::spectral::TimeSet;
use crate::torus::binary::bitrev;
use crate::torus::function::TorusFunction;

/// Largest quadrature depth accepted (2^26 cells).
pub const MAX_QUAD_DEPTH: u32 = 26;

/// Coefficients `gamma -> f_gamma` keyed by `n = sum_{t in gamma} 2^t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WalshSpectrum {
    pub depth: u32,
    coeffs: BTreeMap<u64, f64>,
    /// Bound on the quadrature error of each coefficient (0 for exact spectra).
    pub quadrature_error: f64,
}

impl WalshSpectrum {
    pub fn new(depth: u32) -> WalshSpectrum {
        WalshSpectrum { depth, coeffs: BTreeMap::new(), quadrature_error: 0.0 }
    }

    pub fn from_terms(depth: u32, terms: impl IntoIterator<Item = (u64, f64)>) -> WalshSpectrum {
        let mut s = WalshSpectrum::new(depth);
        for (n, c) in terms {
            s.add(n, c);
        }
        s
    }

    pub fn add(&mut self, n: u64, c: f64) {
        assert!(self.depth >= 64 || n >> self.depth == 0, "index {n} outside depth {}", self.depth);
        if c != 0.0 {
            *self.coeffs.entry(n).or_insert(0.0) += c;
        }
    }

    pub fn set(&mut self, n: u64, c: f64) {
        self.coeffs.remove(&n);
        self.add(n, c);
    }

    pub fn coeff(&self, n: u64) -> f64 {
        self.coeffs.get(&n).copied().unwrap_or(0.0)
    }

    pub fn coeff_of(&self, gamma: &TimeSet) -> f64 {
        gamma.to_mask().map_or(0.0, |n| self.coeff(n))
    }

    /// Nonzero entries in increasing `n`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.coeffs.iter().filter(|(_, c)| **c != 0.0).map(|(n, c)| (*n, *c))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One past the largest time carrying a nonzero coefficient.
    pub fn support_width(&self) -> u32 {
        self.iter().map(|(n, _)| 64 - n.leading_zeros()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |a, (_, c)| a.max(c.abs()))
    }

    /// `sum |f_gamma|`, an upper bound for the sup norm of the cylinder function.
    pub fn l1(&self) -> f64 {
        self.iter().map(|(_, c)| c.abs()).sum()
    }

    pub fn scale(&self, a: f64) -> WalshSpectrum {
        WalshSpectrum::from_terms(self.depth, self.iter().map(|(n, c)| (n, a * c)))
    }

    /// Value on a spin prefix of length >= `support_width()`.
    pub fn eval(&self, zeta: &[i8]) -> f64 {
        let mut a = 0u64;
        for (t, &z) in zeta.iter().enumerate().take(64) {
            if z < 0 {
                a |= 1 << t;
            }
        }
        self.eval_bits(a)
    }

    /// Value at the sequence whose `-1` positions are the set bits of `a`.
    pub fn eval_bits(&self, a: u64) -> f64 {
        self.iter().map(|(n, c)| if (n & a).count_ones() % 2 == 1 { -c } else { c }).sum()
    }

    /// Spectrum of `f * (f o S^t)`: indices `n xor (n' << t)`.
    pub fn shifted_product(&self, t: u32) -> WalshSpectrum {
        let width = self.support_width();
        assert!(width + t <= 64, "shifted product exceeds 64 times");
        let mut out = WalshSpectrum::new((width + t).max(self.depth));
        for (a, x) in self.iter() {
            for (b, y) in self.iter() {
                out.add(a ^ (b << t), x * y);
            }
        }
        out
    }

    /// CSV `n,gamma_bits,coeff,bound`; `gamma_bits` lists `a_0 a_1 ..` of `n` (LSB first).
    pub fn write_csv<W: Write>(&self, mut w: W, bound: impl Fn(u64) -> f64) -> std::io::Result<()> {
        writeln!(w, "n,gamma_bits,coeff,bound")?;
        let count = if self.depth >= 63 { 0 } else { 1u64 << self.depth };
        for n in 0..count {
            let bits: String = (0..self.depth).map(|t| if n >> t & 1 == 1 { '1' } else { '0' }).collect();
            writeln!(w, "{n},{bits},{:e},{:e}", self.coeff(n), bound(n))?;
        }
        Ok(())
    }
}

/// `psi_gamma(x) = prod_{t in gamma} (1 - 2 a_t(x))`.
pub fn psi(n: u64, x: f64) -> i8 {
    let mut y = x;
    let mut a = 0u64;
    let top = 64 - n.leading_zeros();
    for t in 0..top {
        y *= 2.0;
        if y >= 1.0 {
            y -= 1.0;
            a |= 1 << t;
        }
    }
    if (a & n).count_ones() % 2 == 1 {
        -1
    } else {
        1
    }
}

/// In-place unnormalized fast Walsh-Hadamard transform:
/// `v[r] <- sum_j v[j] (-1)^{popcount(r & j)}`.
pub fn fwht(v: &mut [f64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

pub fn default_quad_depth(max_time: u32) -> u32 {
    (max_time + 4).max(20)
}

fn quad_bound(f: &TorusFunction, q: u32) -> f64 {
    f.seminorm_alpha * 2f64.powf(-f.alpha * f64::from(q))
}

/// `f_gamma = int f psi_gamma` by the midpoint rule on the `2^q` dyadic cells.
/// Returns `(value, error bound)`.
pub fn walsh_coeff(f: &TorusFunction, gamma: &TimeSet, q: u32) -> Result<(f64, f64)> {
    let n = gamma
        .to_mask()
        .ok_or_else(|| Error::Precondition("time set too large".into()))?;
    if let Some(top) = gamma.max_time() {
        if q <= top {
            return Err(Error::Precondition(format!("quadrature depth {q} must exceed max time {top}")));
        }
    }
    if q > MAX_QUAD_DEPTH {
        return Err(Error::Precondition(format!("quadrature depth {q} > {MAX_QUAD_DEPTH}")));
    }
    let cells = 1u64 << q;
    let h = 1.0 / cells as f64;
    // psi on depth-q cell m is (-1)^{popcount(bitrev_q(n) & m)}
    let r = bitrev(n, q);
    let mut s = 0.0;
    for m in 0..cells {
        let v = f.eval((m as f64 + 0.5) * h);
        s += if (r & m).count_ones() % 2 == 1 { -v } else { v };
    }
    Ok((s * h, quad_bound(f, q)))
}

/// All coefficients with `gamma` inside `{0..k-1}`, via one FWHT.
pub fn spectrum(f: &TorusFunction, k: u32, q: u32) -> Result<WalshSpectrum> {
    if q < k || q > MAX_QUAD_DEPTH {
        return Err(Error::Precondition(format!("quadrature depth {q} must be in [{k}, {MAX_QUAD_DEPTH}]")));
    }
    let cells = 1usize << q;
    let per = 1usize << (q - k);
    let h = 1.0 / cells as f64;
    let mut sums = vec![0.0; 1 << k];
    for (j, s) in sums.iter_mut().enumerate() {
        *s = (0..per).map(|i| f.eval(((j * per + i) as f64 + 0.5) * h)).sum::<f64>() * h;
    }
    fwht(&mut sums);
    let mut out = WalshSpectrum::new(k);
    for n in 0..(1u64 << k) {
        out.add(n, sums[bitrev(n, k) as usize]);
    }
    out.quadrature_error = quad_bound(f, q);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::binary::encode;
    use rand::{Rng, SeedableRng};

    #[test]
    fn linear_coefficients() {
        let f = TorusFunction::linear();
        for t in 0..8 {
            let (c, err) = walsh_coeff(&f, &TimeSet::new(vec![t]), 20).unwrap();
            assert!((c + 2f64.powi(-(t as i32) - 2)).abs() <= err + 1e-15, "t={t}");
        }
        let (c0, _) = walsh_coeff(&f, &TimeSet::empty(), 10).unwrap();
        assert!((c0 - 0.5).abs() < 1e-15);
        assert!(walsh_coeff(&f, &TimeSet::new(vec![5]), 5).is_err());
    }

    #[test]
    fn spectrum_matches_direct() {
        let f = TorusFunction::cos1();
        let s = spectrum(&f, 5, 14).unwrap();
        for n in [0u64, 1, 3, 6, 17, 31] {
            let (c, _) = walsh_coeff(&f, &TimeSet::from_mask(n), 14).unwrap();
            assert!((s.coeff(n) - c).abs() < 1e-12, "n={n}");
        }
        let k = TorusFunction::constant(3.0);
        let s = spectrum(&k, 4, 8).unwrap();
        assert!((s.coeff(0) - 3.0).abs() < 1e-14);
        assert!((1..16).all(|n| s.coeff(n).abs() < 1e-14));
    }

    #[test]
    fn psi_matches_encoded_spins() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.gen();
            let n: u64 = rng.gen_range(1..1 << 12);
            let depth = 64 - n.leading_zeros() as usize;
            let z = encode(x, depth).unwrap();
            let direct: i8 = (0..depth).filter(|t| n >> t & 1 == 1).map(|t| z[t]).product();
            assert_eq!(psi(n, x), direct);
        }
    }

    #[test]
    fn products_and_evaluation() {
        for k in 1..=10u32 {
            for a in 0..(1u64 << k) {
                let (g, h) = (a.wrapping_mul(2654435761) % (1 << k), a);
                let prod = WalshSpectrum::from_terms(k, [(g ^ h, 1.0)]);
                let lhs = WalshSpectrum::from_terms(k, [(g, 1.0)]).eval_bits(a)
                    * WalshSpectrum::from_terms(k, [(h, 1.0)]).eval_bits(a);
                assert_eq!(lhs, prod.eval_bits(a));
            }
        }
        let s = WalshSpectrum::from_terms(2, [(1, 1.0)]);
        let p = s.shifted_product(1);
        assert_eq!(p.coeff(0b11), 1.0);
    }

    #[test]
    fn csv_rows() {
        let s = WalshSpectrum::from_terms(2, [(1, -0.25)]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf, |_| 1.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(2).unwrap().starts_with("1,10,"));
        let mut buf = Vec::new();
        WalshSpectrum::new(0).write_csv(&mut buf, |_| 0.0).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
