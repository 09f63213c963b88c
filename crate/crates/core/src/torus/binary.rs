use crate::error::{Error, Result};
use crate::spectral::TimeSet;

/// First `depth` binary digits of `x` as spins `zeta_t = 1 - 2 a_t`.
/// Dyadic points get the terminating expansion (trailing `+1`).
pub fn encode(x: f64, depth: usize) -> Result<Vec<i8>> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Precondition(format!("x = {x} not in [0,1)")));
    }
    let mut y = x;
    Ok((0..depth)
        .map(|_| {
            y *= 2.0;
            if y >= 1.0 {
                y -= 1.0;
                -1
            } else {
                1
            }
        })
        .collect())
}

/// `sum_t a_t 2^{-t-1}` for a finite spin prefix.
pub fn decode(zeta: &[i8]) -> f64 {
    zeta.iter()
        .enumerate()
        .filter(|(_, &z)| z < 0)
        .map(|(t, _)| 0.5f64.powi(t as i32 + 1))
        .sum()
}

pub fn gamma_of_n(n: u64) -> TimeSet {
    TimeSet::from_mask(n)
}

pub fn n_of_gamma(gamma: &TimeSet) -> Result<u64> {
    gamma
        .to_mask()
        .ok_or_else(|| Error::Precondition(format!("{gamma:?} has times beyond 63")))
}

/// Reverses the low `k` bits of `x`.
pub fn bitrev(x: u64, k: u32) -> u64 {
    if k == 0 {
        0
    } else {
        x.reverse_bits() >> (64 - k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn encode_examples() {
        assert_eq!(encode(0.0, 4).unwrap(), vec![1, 1, 1, 1]);
        assert_eq!(encode(0.5, 4).unwrap(), vec![-1, 1, 1, 1]);
        assert_eq!(encode(0.75, 3).unwrap(), vec![-1, -1, 1]);
        assert!(encode(1.0, 3).is_err());
        assert!(encode(-0.1, 3).is_err());
    }

    #[test]
    fn round_trip_truncates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: f64 = rng.gen();
            let y = decode(&encode(x, 24).unwrap());
            assert_eq!(y, (x * 16_777_216.0).floor() / 16_777_216.0);
            assert!(x - y < 2f64.powi(-24) && y <= x);
        }
    }

    #[test]
    fn gamma_index_bijection() {
        assert!(gamma_of_n(0).is_empty());
        assert_eq!(gamma_of_n(5), TimeSet::new(vec![0, 2]));
        for n in 0..(1u64 << 16) {
            assert_eq!(n_of_gamma(&gamma_of_n(n)).unwrap(), n);
        }
        assert_eq!(bitrev(0b0011, 4), 0b1100);
        assert_eq!(bitrev(1, 1), 1);
    }
}
