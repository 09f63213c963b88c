use std::sync::OnceLock;

use proptest::prelude::*;
use rwie_core::torus::{
    decode, default_quad_depth, encode, partial_sum_dyadic, psi, spectrum, TorusFunction, WalshSpectrum,
};

fn weierstrass() -> &'static (TorusFunction, Vec<WalshSpectrum>) {
    static CACHE: OnceLock<(TorusFunction, Vec<WalshSpectrum>)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let f = TorusFunction::weierstrass(0.6).unwrap();
        let specs = (0..9).map(|k| spectrum(&f, k, default_quad_depth(k)).unwrap()).collect();
        (f, specs)
    })
}

proptest! {
    #[test]
    fn psi_is_a_character(a in 0u64..4096, b in 0u64..4096, x in 0.0f64..1.0) {
        prop_assert_eq!(psi(a, x) * psi(b, x), psi(a ^ b, x));
    }

    #[test]
    fn encode_decode_round_trip(x in 0.0f64..1.0) {
        let z = encode(x, 40).unwrap();
        let y = decode(&z);
        prop_assert!(y <= x && x - y < 2f64.powi(-40));
    }

    #[test]
    fn partial_sum_is_the_walsh_series(x in 0.0f64..1.0, k in 1u32..9) {
        let (f, specs) = weierstrass();
        let spec = &specs[k as usize];
        let series: f64 = (0..1u64 << k).map(|n| spec.coeff(n) * f64::from(psi(n, x))).sum();
        let direct = partial_sum_dyadic(f, k, x).unwrap();
        prop_assert!((series - direct).abs() < 1e-9, "{} vs {}", series, direct);
    }
}

#[test]
fn parseval_for_the_linear_function() {
    // sum of squared coefficients approaches int x^2 = 1/3 from below
    let f = TorusFunction::linear();
    let spec = spectrum(&f, 10, default_quad_depth(10)).unwrap();
    let energy: f64 = spec.iter().map(|(_, c)| c * c).sum();
    let missing = 1.0 / 3.0 - energy;
    // the tail beyond depth 10 is sum_{t >= 10} 4^{-t-2}
    let tail: f64 = (10..60).map(|t| 0.25f64.powi(t + 2)).sum();
    assert!((missing - tail).abs() < 1e-9, "{missing} vs {tail}");
}
