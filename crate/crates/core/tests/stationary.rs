use rwie_core::clt::covariance::cylinder_mean;
use rwie_core::sim::{Engine, SimOptions, Simulator};
use rwie_core::spectral::{g_gamma, invariant_mean, TimeSet, TransferOperator};
use rwie_core::torus::WalshSpectrum;
use rwie_core::{Model, ModelParams};

const TOL: f64 = 1e-12;

fn model() -> Model {
    Model::new(ModelParams::default_lazy()).unwrap()
}

/// Mean and standard error of `zeta_t zeta_{t+lag}` over replicas (replica means are independent).
fn pair_mean(model: &Model, engine: Engine, lag: usize, replicas: u64, len: usize) -> (f64, f64) {
    let opts = SimOptions { engine, burn_in: 50, ..SimOptions::default() };
    let means: Vec<f64> = (0..replicas)
        .map(|r| {
            let mut sim = Simulator::new(model, 21, r, opts.clone()).unwrap();
            let z = sim.zeta_sequence(len + lag);
            (0..len).map(|t| f64::from(z[t] * z[t + lag])).sum::<f64>() / len as f64
        })
        .collect();
    let n = means.len() as f64;
    let m = means.iter().sum::<f64>() / n;
    let v = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn both_engines_match_exact_pair_correlations() {
    let model = model();
    let op = TransferOperator::new(&model);
    for lag in [1usize, 2] {
        let mask = 1u64 | (1 << lag);
        let exact = cylinder_mean(&op, &WalshSpectrum::from_terms(lag as u32 + 1, [(mask, 1.0)]), TOL).unwrap().value;
        for engine in [Engine::Lazy, Engine::Eager] {
            let (m, se) = pair_mean(&model, engine, lag, 120, 2000);
            assert!((m - exact).abs() < 4.0 * se, "{engine:?} lag {lag}: {m} +- {se} vs {exact}");
        }
    }
}

#[test]
fn odd_walsh_means_vanish_even_ones_do_not() {
    let model = model();
    let op = TransferOperator::new(&model);
    for mask in 1u64..64 {
        let g = g_gamma(&op, &TimeSet::from_mask(mask)).unwrap();
        let m = invariant_mean(&op, &g, TOL).unwrap();
        if mask.count_ones() % 2 == 1 {
            assert!(m.value.abs() <= m.error_bound + 1e-15, "mask {mask:b}: {}", m.value);
        } else if mask == 0b11 {
            assert!(m.value.abs() > 1e-3, "adjacent pair should correlate");
        }
    }
}

#[test]
fn drift_flips_with_c() {
    // with a symmetric P0, negating c is the spatial reflection
    let p = ModelParams::default_lazy();
    let a = Model::new(p.clone()).unwrap();
    let b = Model::new(p.with_negated_c()).unwrap();
    let mean_x = |m: &Model| {
        (0..200u64)
            .map(|r| {
                let t = rwie_core::sim::run(m, 500, 4, r, SimOptions::default()).unwrap();
                f64::from(t.displacement.last().unwrap().0[0])
            })
            .sum::<f64>()
            / 200.0
    };
    let (xa, xb) = (mean_x(&a), mean_x(&b));
    assert!((xa + xb).abs() < 4.0 * (2.0 * 500.0 * 0.5 / 200.0f64).sqrt(), "{xa} {xb}");
}
