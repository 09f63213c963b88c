use rwie_core::clt::bounds::{bound_suite, BoundConfig, Status};
use rwie_core::spectral::TransferOperator;
use rwie_core::{Model, ModelParams};

fn summarize(p: ModelParams) -> rwie_core::clt::bounds::BoundLedger {
    let op = TransferOperator::new(&Model::new(p).unwrap());
    let t = std::time::Instant::now();
    let l = bound_suite(&op, &BoundConfig::default()).unwrap();
    eprintln!("{:?} in {:?}", l.regime, t.elapsed());
    eprintln!("pass {} fail {} nir {}", l.count(Status::Pass), l.count(Status::Fail), l.count(Status::NotInRegime));
    for r in l.failures().iter().take(40) {
        eprintln!("FAIL {} lhs={:e} rhs={:e}", r.check, r.lhs, r.rhs);
    }
    l
}

#[test]
fn defaults_have_no_failures() {
    let l = summarize(ModelParams::default_lazy());
    assert!(l.failures().is_empty());
    assert_eq!(l.rows_for("lemmadue").count(), 255);
    assert!(l.rows_for("norma;f=weierstrass:alpha=0.6").all(|r| r.status == Status::NotInRegime));
}

#[test]
fn hoelder_regime_has_no_failures() {
    let l = summarize(ModelParams::lazy_walk(0.002, 0.01, 1.0, 1.1));
    assert!(l.regime.unwrap().kappa < 1.0);
    assert!(l.failures().is_empty());
    assert!(l.rows_for("nnjeravv").count() > 0);
    assert!(l.rows_for("nnjeravv").all(|r| r.status == Status::Pass));
}
