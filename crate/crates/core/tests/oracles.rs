use tailstrat::benchmarks::{by_name, cable_oracle, reference_oracle, Benchmark, Cable, RefSource};
use tailstrat::probmath::RngStream;

fn within_3se(name: &str, n: usize) -> (f64, f64) {
    let b = by_name(name).unwrap();
    let e = reference_oracle(&b, n, &RngStream::new(17, 0)).unwrap();
    let want = b.reference().unwrap().pf;
    let z = (e.p_hat - want) / e.var_hat.sqrt();
    assert!(z.abs() <= 3.0, "{name}: {} vs {want} (z {z:.2})", e.p_hat);
    (e.p_hat, z)
}

#[test]
fn planar_references() {
    within_3se("wavy_circle", 10_000_000);
    within_3se("rastrigin", 1_000_000);
}

#[test]
fn oscillator_references() {
    within_3se("sdof_b020", 100_000);
    within_3se("sdof_b026", 200_000);
}

#[test]
fn cantilever_references() {
    within_3se("cantilever", 200_000);
    within_3se("cantilever_desk", 200_000);
}

#[test]
fn published_cable_value_is_far_from_its_oracle() {
    let b = by_name("cable").unwrap();
    let Benchmark::Cable(c) = b else { unreachable!() };
    let e = cable_oracle(&c, 100_000, &RngStream::new(1, 0)).unwrap();
    let published = b.reference().unwrap().pf;
    assert!(e.p_hat / published > 5.0, "{}", e.p_hat);
    let desk = by_name("cable_desk").unwrap().reference().unwrap();
    assert_eq!(desk.source, RefSource::Oracle);
}

#[test]
fn nominal_cable_margin() {
    let c = Cable::deterministic(1000, 193.5e3);
    let x = vec![0.0; c.dim()];
    let capacity = 250e6 * c.area(&x, 1000);
    assert!((capacity - 196.35e3).abs() < 10.0);
    assert!((c.applied_load(0.0) - 198.34e3).abs() < 10.0);
}
