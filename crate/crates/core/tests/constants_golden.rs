use critkill_core::constants::{
    c_boundary, c_origin, embedded_golden, gamma_boundary, h_profile, invert_c_boundary,
    invert_c_origin,
};
use critkill_core::model::StableParams;
use critkill_core::quadrature::QuadratureConfig;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

#[test]
fn production_reproduces_golden_table() {
    for row in embedded_golden() {
        let got = row.evaluate(&cfg()).unwrap();
        let tol = row.abs_err_bound.max(1e-9 * row.value.abs()).max(got.abs_err);
        assert!(
            (got.value - row.value).abs() <= tol,
            "{} d={} alpha={} p={}: got {} want {} (tol {tol:e})",
            row.family,
            row.d,
            row.alpha,
            row.p,
            got.value,
            row.value
        );
        assert!(got.abs_err <= 1e-8 * row.value.abs().max(1.0), "{row:?} err {}", got.abs_err);
    }
}

#[test]
fn boundary_constant_zeros() {
    for d in [2, 3] {
        for alpha in [1.2, 1.5, 1.8] {
            let p = StableParams::new(d, alpha).unwrap();
            let z0 = c_boundary(&p, 0.0, &cfg()).unwrap().value;
            let z1 = c_boundary(&p, alpha - 1.0, &cfg()).unwrap().value;
            assert!(z0.abs() < 1e-8 && z1.abs() < 1e-8);
            // nearby values are genuinely nonzero
            assert!(c_boundary(&p, alpha - 1.0 + 1e-3, &cfg()).unwrap().value > 0.0);
        }
    }
}

#[test]
fn boundary_constant_monotone_example() {
    let p = StableParams::new(2, 1.5).unwrap();
    let a = c_boundary(&p, 0.8, &cfg()).unwrap().value;
    let b = c_boundary(&p, 1.2, &cfg()).unwrap().value;
    assert!(a < b);
}

#[test]
fn gamma_symmetry_and_monotonicity() {
    for alpha in [0.6, 1.0, 1.4, 1.9] {
        let lo = (alpha - 1.0) / 2.0;
        let grid: Vec<f64> = (1..=20).map(|i| lo + (alpha - lo) * i as f64 / 21.0).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&p| gamma_boundary(alpha, p, &cfg()).unwrap().value)
            .collect();
        for w in vals.windows(2) {
            assert!(w[0] < w[1], "alpha={alpha}: {vals:?}");
        }
        for &p in &grid {
            let mirror = alpha - 1.0 - p;
            if mirror > -1.0 {
                let a = gamma_boundary(alpha, p, &cfg()).unwrap().value;
                let b = gamma_boundary(alpha, mirror, &cfg()).unwrap().value;
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "alpha={alpha} p={p}");
            }
        }
    }
}

#[test]
fn boundary_inverse_round_trip() {
    for (d, alpha) in [(2, 1.5), (3, 0.8), (2, 1.0)] {
        let params = StableParams::new(d, alpha).unwrap();
        let lo = (alpha - 1.0f64).max(0.0);
        for i in 1..=20 {
            let p = lo + (alpha - lo) * i as f64 / 21.0;
            let c1 = c_boundary(&params, p, &cfg()).unwrap().value;
            let back = invert_c_boundary(&params, c1, &cfg()).unwrap();
            assert!((back - p).abs() <= 1e-9, "d={d} alpha={alpha} p={p} back={back}");
        }
    }
    let p2 = StableParams::new(2, 1.0).unwrap();
    let c = c_boundary(&p2, 0.5, &cfg()).unwrap().value;
    assert!((invert_c_boundary(&p2, c, &cfg()).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn origin_constant_limits_and_inverse() {
    let params = StableParams::new(2, 1.2).unwrap();
    let c = |p: f64| c_origin(&params, p, &cfg()).unwrap().value;
    assert!(c(0.01) < c(0.1) / 5.0);
    assert!(c(0.3) < c(0.9));
    let target = c(0.6);
    assert!((invert_c_origin(&params, target, &cfg()).unwrap() - 0.6).abs() < 1e-9);
    let big = 10.0 * c(0.9 * 1.2);
    assert!(invert_c_origin(&params, big, &cfg()).unwrap() > 0.9 * 1.2);
}

#[test]
fn profile_grows_like_power() {
    let params = StableParams::new(3, 1.3).unwrap();
    let ratios: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&s: &f64| h_profile(&params, s, &cfg()).unwrap().value / s.powf(1.3))
        .collect();
    for r in &ratios {
        assert!(*r > 0.5 * ratios[2] && *r < 2.0 * ratios[2]);
    }
}
