use critkill_core::constants::c_origin;
use critkill_core::feynman_kac::{
    default_ray, estimate_kernel, estimate_survival, factorization_report, fit_exponent, sample_from, McConfig,
};
use critkill_core::model::{tilde_q_unchecked, Domain, Geometry, KillingPotential, ScalingFunction, StableParams, VolumeModel};
use critkill_core::quadrature::QuadratureConfig;
use critkill_core::sampler::KillingMode;
use critkill_core::Error;

fn mc(n: usize) -> McConfig {
    McConfig {
        n_paths: n,
        workers: 1,
        ..McConfig::default()
    }
}

fn punctured_setup() -> (StableParams, Domain, KillingPotential) {
    let p = StableParams::new(2, 1.2).unwrap();
    let c1 = c_origin(&p, 0.6, &QuadratureConfig::default()).unwrap().value;
    let pot = KillingPotential::critical(Geometry::OriginDistance, 1.2, c1).unwrap();
    (p, Domain::punctured(2), pot)
}

#[test]
fn free_survival_is_exactly_one() {
    let p = StableParams::new(2, 1.5).unwrap();
    let r = estimate_survival(&[0.3, 0.1], 2.0, &p, &Domain::whole_space(2), &KillingPotential::zero(1.5), &mc(5000), 1)
        .unwrap();
    assert_eq!(r.value, 1.0);
    assert_eq!(r.half_width_95, 0.0);
}

#[test]
fn survival_is_monotone_in_distance() {
    let (p, dom, pot) = punctured_setup();
    let t: f64 = 1.0;
    let s = t.powf(1.0 / 1.2);
    let v: Vec<f64> = [s / 4.0, s, 4.0 * s]
        .iter()
        .map(|&r| estimate_survival(&[r, 0.0], t, &p, &dom, &pot, &mc(20_000), 3).unwrap().value)
        .collect();
    assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
}

#[test]
fn killed_ball_boundary_band() {
    let p = StableParams::new(2, 1.5).unwrap();
    let ball = Domain::unit_ball(2);
    let pot = KillingPotential::zero(1.5);
    let t: f64 = 0.1;
    let scale = t.powf(1.0 / 1.5);
    let norm: Vec<f64> = [0.0125, 0.025, 0.05]
        .iter()
        .map(|&delta: &f64| {
            let r = estimate_survival(&[1.0 - delta, 0.0], t, &p, &ball, &pot, &mc(40_000), 4).unwrap();
            r.value / (delta / scale).powf(0.75)
        })
        .collect();
    let (lo, hi) = norm.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo < 1.3, "{norm:?}");
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let (p, dom, pot) = punctured_setup();
    let run = |workers| {
        let cfg = McConfig { workers, ..mc(20_000) };
        sample_from(&[0.1, 0.05], 0.5, &p, &dom, &pot, &cfg, 8, &[vec![0.2, 0.0]]).unwrap()
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.survival, b.survival);
    assert_eq!(a.kernels[0].as_ref().unwrap(), b.kernels[0].as_ref().unwrap());
}

#[test]
fn confidence_intervals_are_calibrated() {
    let p = StableParams::new(2, 1.5).unwrap();
    let free = Domain::whole_space(2);
    let zero = KillingPotential::zero(1.5);
    for seed in 0..100 {
        let r = estimate_survival(&[0.0, 0.0], 0.3, &p, &free, &zero, &mc(200), seed).unwrap();
        assert!(r.lower() <= 1.0 && 1.0 <= r.upper());
    }
    // a non-degenerate case: the pooled mean of the replications stands in for the truth
    let ball = Domain::unit_ball(2);
    let reps: Vec<_> = (0..100)
        .map(|seed| estimate_survival(&[0.8, 0.0], 0.1, &p, &ball, &zero, &mc(2000), 1000 + seed).unwrap())
        .collect();
    let truth = reps.iter().map(|r| r.value).sum::<f64>() / reps.len() as f64;
    let covered = reps.iter().filter(|r| r.lower() <= truth && truth <= r.upper()).count();
    assert!(covered >= 90, "coverage {covered}/100");
}

#[test]
fn thinning_agrees_with_weights() {
    let (p, dom, pot) = punctured_setup();
    let w = estimate_survival(&[0.2, 0.0], 0.5, &p, &dom, &pot, &mc(20_000), 5).unwrap();
    let cfg = McConfig {
        killing: KillingMode::Thinning,
        ..mc(20_000)
    };
    let th = estimate_survival(&[0.2, 0.0], 0.5, &p, &dom, &pot, &cfg, 6).unwrap();
    assert!((w.value - th.value).abs() <= w.half_width_95 + th.half_width_95, "{} vs {}", w.value, th.value);
    assert!(th.half_width_95 > w.half_width_95);
}

#[test]
fn survival_decreases_with_amplitude_and_time() {
    let p = StableParams::new(2, 1.5).unwrap();
    let h = Domain::half_space(2);
    let x = [0.0, 0.2];
    let mut last = f64::INFINITY;
    for c1 in [0.0, 0.2, 0.5, 1.0] {
        let pot = KillingPotential::critical(Geometry::BoundaryDistance, 1.5, c1).unwrap();
        let v = estimate_survival(&x, 0.5, &p, &h, &pot, &mc(5000), 7).unwrap().value;
        assert!(v <= last, "C1={c1}: {v} > {last}");
        last = v;
    }
    let pot = KillingPotential::critical(Geometry::BoundaryDistance, 1.5, 0.3).unwrap();
    let mut last = f64::INFINITY;
    for t in [0.05, 0.1, 0.2, 0.4] {
        let r = estimate_survival(&x, t, &p, &h, &pot, &mc(10_000), 7).unwrap();
        assert!(r.value < last);
        last = r.value;
    }
}

#[test]
fn lifetime_comparability_band() {
    let p = StableParams::new(2, 1.5).unwrap();
    let ball = Domain::unit_ball(2);
    let pot = KillingPotential::critical(Geometry::BoundaryDistance, 1.5, 0.1).unwrap();
    let t = 0.2;
    let ratios: Vec<f64> = [0.02, 0.05, 0.1, 0.3, 0.6]
        .iter()
        .map(|&delta| {
            let x = [1.0 - delta, 0.0];
            let full = estimate_survival(&x, t, &p, &ball, &pot, &mc(10_000), 9).unwrap().value;
            let half = estimate_survival(&x, t / 2.0, &p, &ball, &pot, &mc(10_000), 9).unwrap().value;
            full / half
        })
        .collect();
    assert!(ratios.iter().all(|&r| r > 0.2 && r < 1.0), "{ratios:?}");
}

#[test]
fn exponent_fit_is_scale_invariant() {
    let (p, dom, pot) = punctured_setup();
    let t = 1.0;
    let lambda: f64 = 0.3;
    let ray = default_ray(&dom, &p, t, 6).unwrap();
    let a = fit_exponent(&p, &dom, &pot, t, &ray, &mc(8000), 10).unwrap();
    let scaled: Vec<Vec<f64>> = ray.iter().map(|x| x.iter().map(|v| v * lambda).collect()).collect();
    let b = fit_exponent(&p, &dom, &pot, lambda.powf(1.2) * t, &scaled, &mc(8000), 10).unwrap();
    assert!((a.p_hat - b.p_hat).abs() <= a.stderr.max(b.stderr), "{} vs {}", a.p_hat, b.p_hat);
    assert!((a.p_hat - 0.6).abs() < 0.1);
}

#[test]
fn exponent_fit_preconditions() {
    let (p, dom, pot) = punctured_setup();
    let far = vec![vec![0.9, 0.0], vec![0.1, 0.0]];
    assert!(matches!(fit_exponent(&p, &dom, &pot, 1.0, &far, &mc(100), 1), Err(Error::Input(_))));
    assert!(default_ray(&Domain::whole_space(2), &p, 1.0, 8).is_err());
    // so few paths from so deep that nothing survives
    let deep = vec![vec![1e-6, 0.0], vec![1e-7, 0.0]];
    let strong = KillingPotential::critical(Geometry::OriginDistance, 1.2, 50.0).unwrap();
    assert!(matches!(fit_exponent(&p, &dom, &strong, 1.0, &deep, &mc(20), 1), Err(Error::Estimator(_))));
}

#[test]
fn kernel_is_symmetric() {
    let p = StableParams::new(2, 1.5).unwrap();
    let ball = Domain::unit_ball(2);
    let pot = KillingPotential::critical(Geometry::BoundaryDistance, 1.5, 0.2).unwrap();
    let (x, y) = ([0.3, 0.0], [0.5, 0.2]);
    let a = estimate_kernel(&x, &y, 0.1, &p, &ball, &pot, &mc(100_000), 11).unwrap();
    let b = estimate_kernel(&y, &x, 0.1, &p, &ball, &pot, &mc(100_000), 12).unwrap();
    assert!((a.value - b.value).abs() <= a.half_width_95 + b.half_width_95, "{} vs {}", a.value, b.value);
}

#[test]
fn free_cauchy_kernel_and_domination() {
    let p = StableParams::new(1, 1.0).unwrap();
    let free = Domain::whole_space(1);
    let zero = KillingPotential::zero(1.0);
    let t = 1.0;
    let ys: Vec<Vec<f64>> = [0.0, 0.5, 1.0, 2.0, 3.0].iter().map(|&y| vec![y]).collect();
    let s = sample_from(&[0.0], t, &p, &free, &zero, &mc(200_000), 13, &ys).unwrap();
    let phi = ScalingFunction::power(1.0).unwrap();
    let vol = VolumeModel::lebesgue(1);
    let mut ratios = Vec::new();
    for (y, k) in ys.iter().zip(&s.kernels) {
        let k = k.as_ref().unwrap();
        let exact = t / (std::f64::consts::PI * (t * t + y[0] * y[0]));
        assert!((k.value / exact - 1.0).abs() < 0.05, "y={}: {} vs {exact}", y[0], k.value);
        ratios.push((k, tilde_q_unchecked(&phi, &vol, t, y[0].abs())));
    }
    let c0 = ratios.iter().map(|(k, q)| k.value / q).fold(0.0, f64::max);
    assert!(c0.is_finite() && c0 < 10.0);
    for (k, q) in &ratios {
        assert!(k.value <= (1.0 + 3.0 * k.half_width_95 / k.value) * c0 * q);
    }
}

#[test]
fn sparse_window_is_an_error() {
    let p = StableParams::new(2, 1.5).unwrap();
    let r = estimate_kernel(
        &[0.0, 0.0],
        &[0.9, 0.0],
        0.01,
        &p,
        &Domain::unit_ball(2),
        &KillingPotential::zero(1.5),
        &mc(2000),
        1,
    );
    assert!(matches!(r, Err(Error::Estimator(_))));
}

#[test]
fn free_factorization_reduces_to_kernel_ratio() {
    let p = StableParams::new(1, 1.0).unwrap();
    let xs: Vec<Vec<f64>> = vec![vec![0.0], vec![0.5]];
    let ys: Vec<Vec<f64>> = vec![vec![0.2], vec![1.0]];
    let rep = factorization_report(&p, &Domain::whole_space(1), &KillingPotential::zero(1.0), 1.0, &xs, &ys, &mc(50_000), 2)
        .unwrap();
    assert_eq!(rep.rows.len(), 4);
    for row in &rep.rows {
        assert_eq!((row.survival_x, row.survival_y), (1.0, 1.0));
        assert!(row.ratio > 0.1 && row.ratio < 10.0);
    }
    assert!(rep.spread >= 1.0);
}
