use critkill_core::model::{Domain, Geometry, KillingPotential, StableParams};
use critkill_core::rng::KeyedRng;
use critkill_core::sampler::{
    isotropic_stable_increment, positive_stable_increment, read_path_dump, simulate_path, write_path_dump,
    PathConfig, VectorField,
};
use statrs::function::erf::erfc;
use std::sync::Arc;

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn quantiles(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    (1..10).map(|k| xs[k * xs.len() / 10]).collect()
}

fn positive_samples(index: f64, h: f64, n: usize, stream: u64) -> Vec<f64> {
    let mut rng = KeyedRng::new(11, stream, 0, 0);
    (0..n).map(|_| positive_stable_increment(index, h, &mut rng)).collect()
}

#[test]
fn half_index_matches_levy_law() {
    let h = 1.7;
    let xs = positive_samples(0.5, h, 100_000, 1);
    // Laplace transform e^{-h√λ} gives P(S ≤ x) = erfc(h / (2√x))
    let d = ks(xs, |x| erfc(h / (2.0 * x.sqrt())));
    assert!(d < 0.01, "KS distance {d}");
}

#[test]
fn positive_stable_scaling() {
    for index in [0.3, 0.75] {
        let h: f64 = 3.0;
        let unit = quantiles(positive_samples(index, 1.0, 200_000, 2));
        let scaled = quantiles(positive_samples(index, h, 200_000, 3));
        for (a, b) in unit.iter().zip(&scaled) {
            // compare on the S^index scale, where the upper deciles are not heavy-tailed
            let r = (b / a).powf(index) / h;
            assert!((r - 1.0).abs() < 0.02, "index {index}: ratio {r}");
        }
    }
}

#[test]
fn positive_stable_is_positive() {
    for index in [0.05, 0.6, 0.95] {
        assert!(positive_samples(index, 0.01, 1_000_000, 4).iter().all(|&s| s > 0.0 && s.is_finite()));
    }
}

fn iso_samples(d: usize, alpha: f64, h: f64, n: usize, stream: u64) -> Vec<Vec<f64>> {
    let p = StableParams::new(d, alpha).unwrap();
    let mut rng = KeyedRng::new(5, stream, 0, 0);
    (0..n)
        .map(|_| {
            let mut v = vec![0.0; d];
            isotropic_stable_increment(&p, h, &mut rng, &mut v);
            v
        })
        .collect()
}

#[test]
fn isotropic_mean_direction_vanishes() {
    for (d, alpha) in [(2, 1.3), (3, 0.7)] {
        let xs = iso_samples(d, alpha, 1.0, 100_000, 6);
        let mut m = vec![0.0; d];
        for x in &xs {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..d {
                m[i] += x[i] / r / xs.len() as f64;
            }
        }
        let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 0.01, "d={d}: {norm}");
    }
}

#[test]
fn cauchy_increments() {
    let h = 0.7;
    let xs: Vec<f64> = iso_samples(1, 1.0, h, 100_000, 7).into_iter().map(|v| v[0]).collect();
    let d = ks(xs, |x| 0.5 + (x / h).atan() / std::f64::consts::PI);
    assert!(d < 0.01, "KS distance {d}");
}

#[test]
fn isotropic_self_similarity() {
    let (alpha, h) = (1.5, 0.2f64);
    let radius = |v: &Vec<f64>| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let unit = quantiles(iso_samples(2, alpha, 1.0, 100_000, 8).iter().map(radius).collect());
    let small = quantiles(iso_samples(2, alpha, h, 100_000, 9).iter().map(radius).collect());
    for (a, b) in unit.iter().zip(&small) {
        assert!((b / (a * h.powf(1.0 / alpha)) - 1.0).abs() < 0.03);
    }
}

#[test]
fn free_paths_are_never_killed() {
    let p = StableParams::new(2, 1.2).unwrap();
    let pot = KillingPotential::critical(Geometry::BoundaryDistance, 1.2, 2.0).unwrap();
    let cfg = PathConfig::new(3.0);
    for id in 0..200 {
        let path = simulate_path(&[0.5, -1.0], &p, &Domain::whole_space(2), &pot, &cfg, 1, id).unwrap();
        assert!(path.killed_at.is_none() && !path.truncated);
        assert!(path.functional.iter().all(|&a| a == 0.0));
        assert!(path.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*path.times.last().unwrap(), 3.0);
        assert_eq!(path.weight(), 1.0);
    }
}

#[test]
fn ball_survival_fraction_decreases() {
    let p = StableParams::new(2, 1.5).unwrap();
    let ball = Domain::unit_ball(2);
    let pot = KillingPotential::zero(1.5);
    let cfg = PathConfig::new(10.0);
    let exits: Vec<f64> = (0..4000)
        .map(|id| {
            let path = simulate_path(&[0.0, 0.0], &p, &ball, &pot, &cfg, 2, id).unwrap();
            path.killed_at.map_or(f64::INFINITY, |(t, _)| t)
        })
        .collect();
    let alive: Vec<usize> = (1..=10)
        .map(|k| exits.iter().filter(|&&e| e > 0.1 * k as f64).count())
        .collect();
    assert!(alive.windows(2).all(|w| w[1] < w[0]), "{alive:?}");
}

#[test]
fn larger_amplitude_gives_larger_functional() {
    let p = StableParams::new(2, 1.5).unwrap();
    let h = Domain::half_space(2);
    let cfg = PathConfig::new(1.0);
    let weak = KillingPotential::critical(Geometry::BoundaryDistance, 1.5, 0.1).unwrap();
    let strong = KillingPotential::critical(Geometry::BoundaryDistance, 1.5, 0.3).unwrap();
    for id in 0..300 {
        let a = simulate_path(&[0.0, 0.3], &p, &h, &weak, &cfg, 3, id).unwrap();
        let b = simulate_path(&[0.0, 0.3], &p, &h, &strong, &cfg, 3, id).unwrap();
        let n = a.positions.len().min(b.positions.len());
        assert_eq!(a.positions[..n], b.positions[..n]);
        for k in 1..n {
            assert!(b.functional[k] >= a.functional[k]);
        }
        assert!(b.weight() <= a.weight());
    }
}

#[test]
fn realizations_are_reproducible() {
    let p = StableParams::new(3, 0.9).unwrap();
    let ball = Domain::unit_ball(3);
    let pot = KillingPotential::critical(Geometry::BoundaryDistance, 0.9, 0.4).unwrap();
    let cfg = PathConfig::new(0.5);
    let a = simulate_path(&[0.1, 0.2, 0.0], &p, &ball, &pot, &cfg, 9, 42).unwrap();
    let b = simulate_path(&[0.1, 0.2, 0.0], &p, &ball, &pot, &cfg, 9, 42).unwrap();
    assert_eq!(a, b);
    let c = simulate_path(&[0.1, 0.2, 0.0], &p, &ball, &pot, &cfg, 9, 43).unwrap();
    assert_ne!(a.positions, c.positions);
    assert!(a.functional.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn path_dump_round_trip() {
    let p = StableParams::new(2, 1.1).unwrap();
    let ball = Domain::unit_ball(2);
    let pot = KillingPotential::critical(Geometry::BoundaryDistance, 1.1, 0.2).unwrap();
    let cfg = PathConfig::new(0.2);
    let mut buf = Vec::new();
    let paths: Vec<_> = (0..5)
        .map(|id| simulate_path(&[0.2, 0.1], &p, &ball, &pot, &cfg, 4, id).unwrap())
        .collect();
    for (id, path) in paths.iter().enumerate() {
        write_path_dump(&mut buf, id as u64, path).unwrap();
    }
    let expected: usize = paths.iter().map(|q| 12 + q.times.len() * 8 * 4).sum();
    assert_eq!(buf.len(), expected);
    let back = read_path_dump(&mut buf.as_slice(), 2).unwrap();
    assert_eq!(back.len(), 5);
    for (rec, path) in back.iter().zip(&paths) {
        assert_eq!(rec.times, path.times);
        assert_eq!(rec.positions, path.positions);
        assert_eq!(rec.functional, path.functional);
    }
    assert!(read_path_dump(&mut &buf[..buf.len() - 3], 2).is_err());
}

#[test]
fn constant_drift_shifts_the_median() {
    let p = StableParams::new(1, 1.5).unwrap();
    let mut cfg = PathConfig::new(1.0);
    let g: VectorField = Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 0.7);
    cfg.drift = Some(g);
    let pot = KillingPotential::zero(1.5);
    let mut ends: Vec<f64> = (0..20_000)
        .map(|id| *simulate_path(&[0.0], &p, &Domain::whole_space(1), &pot, &cfg, 5, id).unwrap().positions.last().unwrap().first().unwrap())
        .collect();
    ends.sort_by(f64::total_cmp);
    let median = ends[ends.len() / 2];
    assert!((median - 0.7).abs() < 0.03, "median {median}");
}
