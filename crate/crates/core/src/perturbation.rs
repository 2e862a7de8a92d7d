//! Finite-grid realization of the perturbation machinery on the interval
//! (0, 1): killed regional generator, Feynman–Kac semigroup, Duhamel
//! series, Kato functional and the 3P inequality.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::amplitude;
use crate::error::{Error, Result};
use crate::feynman_kac::with_workers;
use crate::model::{dist, tilde_q_unchecked, ScalingFunction, StableParams, VolumeModel};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rng::KeyedRng;

#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    pub n: usize,
    pub alpha: f64,
    pub h: f64,
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
    /// Q_U: jumps inside the interval, diagonal carries the complement killing κ_U.
    pub generator: DMatrix<f64>,
    pub kappa_u: Vec<f64>,
}

impl GridModel {
    /// δ(x_i) = min(x_i, 1 - x_i).
    pub fn boundary_distance(&self) -> Vec<f64> {
        self.points.iter().map(|&x| x.min(1.0 - x)).collect()
    }

    /// 𝒜(1,-α)/α, the amplitude of the complement killing κ_U near an
    /// endpoint; the critical constant for the α/2 profile.
    pub fn critical_amplitude(&self) -> f64 {
        let params = StableParams { d: 1, alpha: self.alpha };
        amplitude(&params) / self.alpha
    }

    /// c1·δ^{-α} at the grid points.
    pub fn critical_kappa(&self, c1: f64) -> Vec<f64> {
        self.boundary_distance().iter().map(|d| c1 * d.powf(-self.alpha)).collect()
    }
}

pub fn build_generator(n: usize, alpha: f64) -> Result<GridModel> {
    if n < 8 {
        return Err(Error::input(format!("grid needs at least 8 points, got {n}")));
    }
    let params = StableParams::new(1, alpha)?;
    let a = amplitude(&params);
    let h = 1.0 / (n as f64 + 1.0);
    let points: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    // jump rate to a cell k spacings away
    let rate: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { a * h * (k as f64 * h).powf(-1.0 - alpha) }).collect();
    let kappa_u: Vec<f64> = points
        .iter()
        .map(|&x| a / alpha * (x.powf(-alpha) + (1.0 - x).powf(-alpha)))
        .collect();
    let mut q = DMatrix::from_fn(n, n, |i, j| rate[i.abs_diff(j)]);
    for i in 0..n {
        let out: f64 = q.row(i).iter().sum();
        q[(i, i)] = -out - kappa_u[i];
    }
    Ok(GridModel {
        n,
        alpha,
        h,
        points,
        masses: vec![h; n],
        generator: q,
        kappa_u,
    })
}

fn check_kappa(model: &GridModel, kappa: &[f64]) -> Result<()> {
    if kappa.len() != model.n {
        return Err(Error::input(format!("κ has {} entries, grid has {}", kappa.len(), model.n)));
    }
    if kappa.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
        return Err(Error::input("κ must be finite and non-negative"));
    }
    Ok(())
}

/// exp(t(Q_U - diag κ)).  Rounding-level negative entries are set to zero.
pub fn semigroup(model: &GridModel, kappa: &[f64], t: f64) -> Result<DMatrix<f64>> {
    check_kappa(model, kappa)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::input(format!("time {t} must be positive")));
    }
    let mut m = model.generator.clone();
    for i in 0..model.n {
        m[(i, i)] -= kappa[i];
    }
    let mut e = (m * t).exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("matrix exponential produced non-finite entries", f64::NAN));
    }
    let floor = 1e-13 * e.amax();
    for v in e.iter_mut() {
        if *v < 0.0 {
            if *v < -floor {
                return Err(Error::numeric(format!("semigroup entry {v:e} is negative"), -*v));
            }
            *v = 0.0;
        }
    }
    Ok(e)
}

pub fn max_row_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Truncated series Σ_k ε^k A_k with matrix coefficients.
type Series = Vec<DMatrix<f64>>;

fn conv(a: &Series, b: &Series) -> Series {
    let k = a.len();
    let n = a[0].nrows();
    (0..k)
        .map(|m| {
            let mut c = DMatrix::zeros(n, n);
            for j in 0..=m {
                c.gemm(1.0, &a[j], &b[m - j], 1.0);
            }
            c
        })
        .collect()
}

fn series_norm(a: &Series) -> f64 {
    a.iter().map(max_row_sum).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelSeries {
    /// p^k(t) for k = 0..=K (transition matrices, signs included).
    pub terms: Vec<DMatrix<f64>>,
    pub partial_sums: Vec<DMatrix<f64>>,
    /// ‖p^k‖_∞.
    pub term_norms: Vec<f64>,
}

impl DuhamelSeries {
    /// First K with ‖p^{K+1}‖_∞ < tol; by alternation this bounds the
    /// remainder of S_K entrywise.
    pub fn first_converged(&self, tol: f64) -> Option<usize> {
        (0..self.terms.len() - 1).find(|&k| self.term_norms[k + 1] < tol)
    }

    /// Entries where S_{2m+1} ≤ exact ≤ S_{2m} fails beyond rounding, for
    /// all partial sums up to `k_max`.
    pub fn bracketing_violations(&self, exact: &DMatrix<f64>, k_max: usize) -> usize {
        let mut scale = DMatrix::<f64>::zeros(exact.nrows(), exact.ncols());
        let mut bad = 0;
        for k in 0..=k_max.min(self.terms.len() - 1) {
            scale += self.terms[k].abs();
            let s = &self.partial_sums[k];
            for ((sv, ev), sc) in s.iter().zip(exact.iter()).zip(scale.iter()) {
                let tol = 64.0 * f64::EPSILON * (sc + ev.abs());
                let ok = if k % 2 == 0 { *ev <= sv + tol } else { *sv <= ev + tol };
                if !ok {
                    bad += 1;
                }
            }
        }
        bad
    }
}

/// Duhamel terms p^k(t) = -∫_0^t e^{sQ} K p^{k-1}(t-s) ds for k ≤ `k_max`.
///
/// All terms come from one exponential in the truncated algebra
/// Σ ε^k A_k (ε^{K+1} = 0): exp(t(Q - εK)) = Σ ε^k p^k(t).
pub fn duhamel_series(model: &GridModel, kappa: &[f64], t: f64, k_max: usize) -> Result<DuhamelSeries> {
    check_kappa(model, kappa)?;
    if k_max < 1 {
        return Err(Error::input("series order must be at least 1"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::input(format!("time {t} must be positive")));
    }
    let n = model.n;
    let len = k_max + 1;
    let m0 = &model.generator * t;
    let m1 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, kappa.iter().map(|k| -k * t)));
    let norm = max_row_sum(&m0) + max_row_sum(&m1);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(squarings);
    let (a0, a1) = (&m0 * scale, &m1 * scale);
    // Taylor series of exp(A) with A = a0 + ε a1
    let mut sum: Series = vec![DMatrix::zeros(n, n); len];
    sum[0] = DMatrix::identity(n, n);
    let mut term = sum.clone();
    for j in 1..40 {
        let mut next: Series = vec![DMatrix::zeros(n, n); len];
        for k in 0..len {
            next[k].gemm(1.0 / j as f64, &term[k], &a0, 0.0);
            if k > 0 {
                next[k].gemm(1.0 / j as f64, &term[k - 1], &a1, 1.0);
            }
        }
        term = next;
        for k in 0..len {
            sum[k] += &term[k];
        }
        if series_norm(&term) <= 1e-18 * series_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = conv(&sum, &sum);
    }
    if sum.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(Error::numeric("series exponential produced non-finite entries", f64::NAN));
    }
    let term_norms = sum.iter().map(max_row_sum).collect();
    let mut partial_sums = Vec::with_capacity(len);
    let mut acc = DMatrix::zeros(n, n);
    for p in &sum {
        acc += p;
        partial_sums.push(acc.clone());
    }
    Ok(DuhamelSeries {
        terms: sum,
        partial_sums,
        term_norms,
    })
}

/// First-order term by composite Simpson in s, for cross-checking.
pub fn duhamel_first_term_simpson(model: &GridModel, kappa: &[f64], t: f64, panels: usize) -> Result<DMatrix<f64>> {
    check_kappa(model, kappa)?;
    let panels = panels.max(2) + panels % 2;
    let zero = vec![0.0; model.n];
    let ds = t / panels as f64;
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(kappa));
    let at = |s: f64| -> Result<DMatrix<f64>> {
        let left = if s > 0.0 { semigroup(model, &zero, s)? } else { DMatrix::identity(model.n, model.n) };
        let right = if s < t { semigroup(model, &zero, t - s)? } else { DMatrix::identity(model.n, model.n) };
        Ok(left * &k * right)
    };
    let mut acc = DMatrix::zeros(model.n, model.n);
    for i in 0..=panels {
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += at(i as f64 * ds)? * w;
    }
    Ok(acc * (-ds / 3.0))
}

/// ∫_0^t q̃(s, ρ) ds in d = 1 with Φ(r) = r^α and V(r) = 2r.
pub fn time_integrated_kernel(alpha: f64, t: f64, rho: f64) -> f64 {
    let cross = rho.powf(alpha);
    let m = t.min(cross);
    let first = if rho > 0.0 { m * m / (4.0 * rho.powf(1.0 + alpha)) } else { 0.0 };
    let second = if t > cross {
        if (alpha - 1.0).abs() < 1e-12 {
            0.5 * (t / rho).ln()
        } else {
            (t.powf(1.0 - 1.0 / alpha) - rho.powf(alpha - 1.0)) / (2.0 * (1.0 - 1.0 / alpha))
        }
    } else {
        0.0
    };
    first + second
}

/// N_a(t) = sup_x Σ_z κ(z) ∫_{cell z} ∫_0^t q̃(s, x, u) ds du over cells with
/// δ(z) > a·t^{1/α}.
pub fn kato_functional(model: &GridModel, kappa: &[f64], a: f64, t: f64) -> Result<f64> {
    check_kappa(model, kappa)?;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::input(format!("Kato parameter a = {a} not in [0, 1]")));
    }
    if !(t > 0.0) {
        return Err(Error::input(format!("time {t} must be positive")));
    }
    let (alpha, h, n) = (model.alpha, model.h, model.n);
    let cfg = QuadratureConfig::with_tols(1e-16, 1e-10);
    let cross = t.powf(1.0 / alpha);
    let g = |u: f64| time_integrated_kernel(alpha, t, u);
    // cell weights by offset; the kernel depends only on |x - z|
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let (lo, hi) = if k == 0 { (0.0, 0.5 * h) } else { ((k as f64 - 0.5) * h, (k as f64 + 0.5) * h) };
            let mut pts = vec![lo];
            if cross > lo && cross < hi {
                pts.push(cross);
            }
            pts.push(hi);
            let v = integrate(g, &pts, &cfg).map(|q| q.value)?;
            Ok(if k == 0 { 2.0 * v } else { v })
        })
        .collect::<Result<_>>()?;
    let thresh = a * cross;
    let delta = model.boundary_distance();
    let mut best = 0.0f64;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if delta[j] > thresh {
                s += kappa[j] * weights[i.abs_diff(j)];
            }
        }
        best = best.max(s);
    }
    Ok(best)
}

/// q̃(s,x,z) q̃(t-s,z,y) / (q̃(t,x,y) (q̃(s,x,z) + q̃(t-s,z,y))).
#[allow(clippy::too_many_arguments)]
pub fn three_p_ratio(phi: &ScalingFunction, vol: &VolumeModel, s: f64, t: f64, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let a = tilde_q_unchecked(phi, vol, s, dist(x, z));
    let b = tilde_q_unchecked(phi, vol, t - s, dist(z, y));
    let c = tilde_q_unchecked(phi, vol, t, dist(x, y));
    a * b / (c * (a + b))
}

/// (s, t, x, y, z).
pub type Tuple = (f64, f64, Vec<f64>, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreePReport {
    pub empirical_c: f64,
    pub violations: usize,
    pub n_samples: usize,
    /// The tuple attaining the maximum.
    pub worst: Option<Tuple>,
}

const THREE_P_BLOCK: usize = 4096;

/// Samples t log-uniform in [1e-3, 1], s uniform in (0, t) and x, y, z
/// uniform in [-1, 1]^d; reports the largest ratio and the count of
/// non-finite ones.
pub fn three_p_check(params: &StableParams, n_samples: usize, seed: u64, workers: usize) -> Result<ThreePReport> {
    if n_samples == 0 {
        return Err(Error::input("need at least one sample"));
    }
    let phi = ScalingFunction::power(params.alpha)?;
    let vol = VolumeModel::lebesgue(params.d);
    let d = params.d;
    let blocks = n_samples.div_ceil(THREE_P_BLOCK);
    let run_block = |b: usize| {
        let mut best: (f64, usize, Option<Tuple>) = (0.0, 0, None);
        for i in b * THREE_P_BLOCK..((b + 1) * THREE_P_BLOCK).min(n_samples) {
            let mut rng = KeyedRng::new(seed, 3, i as u64, 0);
            let t = 10f64.powf(-3.0 * rng.open01());
            let s = t * rng.open01();
            let mut pt = || (0..d).map(|_| 2.0 * rng.open01() - 1.0).collect::<Vec<f64>>();
            let (x, y, z) = (pt(), pt(), pt());
            let r = three_p_ratio(&phi, &vol, s, t, &x, &y, &z);
            if !r.is_finite() {
                best.1 += 1;
            } else if r > best.0 {
                best = (r, best.1, Some((s, t, x, y, z)));
            }
        }
        best
    };
    let parts: Vec<_> = with_workers(workers, || (0..blocks).into_par_iter().map(run_block).collect())?;
    let mut report = ThreePReport {
        empirical_c: 0.0,
        violations: 0,
        n_samples,
        worst: None,
    };
    for (c, v, w) in parts {
        report.violations += v;
        if c > report.empirical_c {
            report.empirical_c = c;
            report.worst = w;
        }
    }
    Ok(report)
}

/// One CSV line per matrix row, no header.
pub fn write_matrix_csv<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in m.row_iter() {
        out.write_record(r.iter().map(|v| format!("{v:e}")))
            .map_err(|e| Error::input(format!("csv: {e}")))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_integral_matches_quadrature() {
        for (alpha, t, rho) in [(1.3f64, 0.1f64, 0.05f64), (0.7, 0.01, 0.3), (1.0, 0.5, 0.2), (1.6, 1e-4, 1e-3)] {
            let phi = ScalingFunction::power(alpha).unwrap();
            let vol = VolumeModel::lebesgue(1);
            let cross = rho.powf(alpha);
            let mut pts = vec![0.0];
            if cross < t {
                pts.push(cross);
            }
            pts.push(t);
            let q = integrate(|s: f64| if s == 0.0 { 0.0 } else { tilde_q_unchecked(&phi, &vol, s, rho) }, &pts, &QuadratureConfig::default())
                .unwrap();
            let v = time_integrated_kernel(alpha, t, rho);
            assert!((v / q.value - 1.0).abs() < 1e-9, "{alpha} {t} {rho}: {v} vs {}", q.value);
        }
    }

    #[test]
    fn small_grid_is_rejected() {
        assert!(build_generator(7, 1.0).is_err());
    }
}
