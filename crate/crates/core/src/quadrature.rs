//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! The interval list is seeded with the caller's breakpoints and the piece
//! with the largest error estimate is bisected until the summed estimate
//! meets `max(abs_tol, rel_tol * |I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(Error::input(format!(
                "quadrature tolerances must be positive, got abs {} rel {} max {}",
                self.abs_tol, self.rel_tol, self.max_subdivisions
            )));
        }
        Ok(())
    }

    pub fn with_tols(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureConfig {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_err: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077382959313287,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    l1: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64, bool) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut resabs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    let mut finite = fc.is_finite();
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        finite &= f1.is_finite() && f2.is_finite();
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let ah = h.abs();
    let err = rescale_error((res_k - res_g) * h, resabs * ah, resasc * ah);
    (res_k * h, err, resabs * ah, finite)
}

#[derive(Clone, Copy)]
enum Criterion {
    /// err ≤ max(abs_tol, rel_tol |I|)
    Value,
    /// err ≤ rel_tol ∫|f|; for integrands with heavy cancellation
    L1,
}

fn adapt<F: FnMut(f64) -> f64>(
    mut f: F,
    pts: &[f64],
    cfg: &QuadratureConfig,
    crit: Criterion,
) -> Result<Quadrature> {
    if pts.len() < 2 {
        return Err(Error::input("quadrature needs at least two breakpoints"));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let eval = |f: &mut F, a: f64, b: f64, evaluations: &mut usize| {
        let (value, err, l1, ok) = gk21(f, a, b);
        *evaluations += 21;
        if !ok {
            return Err(Error::numeric(
                format!("non-finite integrand on [{a:e}, {b:e}]"),
                f64::NAN,
            ));
        }
        Ok(Piece { a, b, value, err, l1 })
    };
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::input(format!("non-finite breakpoint in [{a}, {b}]")));
        }
        if a == b {
            continue;
        }
        heap.push(eval(&mut f, a, b, &mut evaluations)?);
    }
    let total = |heap: &BinaryHeap<Piece>| {
        let mut v = NeumaierSum::default();
        let mut e = NeumaierSum::default();
        let mut l = NeumaierSum::default();
        for p in heap.iter() {
            v.add(p.value);
            e.add(p.err);
            l.add(p.l1);
        }
        (v.sum(), e.sum(), l.sum())
    };
    let target = |v: f64, l1: f64| match crit {
        Criterion::Value => cfg.abs_tol.max(cfg.rel_tol * v.abs()),
        Criterion::L1 => cfg.rel_tol * l1,
    };
    let (mut value, mut err, mut l1) = total(&heap);
    let mut splits = 0;
    while err > target(value, l1) && splits < cfg.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a.min(worst.b) && m < worst.a.max(worst.b)) {
            // Interval exhausted at machine resolution.
            heap.push(worst);
            break;
        }
        let left = eval(&mut f, worst.a, m, &mut evaluations)?;
        let right = eval(&mut f, m, worst.b, &mut evaluations)?;
        splits += 1;
        // Recompute from scratch every so often to shed accumulated drift.
        if splits % 64 == 0 {
            heap.push(left);
            heap.push(right);
            (value, err, l1) = total(&heap);
        } else {
            value += left.value + right.value - worst.value;
            err += left.err + right.err - worst.err;
            l1 += left.l1 + right.l1 - worst.l1;
            heap.push(left);
            heap.push(right);
        }
    }
    let (value, err, l1) = total(&heap);
    Ok(Quadrature {
        value,
        abs_err: err,
        evaluations,
        converged: err <= target(value, l1),
    })
}

/// Adaptive integral over the consecutive pieces `[pts[0], pts[1]], ...`.
/// Returns the best estimate even when the tolerance was not met; check
/// `converged`.  Non-finite integrand values are an error.
pub fn integrate_lenient<F: FnMut(f64) -> f64>(
    f: F,
    pts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Quadrature> {
    adapt(f, pts, cfg, Criterion::Value)
}

/// Like [`integrate_lenient`], but the tolerance is `rel_tol` times the
/// integral of |f| (`abs_tol` is ignored).  Suited to integrands whose
/// positive and negative parts nearly cancel.
pub fn integrate_l1<F: FnMut(f64) -> f64>(
    f: F,
    pts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Quadrature> {
    adapt(f, pts, cfg, Criterion::L1)
}

/// Like [`integrate_lenient`] but non-convergence is a numeric error.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    pts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Quadrature> {
    let q = integrate_lenient(f, pts, cfg)?;
    if !q.converged {
        return Err(Error::numeric(
            format!(
                "adaptive quadrature did not converge in {} subdivisions (value {:e})",
                cfg.max_subdivisions, q.value
            ),
            q.abs_err,
        ));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let cfg = QuadratureConfig::default();
        for k in 0..30 {
            let q = integrate(|x: f64| x.powi(k), &[0.0, 1.0], &cfg).unwrap();
            assert!((q.value - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k={k}");
            if k < 20 {
                assert_eq!(q.evaluations, 21);
            }
        }
    }

    #[test]
    fn endpoint_singularity_converges() {
        let cfg = QuadratureConfig::default();
        let q = integrate(|x: f64| x.powf(-0.5), &[0.0, 1.0], &cfg).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let cfg = QuadratureConfig::default();
        let q = integrate(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], &cfg).unwrap();
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn failure_is_reported() {
        let cfg = QuadratureConfig {
            max_subdivisions: 3,
            ..QuadratureConfig::default()
        };
        let err = integrate(|x: f64| (1.0 / x).sin() / x, &[1e-6, 1.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }

    #[test]
    fn nonfinite_integrand_is_an_error() {
        let cfg = QuadratureConfig::default();
        assert!(integrate(|_| f64::NAN, &[0.0, 1.0], &cfg).is_err());
    }
}
