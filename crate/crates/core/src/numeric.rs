//! Small numerical helpers: compensated sums, special-function wrappers,
//! cancellation-free differences and bisection.

use statrs::function::beta::ln_beta as statrs_ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = NeumaierSum::default();
    for x in xs {
        s.add(x);
    }
    s.sum()
}

pub fn beta(a: f64, b: f64) -> f64 {
    statrs_ln_beta(a, b).exp()
}

/// Surface measure of the unit sphere in R^n (n ≥ 1; n = 1 gives the two points ±1).
pub fn sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Lebesgue measure of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    // V_n = V_{n-2} 2π/n keeps the low dimensions exact.
    if n > 60 {
        let h = n as f64 / 2.0;
        return (h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)).exp();
    }
    let mut v = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = 2 + n % 2;
    while k <= n {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// (1+c)^p + (1-c)^p - 2 without cancellation, |c| ≤ 1.
pub fn pow_second_diff(p: f64, c: f64) -> f64 {
    let c2 = c * c;
    if c2 < 0.0625 {
        // 2 Σ_{k≥1} binom(p, 2k) c^{2k}
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut k = 0.0;
        for _ in 0..40 {
            term *= (p - k) * (p - k - 1.0) / ((k + 1.0) * (k + 2.0)) * c2;
            k += 2.0;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 * sum
    } else {
        let up = (p * c.ln_1p()).exp_m1();
        let dn = if c >= 1.0 {
            -1.0 + (1.0 - c).powf(p)
        } else {
            (p * (-c).ln_1p()).exp_m1()
        };
        up + dn
    }
}

/// (1+η)^q - 1 - qη without cancellation, η > -1.
pub fn pow_minus_linear(q: f64, eta: f64) -> f64 {
    if eta.abs() < 0.125 {
        let mut term = q * eta;
        let mut sum = 0.0;
        let mut k = 1.0;
        for _ in 0..60 {
            term *= (q - k) / (k + 1.0) * eta;
            k += 1.0;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (q * eta.ln_1p()).exp_m1() - q * eta
    }
}

/// Bisection for an increasing function on `[lo, hi]` with `f(lo) ≤ target ≤ f(hi)`.
/// Runs to machine resolution of the bracket.
pub fn bisect_increasing<F>(mut f: F, mut lo: f64, mut hi: f64, target: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::input(format!("empty bisection bracket [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
