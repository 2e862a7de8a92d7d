//! Shared domain types: stable parameters, scaling and volume models,
//! geometric domains, killing potentials and the comparison kernel q̃.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::amplitude;
use crate::error::{Error, Result};
use crate::numeric::unit_ball_volume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub d: usize,
    pub alpha: f64,
}

impl StableParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::input("dimension must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::input(format!("stability index {alpha} not in (0, 2)")));
        }
        Ok(StableParams { d, alpha })
    }
}

/// Power-law scale function Φ(r) = r^exponent with weak-scaling witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFunction {
    pub exponent: f64,
    pub delta_l: f64,
    pub delta_u: f64,
    pub a_l: f64,
    pub a_u: f64,
}

impl ScalingFunction {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::input(format!("scaling exponent {exponent} must be positive")));
        }
        Ok(ScalingFunction {
            exponent,
            delta_l: exponent,
            delta_u: exponent,
            a_l: 1.0,
            a_u: 1.0,
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        r.powf(self.exponent)
    }

    pub fn inverse(&self, t: f64) -> f64 {
        t.powf(1.0 / self.exponent)
    }

    /// Two-sided weak scaling inequality at `0 < r ≤ big_r`.  A relative
    /// slack of a few ulps absorbs the rounding of the power evaluations.
    pub fn scaling_holds(&self, r: f64, big_r: f64) -> bool {
        let ratio = self.eval(big_r) / self.eval(r);
        let q = big_r / r;
        let slack = 1.0 + 8.0 * f64::EPSILON;
        self.a_l * q.powf(self.delta_l) <= ratio * slack
            && ratio <= self.a_u * q.powf(self.delta_u) * slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeModel {
    pub v_d: f64,
    pub d: usize,
}

impl VolumeModel {
    pub fn lebesgue(d: usize) -> Self {
        VolumeModel {
            v_d: unit_ball_volume(d),
            d,
        }
    }

    pub fn volume(&self, r: f64) -> f64 {
        self.v_d * r.powi(self.d as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    WholeSpace,
    HalfSpace,
    Ball { center: Vec<f64>, radius: f64 },
    PuncturedSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub dim: usize,
    /// Descriptive (R₁, κ) fatness characteristics; never used in computation.
    #[serde(default)]
    pub fatness: Option<(f64, f64)>,
}

impl Domain {
    pub fn whole_space(dim: usize) -> Self {
        Domain {
            kind: DomainKind::WholeSpace,
            dim,
            fatness: Some((f64::INFINITY, 0.5)),
        }
    }

    pub fn half_space(dim: usize) -> Self {
        Domain {
            kind: DomainKind::HalfSpace,
            dim,
            fatness: Some((f64::INFINITY, 0.5)),
        }
    }

    pub fn punctured(dim: usize) -> Self {
        Domain {
            kind: DomainKind::PuncturedSpace,
            dim,
            fatness: None,
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::input(format!("ball radius {radius} must be positive")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("ball center must be a finite non-empty point"));
        }
        let dim = center.len();
        Ok(Domain {
            kind: DomainKind::Ball { center, radius },
            dim,
            fatness: Some((radius, 0.5)),
        })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Domain::ball(vec![0.0; dim], 1.0).expect("unit ball is valid")
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::input(format!(
                "point has dimension {}, domain has dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Distance to the boundary; +∞ for the whole space.  No dimension check.
    pub fn dist_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::WholeSpace => f64::INFINITY,
            DomainKind::HalfSpace => x[x.len() - 1].max(0.0),
            DomainKind::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (radius - r2.sqrt()).max(0.0)
            }
            DomainKind::PuncturedSpace => norm(x),
        }
    }

    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("point has non-finite coordinates"));
        }
        Ok(self.dist_unchecked(x))
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.dist_to_boundary(x)? > 0.0)
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            DomainKind::WholeSpace => "whole",
            DomainKind::HalfSpace => "half-space",
            DomainKind::Ball { .. } => "ball",
            DomainKind::PuncturedSpace => "punctured",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    BoundaryDistance,
    OriginDistance,
}

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Critical killing potential
/// κ(x) = max(0, C1·dist^{-α} + C2·dist^{-η}·clamp(φ(x), -1, 1)).
#[derive(Clone)]
pub struct KillingPotential {
    pub geometry: Geometry,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub eta: f64,
    pub perturbation: Option<ScalarField>,
}

impl fmt::Debug for KillingPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KillingPotential")
            .field("geometry", &self.geometry)
            .field("alpha", &self.alpha)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .field("eta", &self.eta)
            .field("perturbation", &self.perturbation.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl KillingPotential {
    pub fn new(
        geometry: Geometry,
        alpha: f64,
        c1: f64,
        c2: f64,
        eta: f64,
        perturbation: Option<ScalarField>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::input(format!("stability index {alpha} not in (0, 2)")));
        }
        if !(c1 >= 0.0) || !c1.is_finite() || !(c2 >= 0.0) || !c2.is_finite() {
            return Err(Error::input(format!("amplitudes must be finite and ≥ 0: C1={c1} C2={c2}")));
        }
        if !(eta >= 0.0 && eta < alpha) {
            return Err(Error::input(format!("perturbation order {eta} not in [0, {alpha})")));
        }
        Ok(KillingPotential {
            geometry,
            alpha,
            c1,
            c2,
            eta,
            perturbation,
        })
    }

    pub fn zero(alpha: f64) -> Self {
        KillingPotential::new(Geometry::BoundaryDistance, alpha, 0.0, 0.0, 0.0, None)
            .expect("zero potential is valid")
    }

    /// Pure critical power C1·dist^{-α}.
    pub fn critical(geometry: Geometry, alpha: f64, c1: f64) -> Result<Self> {
        KillingPotential::new(geometry, alpha, c1, 0.0, 0.0, None)
    }

    pub fn is_zero(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0
    }

    pub fn distance(&self, domain: &Domain, x: &[f64]) -> f64 {
        match self.geometry {
            Geometry::BoundaryDistance => domain.dist_unchecked(x),
            Geometry::OriginDistance => norm(x),
        }
    }

    /// κ at a point whose distance has already been computed.  Used by the
    /// sampler's inner loop.
    pub fn eval_at(&self, dist: f64, x: &[f64]) -> f64 {
        if self.is_zero() || dist == f64::INFINITY {
            return 0.0;
        }
        let main = self.c1 * dist.powf(-self.alpha);
        let pert = match (&self.perturbation, self.c2 > 0.0) {
            (Some(phi), true) => self.c2 * dist.powf(-self.eta) * phi(x).clamp(-1.0, 1.0),
            _ => 0.0,
        };
        (main + pert).max(0.0)
    }
}

/// κ(x) per the potential's geometry.
pub fn kappa_of(pot: &KillingPotential, domain: &Domain, x: &[f64]) -> Result<f64> {
    domain.check_dim(x)?;
    let dist = pot.distance(domain, x);
    if pot.is_zero() {
        return Ok(0.0);
    }
    if pot.geometry == Geometry::BoundaryDistance && domain.kind == DomainKind::WholeSpace {
        return Ok(0.0);
    }
    if dist == 0.0 {
        return Err(Error::Singularity(format!(
            "killing potential evaluated at distance 0 (x = {x:?})"
        )));
    }
    if pot.geometry == Geometry::BoundaryDistance && !domain.contains(x)? {
        return Err(Error::Singularity(format!("point {x:?} is outside the domain")));
    }
    Ok(pot.eval_at(dist, x))
}

pub type PairField = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Symmetric non-local perturbation b with kernel
/// B(x,y) = 𝒜(d,-α) + |x-y|^{α-β} b(x,y).
#[derive(Clone)]
pub struct NonlocalPerturbation {
    pub beta: f64,
    pub b: PairField,
    pub cb1: f64,
    pub cb2: f64,
    pub cb3: f64,
    pub beta1: f64,
}

impl fmt::Debug for NonlocalPerturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlocalPerturbation")
            .field("beta", &self.beta)
            .field("cb1", &self.cb1)
            .field("cb2", &self.cb2)
            .field("cb3", &self.cb3)
            .field("beta1", &self.beta1)
            .finish()
    }
}

impl NonlocalPerturbation {
    /// Constant b ≡ value.
    pub fn constant(params: &StableParams, beta: f64, value: f64) -> Result<Self> {
        if !(beta < params.alpha) {
            return Err(Error::input(format!("beta {beta} must be below alpha {}", params.alpha)));
        }
        let amp = amplitude(params);
        Ok(NonlocalPerturbation {
            beta,
            b: Arc::new(move |_, _| value),
            cb1: value.abs(),
            // Positivity floor of B over a unit-diameter domain.
            cb2: (amp - value.abs()).max(0.0),
            cb3: 0.0,
            beta1: 1.0,
        })
    }

    pub fn kernel(&self, params: &StableParams, x: &[f64], y: &[f64]) -> f64 {
        let r = dist(x, y);
        amplitude(params) + r.powf(params.alpha - self.beta) * (self.b)(x, y)
    }

    /// Checks the declared bounds at the supplied point pairs.
    pub fn check_bounds(&self, params: &StableParams, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
        for (x, y) in pairs {
            let bxy = (self.b)(x, y);
            let byx = (self.b)(y, x);
            if (bxy - byx).abs() > 1e-12 * bxy.abs().max(1.0) {
                return Err(Error::input("b is not symmetric"));
            }
            if bxy.abs() > self.cb1 {
                return Err(Error::input(format!("|b| = {} exceeds Cb1 = {}", bxy.abs(), self.cb1)));
            }
            let holder = self.cb3 * dist(x, y).powf(self.beta1);
            if (bxy - (self.b)(x, x)).abs() > holder + 1e-15 {
                return Err(Error::input("Hölder bound on b violated"));
            }
            if self.kernel(params, x, y) < self.cb2 || !(self.cb2 > 0.0) {
                return Err(Error::input("kernel B falls below Cb2 > 0"));
            }
        }
        Ok(())
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Comparison kernel q̃(t,x,y) = 1/V(Φ^{-1}(t)) ∧ t/(V(ρ)Φ(ρ)) with ρ = |x-y|.
pub fn tilde_q(
    params: &StableParams,
    phi: &ScalingFunction,
    vol: &VolumeModel,
    t: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::input(format!("time {t} must be positive")));
    }
    if x.len() != params.d || y.len() != params.d {
        return Err(Error::input("point dimension does not match parameters"));
    }
    Ok(tilde_q_unchecked(phi, vol, t, dist(x, y)))
}

/// q̃ as a function of the separation ρ.
pub fn tilde_q_unchecked(phi: &ScalingFunction, vol: &VolumeModel, t: f64, rho: f64) -> f64 {
    let on_diag = 1.0 / vol.volume(phi.inverse(t));
    if rho == 0.0 {
        return on_diag;
    }
    let off_diag = t / (vol.volume(rho) * phi.eval(rho));
    on_diag.min(off_diag)
}
