//! Principal-value evaluation of fractional operators applied to power
//! functions, the complement killing density, and the barrier operators.
//!
//! Every integral here is axially symmetric around the evaluation point, so
//! it is written in polar coordinates (ρ, φ) with φ the angle to a fixed
//! axis and reduced to a double integral with weight ω_{d-1} sin^{d-2}φ.
//! Inside `inner_cut` the directions φ and π-φ are paired, which turns the
//! singular integrand into a bounded second difference.

use serde::{Deserialize, Serialize};

use crate::constants::amplitude;
use crate::error::{Error, Result};
use crate::model::{kappa_of, norm, Domain, DomainKind, KillingPotential, NonlocalPerturbation, StableParams};
use crate::numeric::{beta as beta_fn, pow_minus_linear, pow_second_diff, sphere_area};
use crate::quadrature::{integrate, integrate_l1, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PVConfig {
    /// Radius of the symmetric-pairing ball; `None` uses min(δ_D(x), |x|)/4.
    pub inner_cut: Option<f64>,
    /// Truncation radius for unbounded integrals; `None` uses 10³·max(1, |x|).
    pub outer_cut: Option<f64>,
    pub quad: QuadratureConfig,
    /// Largest accepted relative change when `inner_cut` is halved.
    pub richardson_rel_tol: f64,
}

impl Default for PVConfig {
    fn default() -> Self {
        PVConfig {
            inner_cut: None,
            outer_cut: None,
            quad: QuadratureConfig::default(),
            richardson_rel_tol: 1e-6,
        }
    }
}

/// A principal-value result.  `richardson_delta` is the change observed
/// when the pairing radius is halved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvResult {
    pub value: f64,
    pub abs_err: f64,
    pub richardson_delta: f64,
    pub inner_cut: f64,
    pub outer_cut: f64,
}

/// Function of the offset y - x in polar form around an axis.
trait Axisym {
    /// f(ρ,c) + f(ρ,-c) - 2 f(x), c = cos φ; only called for ρ < inner_cut.
    fn second_diff(&self, rho: f64, c: f64) -> f64;
    /// f(y) - f(x), only called with y in the domain.
    fn diff(&self, rho: f64, c: f64) -> f64;
    /// Range of cos φ with y in the domain at radius ρ.
    fn cos_range(&self, rho: f64) -> Option<(f64, f64)>;
    /// Radii where the angular integrand changes shape.
    fn breakpoints(&self) -> Vec<f64>;
    /// Integral over |y - x| > r of (f(y) - f(x)) |y-x|^{-d-β}; zero for
    /// bounded regions.
    fn tail(&self, _r: f64) -> f64 {
        0.0
    }
}

struct Engine {
    d: usize,
    beta: f64,
    quad: QuadratureConfig,
}

impl Engine {
    fn weight(&self, phi: f64) -> f64 {
        match self.d {
            2 => 1.0,
            3 => phi.sin(),
            _ => phi.sin().powi(self.d as i32 - 2),
        }
    }

    fn inner_quad(&self) -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: 0.0,
            rel_tol: (self.quad.rel_tol * 0.1).max(1e-14),
            max_subdivisions: 200,
        }
    }

    /// Raw integral ∫_D (f(y) - f(x)) |y-x|^{-d-β} dy split at `eps`,
    /// truncated at `r_out` plus the analytic tail.  Returns (value, err, L1 scale).
    fn run<F: Axisym>(&self, f: &F, eps: f64, r_out: f64) -> Result<(f64, f64, f64)> {
        if self.d < 2 {
            return Err(Error::Unsupported("principal-value reduction needs d ≥ 2".into()));
        }
        let b = self.beta;
        let iq = self.inner_quad();
        let mut failure: Option<Error> = None;
        let half_pi = std::f64::consts::FRAC_PI_2;

        // Paired inner ball, ρ = ε u^{1/(2-β)}.
        let k = 1.0 / (2.0 - b);
        let pre = eps.powf(2.0 - b) * k;
        let inner = integrate_l1(
            |u: f64| {
                let rho = eps * u.powf(k);
                if rho == 0.0 {
                    return 0.0;
                }
                let ang = integrate_l1(
                    |phi: f64| f.second_diff(rho, phi.cos()) * self.weight(phi),
                    &[0.0, half_pi],
                    &iq,
                );
                match ang {
                    Ok(a) => a.value / (rho * rho) * pre,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &[0.0, 1.0],
            &self.quad,
        )?;
        if let Some(e) = failure.take() {
            return Err(e);
        }

        // Outer shell in s = ln ρ.
        let mut pts = vec![eps.ln()];
        let mut bps = f.breakpoints();
        bps.sort_by(f64::total_cmp);
        for bp in bps {
            if bp > eps * (1.0 + 1e-12) && bp < r_out * (1.0 - 1e-12) {
                pts.push(bp.ln());
            }
        }
        pts.push(r_out.ln());
        let outer = integrate_l1(
            |s: f64| {
                let rho = s.exp();
                let Some((lo, hi)) = f.cos_range(rho) else {
                    return 0.0;
                };
                let (p0, p1) = (hi.clamp(-1.0, 1.0).acos(), lo.clamp(-1.0, 1.0).acos());
                if !(p1 > p0) {
                    return 0.0;
                }
                let mut cuts = vec![p0];
                if p0 < half_pi && p1 > half_pi {
                    cuts.push(half_pi);
                }
                cuts.push(p1);
                let ang = integrate_l1(|phi: f64| f.diff(rho, phi.cos()) * self.weight(phi), &cuts, &iq);
                match ang {
                    Ok(a) => a.value * rho.powf(-b),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &pts,
            &self.quad,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        for (name, q) in [("inner", &inner), ("outer", &outer)] {
            if !q.converged {
                return Err(Error::numeric(
                    format!("principal-value {name} integral did not converge"),
                    q.abs_err,
                ));
            }
        }
        let w = sphere_area(self.d - 1);
        let tail = f.tail(r_out);
        let scale = w * (inner.value.abs() + outer.value.abs()) + tail.abs();
        Ok((w * (inner.value + outer.value) + tail, w * (inner.abs_err + outer.abs_err), scale))
    }

    /// `run` at `eps` and `eps/2`, with the Richardson consistency check.
    fn pv<F: Axisym>(&self, f: &F, eps: f64, r_out: f64, rel_tol: f64) -> Result<PvResult> {
        if !(eps > 0.0 && eps < r_out) {
            return Err(Error::input(format!(
                "need 0 < inner_cut < outer_cut, got {eps} and {r_out}"
            )));
        }
        let (v1, e1, scale) = self.run(f, eps, r_out)?;
        let (v2, e2, _) = self.run(f, 0.5 * eps, r_out)?;
        let delta = (v1 - v2).abs();
        if delta > rel_tol * v2.abs().max(scale * 1e-3) {
            return Err(Error::numeric(
                format!("halving the pairing radius moved the value from {v1:e} to {v2:e}"),
                delta,
            ));
        }
        Ok(PvResult {
            value: v2,
            abs_err: e1.max(e2) + delta,
            richardson_delta: delta,
            inner_cut: eps,
            outer_cut: r_out,
        })
    }
}

/// y_d^p on the half-space (optionally with the analytic tail for β = α).
struct HalfSpacePower {
    d: usize,
    xd: f64,
    p: f64,
    beta: f64,
    with_tail: bool,
}

impl Axisym for HalfSpacePower {
    fn second_diff(&self, rho: f64, c: f64) -> f64 {
        self.xd.powf(self.p) * pow_second_diff(self.p, rho * c / self.xd)
    }

    fn diff(&self, rho: f64, c: f64) -> f64 {
        let z = rho * c / self.xd;
        if z <= -1.0 {
            return if self.p > 0.0 { -self.xd.powf(self.p) } else { 0.0 };
        }
        self.xd.powf(self.p) * (self.p * z.ln_1p()).exp_m1()
    }

    fn cos_range(&self, rho: f64) -> Option<(f64, f64)> {
        Some(((-self.xd / rho).max(-1.0), 1.0))
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.xd]
    }

    fn tail(&self, r: f64) -> f64 {
        if !self.with_tail {
            return 0.0;
        }
        let (d, p, b, x) = (self.d as f64, self.p, self.beta, self.xd);
        let j0 = 0.5 * beta_fn(0.5 * (p + 1.0), 0.5 * (d - 1.0));
        let w0 = 0.5 * beta_fn(0.5, 0.5 * (d - 1.0));
        let first = if p > 0.0 {
            let j1 = p * 0.5 * beta_fn(0.5 * p, 0.5 * (d - 1.0));
            j1 * x * r.powf(p - 1.0 - b) / (b + 1.0 - p)
        } else {
            0.0
        };
        let w = sphere_area(self.d - 1);
        w * (j0 * r.powf(p - b) / (b - p) + first
            - x.powf(p) * (w0 * r.powf(-b) / b + x * r.powf(-1.0 - b) / (b + 1.0)))
    }
}

/// |y|^p on R^d, axis along x.
struct WholeSpacePower {
    d: usize,
    r: f64,
    p: f64,
    alpha: f64,
}

impl Axisym for WholeSpacePower {
    fn second_diff(&self, rho: f64, c: f64) -> f64 {
        let tau = rho / self.r;
        let a = 1.0 + tau * tau;
        let b = 2.0 * tau * c;
        let h = 0.5 * self.p;
        self.r.powf(self.p) * (a.powf(h) * pow_second_diff(h, b / a) + 2.0 * (h * (tau * tau).ln_1p()).exp_m1())
    }

    fn diff(&self, rho: f64, c: f64) -> f64 {
        let tau = rho / self.r;
        let z = tau * (2.0 * c + tau);
        if z <= -1.0 {
            return -self.r.powf(self.p);
        }
        self.r.powf(self.p) * (0.5 * self.p * z.ln_1p()).exp_m1()
    }

    fn cos_range(&self, _rho: f64) -> Option<(f64, f64)> {
        Some((-1.0, 1.0))
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.r]
    }

    fn tail(&self, big_r: f64) -> f64 {
        let (d, p, a, r) = (self.d as f64, self.p, self.alpha, self.r);
        let k2 = 0.5 * p + p * (p - 2.0) / (2.0 * d);
        sphere_area(self.d - 1)
            * beta_fn(0.5 * (d - 1.0), 0.5)
            * (big_r.powf(p - a) / (a - p) + k2 * r * r * big_r.powf(p - a - 2.0) / (a + 2.0 - p)
                - r.powf(p) * big_r.powf(-a) / a)
    }
}

/// δ_B(y)^q on a ball of radius `big_r`; `a` is the distance of x to the center.
struct BallPower {
    big_r: f64,
    a: f64,
    q: f64,
}

impl BallPower {
    fn delta0(&self) -> f64 {
        self.big_r - self.a
    }

    /// (δ(y) - δ(x))/δ(x) and |y - center| at offset (ρ, c).
    fn eta(&self, rho: f64, c: f64) -> (f64, f64) {
        let a = self.a;
        let ry = (a * a + rho * rho + 2.0 * a * rho * c).max(0.0).sqrt();
        (-(rho * rho + 2.0 * a * rho * c) / ((a + ry) * self.delta0()), ry)
    }
}

impl Axisym for BallPower {
    fn second_diff(&self, rho: f64, c: f64) -> f64 {
        let (a, q, d0) = (self.a, self.q, self.delta0());
        let (ep, rp) = self.eta(rho, c);
        let (em, rm) = self.eta(rho, -c);
        // (r₊ - a) + (r₋ - a) written without cancellation
        let bb = 2.0 * a * rho * c;
        let sum = rho * rho * (1.0 / (rp + a) + 1.0 / (rm + a))
            - 2.0 * bb * bb / ((rp + a) * (rm + a) * (rp + rm));
        d0.powf(q) * (pow_minus_linear(q, ep) + pow_minus_linear(q, em) - q * sum / d0)
    }

    fn diff(&self, rho: f64, c: f64) -> f64 {
        let (eta, ry) = self.eta(rho, c);
        if ry >= self.big_r || eta <= -1.0 {
            return -self.delta0().powf(self.q);
        }
        self.delta0().powf(self.q) * (self.q * eta.ln_1p()).exp_m1()
    }

    fn cos_range(&self, rho: f64) -> Option<(f64, f64)> {
        let (a, r) = (self.a, self.big_r);
        if a == 0.0 {
            return (rho < r).then_some((-1.0, 1.0));
        }
        let hi = (r * r - a * a - rho * rho) / (2.0 * a * rho);
        (hi > -1.0).then_some((-1.0, hi.min(1.0)))
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.delta0(), self.a, self.big_r + self.a]
    }
}

fn default_inner(dist: f64, size: f64, cfg: &PVConfig) -> f64 {
    cfg.inner_cut.unwrap_or(0.25 * dist.min(size))
}

fn default_outer(size: f64, cfg: &PVConfig) -> f64 {
    cfg.outer_cut.unwrap_or(1e3 * size.max(1.0))
}

fn scale_result(r: PvResult, k: f64) -> PvResult {
    PvResult {
        value: k * r.value,
        abs_err: k.abs() * r.abs_err,
        richardson_delta: k.abs() * r.richardson_delta,
        ..r
    }
}

/// 𝒜(d,-α) p.v.∫_{R^d_+} (y_d^p - z_d^p) |y-z|^{-d-α} dy at z = (0, z_d).
pub fn half_space_identity_lhs(params: &StableParams, p: f64, z_d: f64, cfg: &PVConfig) -> Result<PvResult> {
    if !(z_d > 0.0) || !z_d.is_finite() {
        return Err(Error::input(format!("z_d = {z_d} must be positive")));
    }
    let alpha = params.alpha;
    if !(p > -1.0 && p < alpha) {
        return Err(Error::input(format!("p = {p} not in (-1, {alpha})")));
    }
    let f = HalfSpacePower {
        d: params.d,
        xd: z_d,
        p,
        beta: alpha,
        with_tail: true,
    };
    let eng = Engine {
        d: params.d,
        beta: alpha,
        quad: cfg.quad,
    };
    let r = eng.pv(&f, default_inner(z_d, z_d, cfg), default_outer(z_d, cfg), cfg.richardson_rel_tol)?;
    Ok(scale_result(r, amplitude(params)))
}

/// 𝒜(d,-α) p.v.∫_{R^d} (|y|^p - |x|^p) |y-x|^{-d-α} dy at |x| = r.
pub fn whole_space_power_lhs(params: &StableParams, p: f64, r: f64, cfg: &PVConfig) -> Result<PvResult> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::input(format!("r = {r} must be positive")));
    }
    let alpha = params.alpha;
    if !(p > 0.0 && p < alpha) {
        return Err(Error::input(format!("p = {p} not in (0, {alpha})")));
    }
    let f = WholeSpacePower {
        d: params.d,
        r,
        p,
        alpha,
    };
    let eng = Engine {
        d: params.d,
        beta: alpha,
        quad: cfg.quad,
    };
    let r_res = eng.pv(&f, default_inner(r, r, cfg), default_outer(r, cfg), cfg.richardson_rel_tol)?;
    Ok(scale_result(r_res, amplitude(params)))
}

/// κ_U(x) = 𝒜(d,-α) ∫_{U^c} |y-x|^{-d-α} dy, via the exit distance along each ray.
pub fn killing_density(domain: &Domain, params: &StableParams, x: &[f64], cfg: &PVConfig) -> Result<f64> {
    if domain.dim != params.d {
        return Err(Error::input("domain and parameter dimensions differ"));
    }
    let delta = domain.dist_to_boundary(x)?;
    if delta == 0.0 {
        return Err(Error::Singularity(format!("{x:?} is not interior")));
    }
    let alpha = params.alpha;
    let amp = amplitude(params);
    let d = params.d;
    match &domain.kind {
        DomainKind::WholeSpace | DomainKind::PuncturedSpace => Ok(0.0),
        DomainKind::HalfSpace => {
            if d == 1 {
                return Ok(amp / alpha * delta.powf(-alpha));
            }
            let xd = x[d - 1];
            let q = integrate(
                |phi: f64| phi.sin().powi(d as i32 - 2) * (-phi.cos() / xd).powf(alpha),
                &[std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
                &cfg.quad,
            )?;
            Ok(amp * sphere_area(d - 1) / alpha * q.value)
        }
        DomainKind::Ball { center, radius } => {
            let a = crate::model::dist(x, center);
            let r = *radius;
            if d == 1 {
                return Ok(amp / alpha * ((r - a).powf(-alpha) + (r + a).powf(-alpha)));
            }
            let exit = |phi: f64| {
                let (s, c) = phi.sin_cos();
                (r - a) * (r + a) / (a * c + (r * r - a * a * s * s).sqrt())
            };
            let q = integrate(
                |phi: f64| phi.sin().powi(d as i32 - 2) * exit(phi).powf(-alpha),
                &[0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
                &cfg.quad,
            )?;
            Ok(amp * sphere_area(d - 1) / alpha * q.value)
        }
    }
}

fn ball_geometry(domain: &Domain, x: &[f64]) -> Result<(f64, f64)> {
    match &domain.kind {
        DomainKind::Ball { center, radius } => Ok((crate::model::dist(x, center), *radius)),
        _ => Err(Error::Unsupported("expected a ball".into())),
    }
}

/// L h_q(x) = 𝒜(d,-α) p.v.∫_D (h_q(y) - h_q(x)) |y-x|^{-d-α} dy - κ(x) h_q(x),
/// h_q = δ_D^q, for D a half-space or a ball.
pub fn regional_barrier(
    domain: &Domain,
    params: &StableParams,
    pot: &KillingPotential,
    q: f64,
    x: &[f64],
    cfg: &PVConfig,
) -> Result<PvResult> {
    let alpha = params.alpha;
    if !(q > 0.0 && q < alpha) {
        return Err(Error::input(format!("q = {q} not in (0, {alpha})")));
    }
    if domain.dim != params.d {
        return Err(Error::input("domain and parameter dimensions differ"));
    }
    let delta = domain.dist_to_boundary(x)?;
    if delta == 0.0 {
        return Err(Error::Singularity(format!("{x:?} is not interior")));
    }
    let kappa = kappa_of(pot, domain, x)?;
    let eng = Engine {
        d: params.d,
        beta: alpha,
        quad: cfg.quad,
    };
    let raw = match &domain.kind {
        DomainKind::HalfSpace => {
            let f = HalfSpacePower {
                d: params.d,
                xd: delta,
                p: q,
                beta: alpha,
                with_tail: true,
            };
            let size = norm(x);
            eng.pv(&f, default_inner(delta, delta, cfg), default_outer(size, cfg), cfg.richardson_rel_tol)?
        }
        DomainKind::Ball { .. } => {
            let (a, r) = ball_geometry(domain, x)?;
            if a == 0.0 {
                return Err(Error::Singularity("δ^q is not smooth at the ball center".into()));
            }
            let f = BallPower { big_r: r, a, q };
            eng.pv(&f, default_inner(delta, a, cfg), r + a, cfg.richardson_rel_tol)?
        }
        _ => return Err(Error::Unsupported("barrier operator needs a half-space or a ball".into())),
    };
    let op = scale_result(raw, amplitude(params));
    Ok(PvResult {
        value: op.value - kappa * delta.powf(q),
        ..op
    })
}

/// L_{β,b} h_q(x) = p.v.∫_D (h_q(y) - h_q(x)) b |y-x|^{-d-β} dy on a ball,
/// for a constant perturbation b.
pub fn perturbed_barrier(
    domain: &Domain,
    params: &StableParams,
    pert: &NonlocalPerturbation,
    q: f64,
    x: &[f64],
    cfg: &PVConfig,
) -> Result<PvResult> {
    if pert.cb3 != 0.0 {
        return Err(Error::Unsupported("only constant perturbations are reduced to 2-D".into()));
    }
    if !(q > 0.0) {
        return Err(Error::input(format!("q = {q} must be positive")));
    }
    let delta = domain.dist_to_boundary(x)?;
    if delta == 0.0 {
        return Err(Error::Singularity(format!("{x:?} is not interior")));
    }
    let (a, r) = ball_geometry(domain, x)?;
    if a == 0.0 {
        return Err(Error::Singularity("δ^q is not smooth at the ball center".into()));
    }
    let b = (pert.b)(x, x);
    let eng = Engine {
        d: params.d,
        beta: pert.beta,
        quad: cfg.quad,
    };
    let f = BallPower { big_r: r, a, q };
    let raw = eng.pv(&f, default_inner(delta, a, cfg), r + a, cfg.richardson_rel_tol)?;
    Ok(scale_result(raw, b))
}

/// L^β_{d,λ} applied to y_d^p: p.v.∫_{R^d_+, |y-x|<λ} (y_d^p - x_d^p) |y-x|^{-d-β} dy.
pub fn truncated_operator(
    params: &StableParams,
    beta: f64,
    lambda: f64,
    p: f64,
    x_d: f64,
    cfg: &PVConfig,
) -> Result<PvResult> {
    if !(beta < 2.0) {
        return Err(Error::input(format!("beta = {beta} must be below 2")));
    }
    if !(lambda > 0.0) || !(p > 0.0) {
        return Err(Error::input("lambda and p must be positive"));
    }
    if !(x_d > 0.0 && x_d < 1.0) {
        return Err(Error::input(format!("x_d = {x_d} not in (0, 1)")));
    }
    let f = HalfSpacePower {
        d: params.d,
        xd: x_d,
        p,
        beta,
        with_tail: false,
    };
    let eng = Engine {
        d: params.d,
        beta,
        quad: cfg.quad,
    };
    let eps = cfg.inner_cut.unwrap_or(0.25 * x_d.min(lambda));
    eng.pv(&f, eps, lambda, cfg.richardson_rel_tol)
}
