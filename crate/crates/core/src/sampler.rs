//! Isotropic α-stable increments and killed, weighted paths.
//!
//! Increments are exact in law: Brownian motion with generator Δ run at an
//! independent (α/2)-stable subordinator time.  Only exit detection and the
//! killing functional are discretised.

use std::io::{self, Read, Write};
use std::sync::Arc;

use rand_core::RngCore;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Domain, Geometry, KillingPotential, StableParams};
use crate::rng::KeyedRng;

/// Drift field g, written into the output slice.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KillingMode {
    /// Carry e^{-A_t} as a weight.
    Weight,
    /// Kill with probability 1 - e^{-ΔA} on every step.
    Thinning,
}

#[derive(Clone)]
pub struct PathConfig {
    pub t_end: f64,
    pub base_step: f64,
    pub c_step: f64,
    pub max_steps: usize,
    pub drift: Option<VectorField>,
    pub killing: KillingMode,
    /// Paths whose functional exceeds this are dropped (weight below e^{-cutoff}).
    pub weight_cutoff: f64,
}

impl std::fmt::Debug for PathConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PathConfig")
            .field("t_end", &self.t_end)
            .field("base_step", &self.base_step)
            .field("c_step", &self.c_step)
            .field("max_steps", &self.max_steps)
            .field("drift", &self.drift.as_ref().map(|_| "<fn>"))
            .field("killing", &self.killing)
            .field("weight_cutoff", &self.weight_cutoff)
            .finish()
    }
}

impl PathConfig {
    /// Defaults for horizon `t_end`: base step t/20, c_step 0.05.
    pub fn new(t_end: f64) -> Self {
        PathConfig {
            t_end,
            base_step: t_end / 20.0,
            c_step: 0.05,
            max_steps: 1_000_000,
            drift: None,
            killing: KillingMode::Weight,
            weight_cutoff: 40.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_end > 0.0
            && self.t_end.is_finite()
            && self.base_step > 0.0
            && self.c_step > 0.0
            && self.c_step.is_finite()
            && self.max_steps > 0
            && self.weight_cutoff > 0.0;
        if !ok {
            return Err(Error::input(format!("invalid path configuration {self:?}")));
        }
        Ok(())
    }

    /// dt(x) = min(base_step, c_step·dist^α).
    pub fn step(&self, alpha: f64, dist: f64) -> f64 {
        self.base_step.min(self.c_step * dist.powf(alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KillCause {
    Exit,
    Potential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRealization {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub killed_at: Option<(f64, KillCause)>,
    pub functional: Vec<f64>,
    /// max_steps was reached before t_end.
    pub truncated: bool,
}

impl PathRealization {
    pub fn alive(&self) -> bool {
        self.killed_at.is_none() && !self.truncated
    }

    /// Feynman–Kac weight 1{alive}·e^{-A_t}.
    pub fn weight(&self) -> f64 {
        if self.alive() {
            (-self.functional.last().copied().unwrap_or(0.0)).exp()
        } else {
            0.0
        }
    }
}

/// One-sided stable variate with Laplace transform exp(-h λ^index)
/// (Kanter's representation, evaluated in logs).
pub fn positive_stable_increment<R: RngCore>(index: f64, h: f64, rng: &mut R) -> f64 {
    let a = index;
    let u = std::f64::consts::PI * open01(rng);
    let e: f64 = Exp1.sample(rng);
    let ln_s = (a * u).sin().ln() - u.sin().ln() / a + (1.0 - a) / a * (((1.0 - a) * u).sin().ln() - e.ln());
    (ln_s + h.ln() / a).exp()
}

/// Isotropic α-stable increment over time `h`, written into `out`
/// (characteristic function exp(-h|ξ|^α)).
pub fn isotropic_stable_increment<R: RngCore>(params: &StableParams, h: f64, rng: &mut R, out: &mut [f64]) {
    let s = positive_stable_increment(0.5 * params.alpha, h, rng);
    let scale = (2.0 * s).sqrt();
    for v in out.iter_mut() {
        let n: f64 = StandardNormal.sample(rng);
        *v = scale * n;
    }
}

#[inline]
fn open01<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// End state of a path run without recording.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub position: Vec<f64>,
    pub functional: f64,
    pub killed_at: Option<(f64, KillCause)>,
    pub truncated: bool,
    pub steps: usize,
}

impl PathOutcome {
    pub fn alive(&self) -> bool {
        self.killed_at.is_none() && !self.truncated
    }

    pub fn weight(&self) -> f64 {
        if self.alive() {
            (-self.functional).exp()
        } else {
            0.0
        }
    }
}

/// Shared stepping loop.  `observe(t, x, A)` is called after every step
/// that leaves the path alive.
pub(crate) fn run_path<F: FnMut(f64, &[f64], f64)>(
    x0: &[f64],
    params: &StableParams,
    domain: &Domain,
    pot: &KillingPotential,
    cfg: &PathConfig,
    key: (u64, u64, u64),
    mut observe: F,
) -> PathOutcome {
    let (seed, stream, path) = key;
    let d = x0.len();
    let alpha = params.alpha;
    let mut x = x0.to_vec();
    let mut incr = vec![0.0; d];
    let mut drift = vec![0.0; d];
    let killing = !pot.is_zero();
    let pot_dist = |x: &[f64], dom: f64| match pot.geometry {
        Geometry::BoundaryDistance => dom,
        Geometry::OriginDistance => crate::model::norm(x),
    };
    let mut dom = domain.dist_unchecked(&x);
    let mut pd = pot_dist(&x, dom);
    let mut k_prev = if killing { pot.eval_at(pd, &x) } else { 0.0 };
    let mut t = 0.0;
    let mut a = 0.0;
    let mut steps = 0usize;
    let mut killed_at = None;
    let mut truncated = false;
    let t_end = cfg.t_end;
    while t < t_end {
        if steps == cfg.max_steps {
            truncated = true;
            break;
        }
        let dist = if killing { dom.min(pd) } else { dom };
        let mut dt = cfg.step(alpha, dist);
        let last = t + dt >= t_end * (1.0 - 1e-12);
        if last {
            dt = t_end - t;
        }
        let mut rng = KeyedRng::new(seed, stream, path, steps as u64);
        isotropic_stable_increment(params, dt, &mut rng, &mut incr);
        if let Some(g) = &cfg.drift {
            g(&x, &mut drift);
            for i in 0..d {
                incr[i] += drift[i] * dt;
            }
        }
        for i in 0..d {
            x[i] += incr[i];
        }
        t = if last { t_end } else { t + dt };
        steps += 1;
        dom = domain.dist_unchecked(&x);
        if !(dom > 0.0) {
            killed_at = Some((t, KillCause::Exit));
            break;
        }
        if killing {
            pd = pot_dist(&x, dom);
            let k = pot.eval_at(pd, &x);
            let da = 0.5 * (k_prev + k) * dt;
            a += da;
            k_prev = k;
            let dead = match cfg.killing {
                KillingMode::Weight => a > cfg.weight_cutoff,
                KillingMode::Thinning => rng.open01() < -(-da).exp_m1(),
            };
            if dead {
                killed_at = Some((t, KillCause::Potential));
                break;
            }
        }
        observe(t, &x, a);
    }
    if cfg.killing == KillingMode::Thinning {
        // the functional has been spent on the killing decisions
        a = 0.0;
    }
    PathOutcome {
        position: x,
        functional: a,
        killed_at,
        truncated,
        steps,
    }
}

pub(crate) fn check_start(x0: &[f64], domain: &Domain, pot: &KillingPotential, cfg: &PathConfig) -> Result<()> {
    cfg.validate()?;
    if !domain.contains(x0)? {
        return Err(Error::input(format!("start point {x0:?} is not interior")));
    }
    if !pot.is_zero() && pot.geometry == Geometry::OriginDistance && crate::model::norm(x0) == 0.0 {
        return Err(Error::Singularity("start point sits on the potential's singularity".into()));
    }
    Ok(())
}

/// Full realization of path `path_id` under `seed`.
pub fn simulate_path(
    x0: &[f64],
    params: &StableParams,
    domain: &Domain,
    pot: &KillingPotential,
    cfg: &PathConfig,
    seed: u64,
    path_id: u64,
) -> Result<PathRealization> {
    check_start(x0, domain, pot, cfg)?;
    if params.d != x0.len() {
        return Err(Error::input("start point dimension does not match parameters"));
    }
    let mut times = vec![0.0];
    let mut positions = vec![x0.to_vec()];
    let mut functional = vec![0.0];
    let out = run_path(x0, params, domain, pot, cfg, (seed, 0, path_id), |t, x, a| {
        times.push(t);
        positions.push(x.to_vec());
        functional.push(a);
    });
    if let Some((t, _)) = out.killed_at {
        // record where the path was killed
        times.push(t);
        positions.push(out.position.clone());
        functional.push(functional.last().copied().unwrap_or(0.0).max(out.functional));
    }
    Ok(PathRealization {
        times,
        positions,
        killed_at: out.killed_at,
        functional,
        truncated: out.truncated,
    })
}

/// One record of the binary path dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub path_id: u64,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub functional: Vec<f64>,
}

/// Little-endian record: path_id u64, n u32, then n × (t, x_1..x_d, A).
pub fn write_path_dump<W: Write>(w: &mut W, path_id: u64, path: &PathRealization) -> io::Result<()> {
    w.write_all(&path_id.to_le_bytes())?;
    w.write_all(&(path.times.len() as u32).to_le_bytes())?;
    for ((t, x), a) in path.times.iter().zip(&path.positions).zip(&path.functional) {
        w.write_all(&t.to_le_bytes())?;
        for v in x {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&a.to_le_bytes())?;
    }
    Ok(())
}

/// Reads every record of a dump written for dimension `d`.
pub fn read_path_dump<R: Read>(r: &mut R, d: usize) -> Result<Vec<DumpRecord>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        if pos + n > bytes.len() {
            return Err(Error::input("truncated path dump"));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    let mut out = Vec::new();
    while let Ok(h) = take(8) {
        let head = u64::from_le_bytes(h.try_into().expect("8 bytes"));
        let n = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        let mut rec = DumpRecord {
            path_id: head,
            times: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
            functional: Vec::with_capacity(n),
        };
        for _ in 0..n {
            rec.times.push(f(take(8)?));
            let mut x = Vec::with_capacity(d);
            for _ in 0..d {
                x.push(f(take(8)?));
            }
            rec.positions.push(x);
            rec.functional.push(f(take(8)?));
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_rule_shrinks_near_singularity() {
        let cfg = PathConfig::new(1.0);
        assert_eq!(cfg.step(1.5, 10.0), 0.05);
        assert!((cfg.step(1.5, 0.01) - 0.05 * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn kill_time_is_recorded() {
        let p = StableParams::new(1, 1.5).unwrap();
        let ball = Domain::unit_ball(1);
        let pot = KillingPotential::zero(1.5);
        let cfg = PathConfig::new(10.0);
        let path = simulate_path(&[0.0], &p, &ball, &pot, &cfg, 3, 0).unwrap();
        let (t, cause) = path.killed_at.expect("a path in an interval exits by t = 10");
        assert_eq!(cause, KillCause::Exit);
        assert_eq!(*path.times.last().unwrap(), t);
        assert_eq!(path.weight(), 0.0);
        assert!(simulate_path(&[1.0], &p, &ball, &pot, &cfg, 3, 0).is_err());
    }
}
