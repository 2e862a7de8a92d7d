//! Monte Carlo estimators built on the path sampler: survival
//! probabilities, kernel densities, boundary-decay exponents and the
//! factorization table.
//!
//! Paths are processed in fixed chunks of [`CHUNK`] indices whose partial
//! sums are merged in chunk order, so every estimate is independent of the
//! number of workers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dist, norm, tilde_q_unchecked, Domain, DomainKind, KillingPotential, ScalingFunction, StableParams, VolumeModel};
use crate::numeric::NeumaierSum;
use crate::sampler::{check_start, run_path, KillingMode, PathConfig};

pub const CHUNK: usize = 1024;

/// Minimum number of alive paths inside a kernel window.
pub const MIN_WINDOW_HITS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Worker threads; 0 means the available parallelism.
    #[serde(skip)]
    pub workers: usize,
    pub c_step: f64,
    /// Base step as a fraction of the horizon.
    pub base_fraction: f64,
    pub max_steps: usize,
    pub killing: KillingMode,
    pub weight_cutoff: f64,
    /// Kernel bandwidth override.
    pub bandwidth: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 200_000,
            workers: 0,
            c_step: 0.05,
            base_fraction: 0.05,
            max_steps: 1_000_000,
            killing: KillingMode::Weight,
            weight_cutoff: 40.0,
            bandwidth: None,
        }
    }
}

impl McConfig {
    pub fn path_config(&self, t: f64) -> PathConfig {
        PathConfig {
            t_end: t,
            base_step: t * self.base_fraction,
            c_step: self.c_step,
            max_steps: self.max_steps,
            drift: None,
            killing: self.killing,
            weight_cutoff: self.weight_cutoff,
        }
    }

    /// bw = 0.8·t^{1/α}·n^{-1/(d+4)} unless overridden.
    pub fn bandwidth_for(&self, params: &StableParams, t: f64) -> f64 {
        self.bandwidth.unwrap_or_else(|| {
            0.8 * t.powf(1.0 / params.alpha) * (self.n_paths as f64).powf(-1.0 / (params.d as f64 + 4.0))
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::input("need at least two paths"));
        }
        if let Some(bw) = self.bandwidth {
            if !(bw > 0.0) {
                return Err(Error::input(format!("bandwidth {bw} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub value: f64,
    pub half_width_95: f64,
    pub n_paths: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimatorResult {
    fn from_sums(s: f64, s2: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = s / nf;
        let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
        EstimatorResult {
            value: mean,
            half_width_95: 1.96 * var.sqrt() / nf.sqrt(),
            n_paths: n,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.half_width_95
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width_95
    }
}

#[derive(Debug, Clone, Default)]
struct Probe {
    s: NeumaierSum,
    s2: NeumaierSum,
    hits: u64,
}

#[derive(Debug, Clone, Default)]
struct Stats {
    w: NeumaierSum,
    w2: NeumaierSum,
    alive: u64,
    truncated: u64,
    steps: u64,
    probes: Vec<Probe>,
}

impl Stats {
    fn merge(&mut self, o: &Stats) {
        self.w.merge(&o.w);
        self.w2.merge(&o.w2);
        self.alive += o.alive;
        self.truncated += o.truncated;
        self.steps += o.steps;
        for (a, b) in self.probes.iter_mut().zip(&o.probes) {
            a.s.merge(&b.s);
            a.s2.merge(&b.s2);
            a.hits += b.hits;
        }
    }
}

/// Runs `f` on a pool of `workers` threads (0 = available parallelism).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::input(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Survival estimate from `x` plus one kernel estimate per probe point.
#[derive(Debug)]
pub struct Sampled {
    pub survival: EstimatorResult,
    pub kernels: Vec<Result<EstimatorResult>>,
    pub bandwidth: f64,
}

/// Simulates `cfg.n_paths` paths from `x` to time `t` and evaluates the
/// survival weight and the kernel-density estimate at each probe.
#[allow(clippy::too_many_arguments)]
pub fn sample_from(
    x: &[f64],
    t: f64,
    params: &StableParams,
    domain: &Domain,
    pot: &KillingPotential,
    cfg: &McConfig,
    seed: u64,
    probes: &[Vec<f64>],
) -> Result<Sampled> {
    cfg.validate()?;
    if x.len() != params.d || domain.dim != params.d {
        return Err(Error::input("point or domain dimension does not match parameters"));
    }
    let pc = cfg.path_config(t);
    check_start(x, domain, pot, &pc)?;
    let bw = cfg.bandwidth_for(params, t);
    let norm_k = (0.75 / bw).powi(params.d as i32);
    let n = cfg.n_paths;
    let chunks = n.div_ceil(CHUNK);
    let run_chunk = |c: usize| {
        let mut st = Stats {
            probes: vec![Probe::default(); probes.len()],
            ..Stats::default()
        };
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let out = run_path(x, params, domain, pot, &pc, (seed, 0, i as u64), |_, _, _| {});
            st.steps += out.steps as u64;
            if out.truncated {
                st.truncated += 1;
            }
            let w = out.weight();
            if w > 0.0 {
                st.alive += 1;
                st.w.add(w);
                st.w2.add(w * w);
                for (pr, y) in st.probes.iter_mut().zip(probes) {
                    let mut k = norm_k;
                    for (a, b) in out.position.iter().zip(y) {
                        let u = (a - b) / bw;
                        if u.abs() >= 1.0 {
                            k = 0.0;
                            break;
                        }
                        k *= 1.0 - u * u;
                    }
                    if k > 0.0 {
                        pr.hits += 1;
                        pr.s.add(w * k);
                        pr.s2.add(w * w * k * k);
                    }
                }
            }
        }
        st
    };
    let parts: Vec<Stats> = with_workers(cfg.workers, || (0..chunks).into_par_iter().map(run_chunk).collect())?;
    let mut total = Stats {
        probes: vec![Probe::default(); probes.len()],
        ..Stats::default()
    };
    for p in &parts {
        total.merge(p);
    }
    let mut survival = EstimatorResult::from_sums(total.w.sum(), total.w2.sum(), n);
    let (sw, sw2) = (total.w.sum(), total.w2.sum());
    let ess = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
    let diag = &mut survival.diagnostics;
    diag.insert("effective_sample_size".into(), ess);
    diag.insert("alive_fraction".into(), total.alive as f64 / n as f64);
    diag.insert("truncation_rate".into(), total.truncated as f64 / n as f64);
    diag.insert("mean_steps".into(), total.steps as f64 / n as f64);
    if ess == 0.0 {
        return Err(Error::Estimator(format!("zero effective sample size from {x:?}")));
    }
    let kernels = total
        .probes
        .iter()
        .zip(probes)
        .map(|(pr, y)| {
            if pr.hits < MIN_WINDOW_HITS {
                return Err(Error::Estimator(format!(
                    "only {} alive paths within bandwidth {bw:e} of {y:?}",
                    pr.hits
                )));
            }
            let mut r = EstimatorResult::from_sums(pr.s.sum(), pr.s2.sum(), n);
            r.diagnostics.insert("bandwidth".into(), bw);
            r.diagnostics.insert("window_hits".into(), pr.hits as f64);
            r.diagnostics.insert("truncation_rate".into(), total.truncated as f64 / n as f64);
            Ok(r)
        })
        .collect();
    Ok(Sampled {
        survival,
        kernels,
        bandwidth: bw,
    })
}

/// E_x[1{ζ > t} e^{-A_t}].
pub fn estimate_survival(
    x: &[f64],
    t: f64,
    params: &StableParams,
    domain: &Domain,
    pot: &KillingPotential,
    cfg: &McConfig,
    seed: u64,
) -> Result<EstimatorResult> {
    Ok(sample_from(x, t, params, domain, pot, cfg, seed, &[])?.survival)
}

/// Kernel-density estimate of the Feynman–Kac transition density q(t, x, y).
#[allow(clippy::too_many_arguments)]
pub fn estimate_kernel(
    x: &[f64],
    y: &[f64],
    t: f64,
    params: &StableParams,
    domain: &Domain,
    pot: &KillingPotential,
    cfg: &McConfig,
    seed: u64,
) -> Result<EstimatorResult> {
    if !domain.contains(y)? {
        return Err(Error::input(format!("probe {y:?} is not interior")));
    }
    let s = sample_from(x, t, params, domain, pot, cfg, seed, &[y.to_vec()])?;
    s.kernels.into_iter().next().expect("one probe")
}

/// Distance governing the boundary-decay regime: |x| on the punctured
/// space, δ_D otherwise.
pub fn decay_distance(domain: &Domain, x: &[f64]) -> f64 {
    match domain.kind {
        DomainKind::PuncturedSpace => norm(x),
        _ => domain.dist_unchecked(x),
    }
}

/// `n` points with decay distance geometric in [t^{1/α}/64, t^{1/α}/4],
/// decreasing, along the first coordinate axis (the last one for the half-space).
pub fn default_ray(domain: &Domain, params: &StableParams, t: f64, n: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::input("a ray needs at least two points"));
    }
    let scale = t.powf(1.0 / params.alpha);
    let d = params.d;
    (0..n)
        .map(|i| {
            let frac = i as f64 / (n - 1) as f64;
            let r = scale / 4.0 * (1.0f64 / 16.0).powf(frac);
            let mut x = vec![0.0; d];
            match &domain.kind {
                DomainKind::PuncturedSpace => x[0] = r,
                DomainKind::HalfSpace => x[d - 1] = r,
                DomainKind::Ball { center, radius } => {
                    x.copy_from_slice(center);
                    x[0] += radius - r;
                }
                DomainKind::WholeSpace => {
                    return Err(Error::input("the whole space has no boundary-decay regime"));
                }
            }
            Ok(x)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub point: Vec<f64>,
    pub dist: f64,
    pub survival: EstimatorResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub p_hat: f64,
    pub stderr: f64,
    pub points: Vec<RayPoint>,
}

/// Weighted least-squares slope of log survival against log distance.
#[allow(clippy::too_many_arguments)]
pub fn fit_exponent(
    params: &StableParams,
    domain: &Domain,
    pot: &KillingPotential,
    t: f64,
    ray: &[Vec<f64>],
    cfg: &McConfig,
    seed: u64,
) -> Result<ExponentFit> {
    if ray.len() < 2 {
        return Err(Error::input("exponent fit needs at least two ray points"));
    }
    let limit = 0.5 * t.powf(1.0 / params.alpha);
    let mut points = Vec::with_capacity(ray.len());
    for x in ray {
        let dist = decay_distance(domain, x);
        if !(dist <= limit) {
            return Err(Error::input(format!(
                "ray point {x:?} at distance {dist} is outside the decay regime (≤ {limit})"
            )));
        }
        let survival = estimate_survival(x, t, params, domain, pot, cfg, seed)?;
        if !(survival.lower() > 0.0) {
            return Err(Error::Estimator(format!(
                "survival CI at distance {dist:e} spans zero: {} ± {}",
                survival.value, survival.half_width_95
            )));
        }
        points.push(RayPoint {
            point: x.clone(),
            dist,
            survival,
        });
    }
    let (p_hat, stderr) = weighted_slope(&points);
    Ok(ExponentFit { p_hat, stderr, points })
}

fn weighted_slope(points: &[RayPoint]) -> (f64, f64) {
    let data: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| {
            let s = p.survival.value;
            let sigma = p.survival.half_width_95 / 1.96 / s;
            (p.dist.ln(), s.ln(), 1.0 / (sigma * sigma).max(1e-300))
        })
        .collect();
    let sw: f64 = data.iter().map(|d| d.2).sum();
    let mx = data.iter().map(|d| d.2 * d.0).sum::<f64>() / sw;
    let my = data.iter().map(|d| d.2 * d.1).sum::<f64>() / sw;
    let sxx: f64 = data.iter().map(|d| d.2 * (d.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| d.2 * (d.0 - mx) * (d.1 - my)).sum();
    (sxy / sxx, 1.0 / sxx.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub kernel: EstimatorResult,
    pub survival_x: f64,
    pub survival_y: f64,
    pub tilde_q: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub rows: Vec<FactorRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub spread: f64,
    pub bandwidth: f64,
}

/// Ratios q̂(t,x,y) / (Ŝ_x Ŝ_y q̃(t,x,y)) over every pair of `xs` × `ys`.
#[allow(clippy::too_many_arguments)]
pub fn factorization_report(
    params: &StableParams,
    domain: &Domain,
    pot: &KillingPotential,
    t: f64,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    cfg: &McConfig,
    seed: u64,
) -> Result<FactorizationReport> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::input("factorization grid is empty"));
    }
    let phi = ScalingFunction::power(params.alpha)?;
    let vol = VolumeModel::lebesgue(params.d);
    let mut surv_y: Vec<Option<f64>> = vec![None; ys.len()];
    let mut rows = Vec::with_capacity(xs.len() * ys.len());
    let mut bandwidth = 0.0;
    for x in xs {
        let s = sample_from(x, t, params, domain, pot, cfg, seed, ys)?;
        bandwidth = s.bandwidth;
        for (j, y) in ys.iter().enumerate() {
            if y == x {
                surv_y[j] = Some(s.survival.value);
            }
        }
        for (y, k) in ys.iter().zip(s.kernels) {
            rows.push(FactorRow {
                x: x.clone(),
                y: y.clone(),
                kernel: k?,
                survival_x: s.survival.value,
                survival_y: f64::NAN,
                tilde_q: tilde_q_unchecked(&phi, &vol, t, dist(x, y)),
                ratio: f64::NAN,
            });
        }
    }
    for (j, y) in ys.iter().enumerate() {
        if surv_y[j].is_none() {
            surv_y[j] = Some(estimate_survival(y, t, params, domain, pot, cfg, seed)?.value);
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let sy = surv_y[i % ys.len()].expect("filled above");
        row.survival_y = sy;
        row.ratio = row.kernel.value / (row.survival_x * sy * row.tilde_q);
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(FactorizationReport {
        rows,
        max_ratio,
        min_ratio,
        spread: max_ratio / min_ratio,
        bandwidth,
    })
}
