use std::path::PathBuf;

use critkill_core::constants::{
    amplitude, c_boundary, c_origin, embedded_golden, gamma_boundary, h_profile, invert_c_boundary, invert_c_origin,
    load_golden, GoldenRow,
};
use critkill_core::feynman_kac::{default_ray, estimate_survival, factorization_report, fit_exponent, McConfig};
use critkill_core::flap::{half_space_identity_lhs, whole_space_power_lhs, PVConfig};
use critkill_core::model::{Domain, Geometry, KillingPotential, StableParams};
use critkill_core::perturbation::{build_generator, duhamel_series, semigroup, three_p_check, write_matrix_csv};
use critkill_core::quadrature::QuadratureConfig;
use critkill_core::sampler::KillingMode;
use serde_json::{json, Value};

use crate::args::{ConstantsArgs, FactorizeArgs, McArgs, OracleArgs, SeriesArgs, SurvivalArgs, ThreepArgs};
use crate::error::{CliError, CliResult};
use crate::output::{num, point, Report};

pub const GOLDEN_ENV: &str = "CRITKILL_GOLDEN_DIR";
pub const GOLDEN_FILE: &str = "golden_constants.csv";

/// Settings that never enter the recorded config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Context {
    pub workers: usize,
}

/// A finished command: its report, plus a failure to surface after the
/// report has been written.
pub struct Outcome {
    pub report: Report,
    pub failure: Option<String>,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome { report, failure: None }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn params(d: usize, alpha: f64) -> CliResult<StableParams> {
    Ok(StableParams::new(d, alpha)?)
}

fn golden_table(explicit: &Option<PathBuf>) -> CliResult<(Vec<GoldenRow>, String)> {
    if let Some(p) = explicit {
        return Ok((load_golden(p)?, p.display().to_string()));
    }
    if let Ok(dir) = std::env::var(GOLDEN_ENV) {
        let p = PathBuf::from(dir).join(GOLDEN_FILE);
        return Ok((load_golden(&p)?, p.display().to_string()));
    }
    Ok((embedded_golden(), "built-in".into()))
}

fn p_grid(args: &ConstantsArgs) -> CliResult<Vec<f64>> {
    let mut ps = args.p.clone().unwrap_or_default();
    if let Some(r) = &args.p_range {
        let [lo, hi, n] = r[..] else {
            return Err(usage("--p-range takes lo,hi,n"));
        };
        if !(n >= 1.0) || n.fract() != 0.0 || !(lo <= hi) {
            return Err(usage(format!("bad --p-range {lo},{hi},{n}")));
        }
        let n = n as usize;
        ps.extend((0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }));
    }
    Ok(ps)
}

pub fn constants(args: &mut ConstantsArgs) -> CliResult<Outcome> {
    let family = args.family.get_or_insert_with(|| "c-boundary".into()).clone();
    let d = *args.d.get_or_insert(2);
    let alpha = *args.alpha.get_or_insert(1.5);
    let quad = QuadratureConfig::with_tols(
        *args.abs_tol.get_or_insert(QuadratureConfig::default().abs_tol),
        *args.rel_tol.get_or_insert(QuadratureConfig::default().rel_tol),
    );
    quad.validate()?;
    let mut report = Report::new(&["family", "d", "alpha", "p", "C1", "value", "abs_err", "golden", "golden_match"]);
    if args.invert_boundary && args.invert_origin {
        return Err(usage("choose one of --invert-boundary and --invert-origin"));
    }
    if args.invert_boundary || args.invert_origin {
        let c1s = args.c1.clone().ok_or_else(|| usage("inverse maps need --C1"))?;
        let sp = params(d, alpha)?;
        let fam = if args.invert_boundary { "invert-boundary" } else { "invert-origin" };
        for c1 in c1s {
            let p = if args.invert_boundary {
                invert_c_boundary(&sp, c1, &quad)?
            } else {
                invert_c_origin(&sp, c1, &quad)?
            };
            report.push(vec![json!(fam), json!(d), num(alpha), num(p), num(c1), num(p), Value::Null, Value::Null, Value::Null]);
        }
        report.set("rows", report.rows.len());
        return Ok(report.into());
    }
    let ps = if family == "amplitude" { vec![0.0] } else { p_grid(args)? };
    if ps.is_empty() {
        return Err(usage("no exponents requested; use --p or --p-range"));
    }
    let (golden, source) = golden_table(&args.golden)?;
    let row_d = if family == "gamma" { 0 } else { d };
    let mut compared = 0;
    let mut mismatches = 0;
    for &p in &ps {
        let c = match family.as_str() {
            "amplitude" => critkill_core::constants::Constant {
                value: amplitude(&params(d, alpha)?),
                abs_err: 0.0,
            },
            "gamma" => gamma_boundary(alpha, p, &quad)?,
            "c-boundary" => c_boundary(&params(d, alpha)?, p, &quad)?,
            "h-profile" => h_profile(&params(d, alpha)?, p, &quad)?,
            "c-origin" => c_origin(&params(d, alpha)?, p, &quad)?,
            other => return Err(usage(format!("unknown family {other:?}"))),
        };
        let g = golden.iter().find(|g| g.matches(&family, row_d, alpha, p));
        let (gv, ok) = match g {
            Some(g) => {
                let tol = g.abs_err_bound.max(1e-9 * g.value.abs()).max(c.abs_err);
                let ok = (c.value - g.value).abs() <= tol;
                compared += 1;
                mismatches += usize::from(!ok);
                (num(g.value), json!(ok))
            }
            None => (Value::Null, Value::Null),
        };
        report.push(vec![json!(family), json!(row_d), num(alpha), num(p), Value::Null, num(c.value), num(c.abs_err), gv, ok]);
    }
    report.set("rows", report.rows.len());
    report.set("golden_source", source);
    report.set("golden_compared", compared);
    report.set("golden_mismatches", mismatches);
    let failure = (mismatches > 0).then(|| format!("{mismatches} value(s) disagree with the reference table"));
    Ok(Outcome { report, failure })
}

#[derive(Debug, Clone, Copy)]
enum Identity {
    HalfSpace,
    WholeSpace,
}

/// (identity, d, α, p, evaluation point).
type Check = (Identity, usize, f64, f64, f64);

fn oracle_checks(preset: &str) -> CliResult<Vec<Check>> {
    use Identity::*;
    let mut out = Vec::new();
    let mut add = |kind, triples: &[(usize, f64, f64)], at: &[f64]| {
        for &(d, a, p) in triples {
            for &x in at {
                out.push((kind, d, a, p, x));
            }
        }
    };
    match preset {
        "quick" => {
            add(HalfSpace, &[(2, 1.5, 0.9)], &[1.0]);
            add(WholeSpace, &[(2, 1.2, 0.6)], &[1.0]);
        }
        "standard" | "thorough" => {
            add(HalfSpace, &[(2, 1.5, 0.9), (3, 0.8, 0.4), (2, 1.2, 0.6)], &[0.25, 1.0, 4.0]);
            add(WholeSpace, &[(2, 1.2, 0.6), (3, 1.5, 1.0)], &[0.5, 1.0, 2.0]);
            if preset == "thorough" {
                add(HalfSpace, &[(3, 1.8, 1.2), (2, 0.7, 0.3), (4, 1.0, 0.5)], &[0.25, 1.0, 4.0]);
                add(WholeSpace, &[(2, 0.8, 0.4), (4, 1.5, 0.7), (3, 1.9, 1.5)], &[0.5, 1.0, 2.0]);
            }
        }
        other => return Err(usage(format!("unknown preset {other:?}; use quick, standard or thorough"))),
    }
    Ok(out)
}

pub fn oracle(args: &mut OracleArgs) -> CliResult<Outcome> {
    let preset = args.preset.get_or_insert_with(|| "standard".into()).clone();
    let tol = *args.tol.get_or_insert(1e-3);
    if !(tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let quad = QuadratureConfig::default();
    let pv = PVConfig::default();
    let mut report = Report::new(&["identity", "d", "alpha", "p", "at", "pv", "closed_form", "rel_err", "richardson_delta", "ok"]);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for (kind, d, alpha, p, at) in oracle_checks(&preset)? {
        let sp = params(d, alpha)?;
        let (name, lhs, c) = match kind {
            Identity::HalfSpace => ("half-space", half_space_identity_lhs(&sp, p, at, &pv)?, c_boundary(&sp, p, &quad)?),
            Identity::WholeSpace => ("whole-space", whole_space_power_lhs(&sp, p, at, &pv)?, c_origin(&sp, p, &quad)?),
        };
        let rhs = c.value * at.powf(p - alpha);
        let rel = ((lhs.value - rhs) / rhs).abs();
        let ok = rel <= tol;
        failures += usize::from(!ok);
        worst = worst.max(rel);
        report.push(vec![
            json!(name),
            json!(d),
            num(alpha),
            num(p),
            num(at),
            num(lhs.value),
            num(rhs),
            num(rel),
            num(lhs.richardson_delta),
            json!(ok),
        ]);
    }
    report.set("preset", &preset);
    report.set("checks", report.rows.len());
    report.set("failures", failures);
    report.set("max_rel_err", worst);
    let failure = (failures > 0).then(|| format!("{failures} identity check(s) over tolerance {tol:e}"));
    Ok(Outcome { report, failure })
}

fn mc_config(m: &mut McArgs, ctx: &Context) -> CliResult<(McConfig, u64)> {
    let def = McConfig::default();
    let killing = match m.killing.get_or_insert_with(|| "weight".into()).as_str() {
        "weight" => KillingMode::Weight,
        "thinning" => KillingMode::Thinning,
        other => return Err(usage(format!("unknown killing mode {other:?}"))),
    };
    let cfg = McConfig {
        n_paths: *m.n_paths.get_or_insert(def.n_paths),
        workers: ctx.workers,
        c_step: *m.c_step.get_or_insert(def.c_step),
        base_fraction: *m.base_fraction.get_or_insert(def.base_fraction),
        max_steps: *m.max_steps.get_or_insert(def.max_steps),
        killing,
        weight_cutoff: *m.weight_cutoff.get_or_insert(def.weight_cutoff),
        bandwidth: m.bandwidth,
    };
    Ok((cfg, *m.seed.get_or_insert(1)))
}

/// Domain and extra killing for a decay experiment.  On the punctured space
/// the amplitude is C̃(α,d,p); for the killed process near a boundary the
/// exit already contributes C(d,α,α/2), so the extra amplitude is the
/// difference.
struct Setup {
    domain: Domain,
    pot: KillingPotential,
    c1: f64,
    target: Option<f64>,
}

fn setup(kind: &str, sp: &StableParams, p: Option<f64>, c1: &mut Option<f64>) -> CliResult<Setup> {
    let quad = QuadratureConfig::default();
    let (d, alpha) = (sp.d, sp.alpha);
    let domain = match kind {
        "ball" => Domain::unit_ball(d),
        "half-space" => Domain::half_space(d),
        "punctured" => Domain::punctured(d),
        "whole" => Domain::whole_space(d),
        other => return Err(usage(format!("unknown domain {other:?}"))),
    };
    let from_p = match (kind, p) {
        (_, None) => None,
        ("whole", Some(_)) => return Err(usage("the whole space takes no killing exponent")),
        ("punctured", Some(p)) => Some(c_origin(sp, p, &quad)?.value),
        (_, Some(p)) => {
            if p < alpha / 2.0 {
                return Err(usage(format!(
                    "the killed process has exponent at least α/2 = {}; p = {p} needs a censored process",
                    alpha / 2.0
                )));
            }
            let base = c_boundary(sp, alpha / 2.0, &quad)?.value;
            Some((c_boundary(sp, p, &quad)?.value - base).max(0.0))
        }
    };
    if let (Some(a), Some(b)) = (from_p, *c1) {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(usage(format!("--p implies C1 = {a}, conflicting with --C1 {b}")));
        }
    }
    let amp = *c1.insert(from_p.or(*c1).unwrap_or(0.0));
    let (pot, target) = match kind {
        "whole" => {
            if amp != 0.0 {
                return Err(usage("the whole space takes no killing amplitude"));
            }
            (KillingPotential::zero(alpha), None)
        }
        "punctured" => {
            let target = if amp > 0.0 { Some(p.map_or_else(|| invert_c_origin(sp, amp, &quad), Ok)?) } else { None };
            (KillingPotential::critical(Geometry::OriginDistance, alpha, amp)?, target)
        }
        _ => {
            let target = match (p, amp == 0.0, d >= 2) {
                (Some(p), _, _) => Some(p),
                (None, true, _) => Some(alpha / 2.0),
                (None, false, true) => {
                    let base = c_boundary(sp, alpha / 2.0, &quad)?.value;
                    Some(invert_c_boundary(sp, base + amp, &quad)?)
                }
                (None, false, false) => None,
            };
            (KillingPotential::critical(Geometry::BoundaryDistance, alpha, amp)?, target)
        }
    };
    Ok(Setup {
        domain,
        pot,
        c1: amp,
        target,
    })
}

pub fn survival(args: &mut SurvivalArgs, ctx: &Context) -> CliResult<Outcome> {
    let kind = args.domain.get_or_insert_with(|| "ball".into()).clone();
    let sp = params(*args.d.get_or_insert(2), *args.alpha.get_or_insert(1.5))?;
    let t = *args.t.get_or_insert(0.1);
    let s = setup(&kind, &sp, args.p, &mut args.c1)?;
    let (cfg, seed) = mc_config(&mut args.mc, ctx)?;
    let mut report = Report::new(&["dist", "x", "value", "half_width_95", "alive_fraction", "truncation_rate", "mean_steps"]);
    let diag = |r: &critkill_core::feynman_kac::EstimatorResult, k: &str| r.diagnostics.get(k).map_or(Value::Null, |v| num(*v));
    report.set("seed", seed);
    report.set("n_paths", cfg.n_paths);
    report.set("C1", s.c1);
    if args.fit {
        let n = *args.ray_points.get_or_insert(8);
        let ray = default_ray(&s.domain, &sp, t, n)?;
        let fit = fit_exponent(&sp, &s.domain, &s.pot, t, &ray, &cfg, seed)?;
        for pt in &fit.points {
            let r = &pt.survival;
            report.push(vec![
                num(pt.dist),
                point(&pt.point),
                num(r.value),
                num(r.half_width_95),
                diag(r, "alive_fraction"),
                diag(r, "truncation_rate"),
                diag(r, "mean_steps"),
            ]);
            report.plot.push((pt.dist, r.value, r.half_width_95));
        }
        report.set("p_hat", fit.p_hat);
        report.set("stderr", fit.stderr);
        report.set("ci95", [fit.p_hat - 1.96 * fit.stderr, fit.p_hat + 1.96 * fit.stderr]);
        report.set("target_p", s.target);
        eprintln!(
            "seed {seed} n_paths {} p_hat {:.4} ± {:.4} (95%)",
            cfg.n_paths,
            fit.p_hat,
            1.96 * fit.stderr
        );
    } else {
        let x = args.x.clone().ok_or_else(|| usage("give a starting point with --x or ask for --fit"))?;
        if x.len() != sp.d {
            return Err(usage(format!("--x has {} coordinates, d = {}", x.len(), sp.d)));
        }
        let r = estimate_survival(&x, t, &sp, &s.domain, &s.pot, &cfg, seed)?;
        let dist = critkill_core::feynman_kac::decay_distance(&s.domain, &x);
        report.push(vec![
            num(dist),
            point(&x),
            num(r.value),
            num(r.half_width_95),
            diag(&r, "alive_fraction"),
            diag(&r, "truncation_rate"),
            diag(&r, "mean_steps"),
        ]);
        report.plot.push((dist, r.value, r.half_width_95));
        report.set("value", r.value);
        report.set("half_width_95", r.half_width_95);
        eprintln!("seed {seed} n_paths {} survival {:.6} ± {:.6} (95%)", cfg.n_paths, r.value, r.half_width_95);
    }
    Ok(report.into())
}

pub fn factorize(args: &mut FactorizeArgs, ctx: &Context) -> CliResult<Outcome> {
    let kind = args.domain.get_or_insert_with(|| "ball".into()).clone();
    let (radii, angle) = match kind.as_str() {
        "ball" => (vec![0.55, 0.65, 0.75, 0.85, 0.95], 0.1),
        "punctured" => (vec![0.03, 0.06, 0.1, 0.15, 0.2], std::f64::consts::FRAC_PI_2),
        other => return Err(usage(format!("factorize supports ball and punctured, not {other:?}"))),
    };
    let d = *args.d.get_or_insert(2);
    if d < 2 {
        return Err(usage("factorize needs d ≥ 2"));
    }
    let default_alpha = if kind == "ball" { 1.5 } else { 1.2 };
    let sp = params(d, *args.alpha.get_or_insert(default_alpha))?;
    let t = *args.t.get_or_insert(0.1);
    let radii = args.radii.get_or_insert(radii).clone();
    let angle = *args.angle.get_or_insert(angle);
    let s = setup(&kind, &sp, args.p, &mut args.c1)?;
    let (cfg, seed) = mc_config(&mut args.mc, ctx)?;
    let ray = |r: f64, th: f64| {
        let mut v = vec![0.0; d];
        v[0] = r * th.cos();
        v[1] = r * th.sin();
        v
    };
    let xs: Vec<Vec<f64>> = radii.iter().map(|&r| ray(r, 0.0)).collect();
    let ys: Vec<Vec<f64>> = radii.iter().map(|&r| ray(r, angle)).collect();
    let rep = factorization_report(&sp, &s.domain, &s.pot, t, &xs, &ys, &cfg, seed)?;
    let mut report = Report::new(&[
        "x",
        "y",
        "kernel",
        "half_width_95",
        "survival_x",
        "survival_y",
        "tilde_q",
        "ratio",
        "ci_positive",
    ]);
    let mut all_positive = true;
    for (i, row) in rep.rows.iter().enumerate() {
        let positive = row.kernel.lower() > 0.0;
        all_positive &= positive;
        report.push(vec![
            point(&row.x),
            point(&row.y),
            num(row.kernel.value),
            num(row.kernel.half_width_95),
            num(row.survival_x),
            num(row.survival_y),
            num(row.tilde_q),
            num(row.ratio),
            json!(positive),
        ]);
        report.plot.push((i as f64, row.ratio, row.ratio * row.kernel.half_width_95 / row.kernel.value));
    }
    report.set("seed", seed);
    report.set("n_paths", cfg.n_paths);
    report.set("C1", s.c1);
    report.set("spread", num(rep.spread));
    report.set("max_ratio", num(rep.max_ratio));
    report.set("min_ratio", num(rep.min_ratio));
    report.set("all_ci_positive", all_positive);
    report.set("bandwidth", rep.bandwidth);
    eprintln!(
        "seed {seed} n_paths {} spread {:.3} (ratios {:.4}..{:.4}), all kernel CIs positive: {all_positive}",
        cfg.n_paths, rep.spread, rep.min_ratio, rep.max_ratio
    );
    Ok(report.into())
}

pub fn series(args: &mut SeriesArgs) -> CliResult<Outcome> {
    let n = *args.n.get_or_insert(60);
    let alpha = *args.alpha.get_or_insert(1.3);
    let t = *args.t.get_or_insert(0.1);
    let k_max = *args.k_max.get_or_insert(60);
    let tail_tol = *args.tail_tol.get_or_insert(1e-10);
    let err_tol = *args.err_tol.get_or_insert(1e-8);
    let model = build_generator(n, alpha)?;
    let c1 = *args.c1.get_or_insert(model.critical_amplitude());
    let kappa = model.critical_kappa(c1);
    let exact = semigroup(&model, &kappa, t)?;
    if let Some(path) = &args.dump_matrix {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_matrix_csv(&mut f, &exact)?;
    }
    let s = duhamel_series(&model, &kappa, t, k_max)?;
    let mut report = Report::new(&["k", "term_norm", "partial_sum_error"]);
    for k in 0..=k_max {
        let err = (&s.partial_sums[k] - &exact).amax();
        report.push(vec![json!(k), num(s.term_norms[k]), num(err)]);
        report.plot.push((k as f64, s.term_norms[k], 0.0));
    }
    report.set("C1", c1);
    let failure = match s.first_converged(tail_tol) {
        Some(k) => {
            let err = (&s.partial_sums[k] - &exact).amax();
            let bad = s.bracketing_violations(&exact, k);
            report.set("K", k);
            report.set("tail", s.term_norms[k + 1]);
            report.set("sup_error", err);
            report.set("bracketing_violations", bad);
            report.set("pass", err < err_tol && bad == 0);
            eprintln!("K {k} tail {:e} sup error {err:e} bracketing violations {bad}", s.term_norms[k + 1]);
            if err >= err_tol {
                Some(format!("partial sum error {err:e} at K = {k} is not below {err_tol:e}"))
            } else if bad > 0 {
                Some(format!("{bad} bracketing violation(s)"))
            } else {
                None
            }
        }
        None => {
            report.set("pass", false);
            Some(format!("series tail did not fall below {tail_tol:e} within {k_max} terms"))
        }
    };
    Ok(Outcome { report, failure })
}

pub fn threep(args: &mut ThreepArgs, ctx: &Context) -> CliResult<Outcome> {
    let samples = *args.samples.get_or_insert(100_000);
    let sp = params(*args.d.get_or_insert(2), *args.alpha.get_or_insert(1.5))?;
    let seed = *args.seed.get_or_insert(1);
    let r = three_p_check(&sp, samples, seed, ctx.workers)?;
    let mut report = Report::new(&["d", "alpha", "samples", "seed", "empirical_c", "violations"]);
    report.push(vec![json!(sp.d), num(sp.alpha), json!(samples), json!(seed), num(r.empirical_c), json!(r.violations)]);
    report.set("empirical_c", num(r.empirical_c));
    report.set("violations", r.violations);
    report.set("worst", &r.worst);
    eprintln!("seed {seed} samples {samples} empirical_c {:.6} violations {}", r.empirical_c, r.violations);
    let failure = (r.violations > 0 || !r.empirical_c.is_finite())
        .then(|| format!("{} non-finite ratio(s)", r.violations));
    Ok(Outcome { report, failure })
}
