//! Mean-estimation experiments: normal approximation, moderate deviations, coverage.

use catoni_core::dist::{self, NoiseModel};
use catoni_core::influence::InfluenceKind;
use catoni_core::mean::{build_ci, solve_mean, solve_self_normalized, MeanConfig, MeanEstimate, Sample};
use catoni_core::root::RootMethod;
use catoni_core::specialfn::{ecdf_sup_distance, normal_cdf, normal_sf};
use catoni_core::Error as CoreError;
use serde_json::json;

use crate::config::{ExperimentConfig, Kind};
use crate::error::{HarnessError, Result};
use crate::report::{Cell, ReportTable};
use crate::sim::{ks_null_scale, par_replicates, proportion, redraw_stream, replicate_stream, spearman};

/// Tolerance for `u_n`; far below any reported statistic's resolution.
const U_N_TOL: f64 = 1e-11;
const MAX_REDRAWS: u64 = 100;
/// Minimum expected number of tail hits for a moderate-deviation cell.
pub const MIN_EXPECTED_HITS: f64 = 200.0;

/// `u_n` by quadrature, or the center itself when the law is symmetric and `phi` odd.
fn centering(cfg: &ExperimentConfig, alpha: f64) -> Result<f64> {
    if cfg.model.is_symmetric() && !matches!(cfg.phi.kind(), InfluenceKind::Custom(_)) {
        return Ok(cfg.model.mean());
    }
    Ok(dist::solve_u_n(&cfg.model, alpha, &cfg.phi, U_N_TOL)?)
}

fn known_scale(cfg: &ExperimentConfig, n: usize, a_n: f64) -> MeanConfig {
    let sigma = cfg.model.sd();
    let mut m = MeanConfig::with_scale(sigma, Some(a_n), cfg.phi.clone(), cfg.stat_tol * sigma / (n as f64).sqrt());
    m.method = RootMethod::Illinois;
    m
}

fn self_normalized(cfg: &ExperimentConfig, n: usize, a_n: f64) -> MeanConfig {
    let mut m = MeanConfig::self_normalized(Some(a_n), cfg.phi.clone(), cfg.stat_tol * cfg.model.sd() / (n as f64).sqrt());
    m.method = RootMethod::Illinois;
    m
}

/// Self-normalized estimate on replicate `r`, redrawing degenerate samples.
/// Returns the estimate and the number of redraws.
fn self_normalized_replicate(
    cfg: &ExperimentConfig,
    mc: &MeanConfig,
    n: usize,
    r: usize,
) -> std::result::Result<(MeanEstimate, u64), CoreError> {
    for attempt in 0..=MAX_REDRAWS {
        let s = dist::draw(&cfg.model, n, &mut redraw_stream(cfg.seed, cfg.kind, n, r, attempt));
        match solve_self_normalized(&s, mc) {
            Ok(e) => return Ok((e, attempt)),
            Err(CoreError::DegenerateSample(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CoreError::DegenerateSample(format!("{MAX_REDRAWS} consecutive degenerate redraws")))
}

fn draw(model: &NoiseModel, seed: u64, kind: Kind, n: usize, r: usize) -> Sample {
    dist::draw(model, n, &mut replicate_stream(seed, kind, n, r))
}

fn ks_normal(mut stats: Vec<f64>) -> Result<f64> {
    stats.sort_by(f64::total_cmp);
    Ok(ecdf_sup_distance(&stats, normal_cdf)?)
}

pub const BE_MEAN_COLUMNS: &[&str] =
    &["n", "a_n", "alpha", "u_n", "d", "d_null_scale", "beta2", "beta3", "ratio", "stat_mean", "stat_sd"];

/// Kolmogorov distance of `sqrt(n)(theta_hat - u_n)/sigma` to the standard normal.
pub fn run_be_mean(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let mut t = ReportTable::new(cfg, BE_MEAN_COLUMNS);
    let sigma = cfg.model.sd();
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let a_n = cfg.a_n(i);
        let mc = known_scale(cfg, n, a_n);
        let alpha = a_n / sigma;
        let u_n = centering(cfg, alpha)?;
        let rn = (n as f64).sqrt();
        let stats = par_replicates(cfg.reps, n, |r| {
            let s = draw(&cfg.model, cfg.seed, cfg.kind, n, r);
            Ok(rn * (solve_mean(&s, &mc)?.theta_hat - u_n) / sigma)
        })?;
        let (m, sd) = moments(&stats);
        let d = ks_normal(stats)?;
        let (b2, b3) = dist::beta_terms(&cfg.model, n);
        t.push(vec![
            n.into(),
            a_n.into(),
            alpha.into(),
            u_n.into(),
            d.into(),
            ks_null_scale(cfg.reps).into(),
            b2.into(),
            b3.into(),
            (d / (b2 + b3)).into(),
            m.into(),
            sd.into(),
        ]);
    }
    Ok(t)
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

pub const BE_SELF_COLUMNS: &[&str] =
    &["n", "a_n", "d", "d_null_scale", "beta2", "beta3", "sqrt_n_a_n", "predictor", "redraws"];

/// Kolmogorov distance of `sqrt(n)(theta_s - u)/sigma_hat` to the standard normal.
pub fn run_be_self(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let mut t = ReportTable::new(cfg, BE_SELF_COLUMNS);
    let u = cfg.model.mean();
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let a_n = cfg.a_n(i);
        let mc = self_normalized(cfg, n, a_n);
        let rn = (n as f64).sqrt();
        let res = par_replicates(cfg.reps, n, |r| {
            let (e, redraws) = self_normalized_replicate(cfg, &mc, n, r)?;
            Ok((rn * (e.theta_hat - u) / e.sigma_used, redraws))
        })?;
        let redraws: u64 = res.iter().map(|x| x.1).sum();
        let d = ks_normal(res.into_iter().map(|x| x.0).collect())?;
        let (b2, b3) = dist::beta_terms(&cfg.model, n);
        let shift = rn * a_n;
        t.push(vec![
            n.into(),
            a_n.into(),
            d.into(),
            ks_null_scale(cfg.reps).into(),
            b2.into(),
            b3.into(),
            shift.into(),
            (b2 + b3 + shift).into(),
            Cell::Int(redraws as i64),
        ]);
    }
    Ok(t)
}

pub const MD_COLUMNS: &[&str] = &[
    "n",
    "z",
    "status",
    "expected_hits",
    "tail_count",
    "ratio",
    "ratio_se",
    "abs_dev",
    "ratio_u",
    "ratio_u_se",
    "sqrt_n_a_n",
    "gamma_n",
];

/// Tail ratio `P(stat > z) / (1 - Phi(z))` on a z grid.
///
/// `md_mean` centers at `u_n` (`ratio`) and at `u` (`ratio_u`); `md_self` uses the
/// self-normalized estimate centered at `u` and scaled by `sigma_hat`.
pub fn run_md(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let self_norm = match cfg.kind {
        Kind::MdMean => false,
        Kind::MdSelf => true,
        k => return Err(HarnessError::Abort(format!("run_md called for {}", k.as_str()))),
    };
    let mut t = ReportTable::new(cfg, MD_COLUMNS);
    let sigma = cfg.model.sd();
    let u = cfg.model.mean();
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let a_n = cfg.a_n(i);
        let rn = (n as f64).sqrt();
        let z_max = (n as f64).powf(1.0 / 6.0);
        // (centered at u_n, centered at u)
        let stats: Vec<(f64, f64)> = if self_norm {
            let mc = self_normalized(cfg, n, a_n);
            par_replicates(cfg.reps, n, |r| {
                let (e, _) = self_normalized_replicate(cfg, &mc, n, r)?;
                let s = rn * (e.theta_hat - u) / e.sigma_used;
                Ok((s, s))
            })?
        } else {
            let mc = known_scale(cfg, n, a_n);
            let u_n = centering(cfg, a_n / sigma)?;
            t.note(json!({ "n": n, "u_n": u_n }));
            par_replicates(cfg.reps, n, |r| {
                let th = solve_mean(&draw(&cfg.model, cfg.seed, cfg.kind, n, r), &mc)?.theta_hat;
                Ok((rn * (th - u_n) / sigma, rn * (th - u) / sigma))
            })?
        };
        let gamma = self_norm.then(|| dist::gamma_n(n, a_n, cfg.delta_list[0]));
        let (mut zs, mut devs) = (Vec::new(), Vec::new());
        for &z in &cfg.z_grid {
            let tail = normal_sf(z);
            let expected = cfg.reps as f64 * tail;
            let status = if !(0.0..=z_max).contains(&z) {
                "out-of-range"
            } else if expected < MIN_EXPECTED_HITS {
                "too-few-expected-hits"
            } else {
                "ok"
            };
            if status != "ok" {
                t.push(vec![
                    n.into(),
                    z.into(),
                    status.into(),
                    expected.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    (rn * a_n).into(),
                    gamma.into(),
                ]);
                continue;
            }
            let c0 = stats.iter().filter(|s| s.0 > z).count();
            let c1 = stats.iter().filter(|s| s.1 > z).count();
            let (p0, se0) = proportion(c0, cfg.reps);
            let (p1, se1) = proportion(c1, cfg.reps);
            let ratio = p0 / tail;
            zs.push(z);
            devs.push((ratio - 1.0).abs());
            t.push(vec![
                n.into(),
                z.into(),
                status.into(),
                expected.into(),
                c0.into(),
                ratio.into(),
                (se0 / tail).into(),
                (ratio - 1.0).abs().into(),
                (p1 / tail).into(),
                (se1 / tail).into(),
                (rn * a_n).into(),
                gamma.into(),
            ]);
        }
        if zs.len() >= 2 {
            t.note(json!({ "n": n, "spearman_abs_dev_vs_z": spearman(&zs, &devs) }));
        }
    }
    Ok(t)
}

pub const COVERAGE_COLUMNS: &[&str] =
    &["n", "variant", "bias_allowance", "level", "coverage", "coverage_se", "mean_half_width", "redraws"];

/// Empirical coverage of the normal-approximation intervals at the true mean.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let mut t = ReportTable::new(cfg, COVERAGE_COLUMNS);
    let u = cfg.model.mean();
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let a_n = cfg.a_n(i);
        let known = known_scale(cfg, n, a_n);
        let selfn = self_normalized(cfg, n, a_n);
        // Per replicate: [(covered, half width)] for the four interval variants, redraws.
        let res = par_replicates(cfg.reps, n, |r| {
            let s = draw(&cfg.model, cfg.seed, cfg.kind, n, r);
            let e1 = solve_mean(&s, &known)?;
            let (e2, redraws) = self_normalized_replicate(cfg, &selfn, n, r)?;
            let mut out = [(false, 0.0); 4];
            for (k, (e, bias)) in [(&e1, false), (&e1, true), (&e2, false), (&e2, true)].into_iter().enumerate() {
                let ci = build_ci(e, n, cfg.level, bias, e.alpha)?;
                out[k] = (ci.lo <= u && u <= ci.hi, 0.5 * (ci.hi - ci.lo));
            }
            Ok((out, redraws))
        })?;
        let redraws: u64 = res.iter().map(|x| x.1).sum();
        for (k, (variant, bias)) in
            [("known-scale", false), ("known-scale", true), ("self-normalized", false), ("self-normalized", true)]
                .into_iter()
                .enumerate()
        {
            let covered = res.iter().filter(|x| x.0[k].0).count();
            let width = res.iter().map(|x| x.0[k].1).sum::<f64>() / cfg.reps as f64;
            let (c, se) = proportion(covered, cfg.reps);
            t.push(vec![
                n.into(),
                variant.into(),
                bias.into(),
                cfg.level.into(),
                c.into(),
                se.into(),
                width.into(),
                Cell::Int(if variant == "self-normalized" { redraws as i64 } else { 0 }),
            ]);
        }
    }
    Ok(t)
}
