//! Regression experiments on a fixed design with fresh noise per replicate.

use catoni_core::dist;
use catoni_core::linalg::sym_sqrt;
use catoni_core::regression::{
    default_alpha, delta_n_from_scalar, feasibility, gram_stats, solve_regression, standardize_with_root, AlphaRule,
    GramStats, RegressionConfig, RegressionProblem,
};
use catoni_core::rng::{hash_words, RngStream};
use catoni_core::specialfn::{chi2_cdf, ecdf_sup_distance, normal_cdf};
use catoni_core::Error as CoreError;
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::config::{Design, ExperimentConfig, RowGenerator};
use crate::error::{HarnessError, Result};
use crate::report::{Cell, ReportTable};
use crate::sim::{ks_null_scale, mean_se, par_replicates, proportion, replicate_stream};

/// Largest tolerated share of non-converged replicates.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;

/// The fixed `n x p` design for sample size `n`.
pub fn design_matrix(d: &Design, n: usize) -> DMatrix<f64> {
    let mut rng = RngStream::new(d.seed, hash_words(&[0xDE51_6E, n as u64]));
    let p = d.p;
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        match d.rows {
            RowGenerator::Sphere => {
                let mut row: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (j, v) in row.iter_mut().enumerate() {
                    *v = *v / norm * d.scales[j];
                }
                for j in 0..p {
                    x[(i, j)] = row[j];
                }
            }
            RowGenerator::Gaussian => {
                for j in 0..p {
                    x[(i, j)] = rng.standard_normal() * d.scales[j];
                }
            }
            RowGenerator::InterceptGaussian => {
                x[(i, 0)] = d.scales[0];
                for j in 1..p {
                    x[(i, j)] = rng.standard_normal() * d.scales[j];
                }
            }
            RowGenerator::Ones => x[(i, 0)] = d.scales[0],
        }
    }
    x
}

fn design_of(cfg: &ExperimentConfig) -> &Design {
    cfg.design.as_ref().expect("regression kinds carry a design")
}

fn fit_replicate(
    cfg: &ExperimentConfig,
    x: &DMatrix<f64>,
    signal: &DVector<f64>,
    rc: &RegressionConfig,
    n: usize,
    r: usize,
) -> std::result::Result<Option<DVector<f64>>, CoreError> {
    let e = dist::draw(&cfg.model, n, &mut replicate_stream(cfg.seed, cfg.kind, n, r));
    let y = signal + DVector::from_column_slice(e.values());
    let problem = RegressionProblem::new(x.clone(), y)?;
    match solve_regression(&problem, rc) {
        Ok(f) => Ok(Some(f.beta_hat)),
        Err(CoreError::NonConvergence { .. } | CoreError::Stalled { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_excluded(excluded: usize, reps: usize, n: usize) -> Result<()> {
    if excluded as f64 > MAX_EXCLUDED_FRACTION * reps as f64 {
        return Err(HarnessError::Abort(format!(
            "{excluded} of {reps} replicates at n = {n} failed to converge (limit {MAX_EXCLUDED_FRACTION})"
        )));
    }
    Ok(())
}

fn kappa(g: &GramStats) -> f64 {
    g.lambda_max / g.lambda_min
}

pub const BOUND_COLUMNS: &[&str] = &[
    "n",
    "p",
    "alpha",
    "sigma_bar_sq",
    "kappa",
    "l_n",
    "delta_sq",
    "beta_0",
    "sample_size_ok",
    "violation_freq",
    "violation_se",
    "mean_error",
    "mean_error_se",
    "excluded",
];

/// Frequency of `||beta_hat - beta*||_2 > beta_0` with `alpha` tuned from the true `sigma_bar^2`.
pub fn run_regression_bound(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let d = design_of(cfg);
    let beta = DVector::from_column_slice(&d.beta_star);
    let s2 = cfg.model.variance();
    let mut t = ReportTable::new(cfg, BOUND_COLUMNS);
    for &n in &cfg.n_list {
        let x = design_matrix(d, n);
        let g = gram_stats(&x)?;
        let alpha = default_alpha(n, s2, cfg.epsilon);
        let f = feasibility(&g, s2, alpha, cfg.epsilon, n)?;
        let Some(beta_0) = f.beta_0 else {
            return Err(HarnessError::Abort(format!(
                "infeasible radius at n = {n}: delta^2 = {} (dominant term: {})",
                f.delta_sq,
                f.dominant_term()
            )));
        };
        let signal = &x * &beta;
        let rc = RegressionConfig::new(AlphaRule::Explicit(alpha), cfg.phi.clone());
        let fits = par_replicates(cfg.reps, n, |r| fit_replicate(cfg, &x, &signal, &rc, n, r))?;
        let errs: Vec<f64> = fits.iter().flatten().map(|b| (b - &beta).norm()).collect();
        let excluded = cfg.reps - errs.len();
        check_excluded(excluded, cfg.reps, n)?;
        let (vf, vse) = proportion(errs.iter().filter(|&&e| e > beta_0).count(), errs.len());
        let (me, mse) = mean_se(&errs);
        t.push(vec![
            n.into(),
            d.p.into(),
            alpha.into(),
            s2.into(),
            kappa(&g).into(),
            g.l_n.into(),
            f.delta_sq.into(),
            beta_0.into(),
            f.sample_size_ok.into(),
            vf.into(),
            vse.into(),
            me.into(),
            mse.into(),
            excluded.into(),
        ]);
    }
    Ok(t)
}

pub const MDBE_COLUMNS: &[&str] = &[
    "n",
    "p",
    "alpha",
    "phi_mean",
    "sigma_tilde",
    "delta_n_norm",
    "kappa",
    "ball_gap",
    "halfspace_gap",
    "ks_null_scale",
    "mean_t_sq",
    "excluded",
];

/// Normal approximation of the standardized estimator over balls and half-spaces.
///
/// `ball_gap` is the supremum over every radius `r > 0` of
/// `|P(||T||^2 <= r) - chi2_p(r)|`; `halfspace_gap` is the largest Kolmogorov
/// distance over the `2p` signed coordinates of `T`.
pub fn run_regression_mdbe(cfg: &ExperimentConfig) -> Result<ReportTable> {
    let d = design_of(cfg);
    let beta = DVector::from_column_slice(&d.beta_star);
    let sigma = cfg.model.sd();
    let p = d.p;
    let mut t = ReportTable::new(cfg, MDBE_COLUMNS);
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let x = design_matrix(d, n);
        let g = gram_stats(&x)?;
        let alpha = cfg.a_n(i) / sigma;
        let (m, v) = dist::phi_mean_and_var(&cfg.model, alpha, &cfg.phi)?;
        let sigma_tilde = v.sqrt() / alpha;
        let delta_n = delta_n_from_scalar(&x, m, alpha, &g.s_n)?;
        let root = sym_sqrt(&g.s_n)?;
        let signal = &x * &beta;
        let rc = RegressionConfig::new(AlphaRule::Explicit(alpha), cfg.phi.clone());
        let fits = par_replicates(cfg.reps, n, |r| fit_replicate(cfg, &x, &signal, &rc, n, r))?;
        let ts: Vec<DVector<f64>> = fits
            .iter()
            .flatten()
            .map(|b| standardize_with_root(b, &beta, &delta_n, sigma_tilde, &root, n).t)
            .collect();
        let excluded = cfg.reps - ts.len();
        check_excluded(excluded, cfg.reps, n)?;
        let mut sq: Vec<f64> = ts.iter().map(|t| t.norm_squared()).collect();
        let mean_t_sq = sq.iter().sum::<f64>() / sq.len() as f64;
        sq.sort_by(f64::total_cmp);
        let dof = p as u32;
        let ball = ecdf_sup_distance(&sq, |r| chi2_cdf(r, dof).map(|q| q.get()).unwrap_or(f64::NAN))?;
        let mut half = 0.0f64;
        for j in 0..p {
            for sign in [1.0, -1.0] {
                let mut c: Vec<f64> = ts.iter().map(|t| sign * t[j]).collect();
                c.sort_by(f64::total_cmp);
                half = half.max(ecdf_sup_distance(&c, normal_cdf)?);
            }
        }
        t.note(json!({ "n": n, "delta_n": delta_n.iter().collect::<Vec<_>>() }));
        t.push(vec![
            n.into(),
            p.into(),
            alpha.into(),
            m.into(),
            sigma_tilde.into(),
            delta_n.norm().into(),
            kappa(&g).into(),
            ball.into(),
            half.into(),
            ks_null_scale(ts.len()).into(),
            mean_t_sq.into(),
            Cell::Int(excluded as i64),
        ]);
    }
    Ok(t)
}
