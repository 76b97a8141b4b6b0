//! L1-penalized logistic regression: the plug-in estimate consumed by CAVI.
//!
//! The objective is `-ℓ(β)/n + λ‖β‖₁`, minimized by proximal Newton: each
//! outer step builds the IRLS quadratic model of the log-likelihood, solves
//! the penalized quadratic by cyclic coordinate descent with soft-thresholding,
//! and backtracks along the resulting direction until the objective does not
//! increase. An intercept, when the dataset has one, is never penalized.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PilotControl {
    pub folds: usize,
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of `lambda_max`.
    pub lambda_min_ratio: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Coordinate-descent tolerance on the curvature-scaled coefficient change.
    pub tol: f64,
    pub jitter_scale: f64,
}

impl Default for PilotControl {
    fn default() -> Self {
        PilotControl {
            folds: 5,
            n_lambda: 50,
            lambda_min_ratio: 0.01,
            max_outer: 50,
            max_inner: 500,
            tol: 1e-7,
            jitter_scale: 0.01,
        }
    }
}

/// The pilot's output: `beta_tilde` is a full p-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotEstimate {
    pub beta_tilde: Vec<f64>,
    /// Unpenalized intercept (0 when the dataset has none).
    pub intercept: f64,
    pub lambda_used: f64,
    pub jitter_applied: bool,
    /// Nonzero pattern of the penalized fit, before jittering.
    pub support: Configuration,
    pub cv_deviance: Vec<f64>,
    pub lambda_grid: Vec<f64>,
}

impl PilotEstimate {
    /// Wraps an externally supplied coefficient vector.
    pub fn external(beta_tilde: Vec<f64>) -> Self {
        let support = Configuration::from_indicator(
            &beta_tilde.iter().map(|&b| b != 0.0).collect::<Vec<_>>(),
        );
        PilotEstimate {
            beta_tilde,
            intercept: 0.0,
            lambda_used: 0.0,
            jitter_applied: false,
            support,
            cv_deviance: Vec::new(),
            lambda_grid: Vec::new(),
        }
    }
}

/// Parses a whitespace- or comma-separated list of reals (one coefficient per covariate).
pub fn parse_beta_tilde(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(k, tok)| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("entry {}: `{tok}` is not a finite real", k + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Parse("coefficient file is empty".into()));
    }
    Ok(values)
}

/// Coordinate update for `g_j β_j-direction + (h/2) β_j^2 + λ|β_j|`:
/// `sign(z) max(|z| - λ/h, 0)` with Newton target `z = β_j - g/h`.
pub fn soft_threshold_update(beta_j: f64, g: f64, h: f64, lambda: f64) -> f64 {
    let z = beta_j - g / h;
    z.signum() * (z.abs() - lambda / h).max(0.0)
}

/// Smallest λ whose solution is identically zero.
pub fn lambda_max(d: &Dataset) -> f64 {
    let n = d.n() as f64;
    let center = if d.has_intercept() { d.y().mean() } else { 0.5 };
    let resid = d.y().map(|y| y - center);
    d.x().tr_mul(&resid).amax() / n
}

/// `n_lambda` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn default_lambda_grid(d: &Dataset, n_lambda: usize, ratio: f64) -> Vec<f64> {
    let hi = lambda_max(d).max(f64::MIN_POSITIVE);
    if n_lambda <= 1 {
        return vec![hi];
    }
    let step = ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda).map(|k| hi * (step * k as f64).exp()).collect()
}

/// Penalized objective `-ℓ/n + λ‖β‖₁`.
pub fn penalized_objective(d: &Dataset, beta: &DVector<f64>, intercept: f64, lambda: f64) -> f64 {
    let eta = d.x() * beta;
    nll_mean(d.y(), &eta, intercept) + lambda * beta.lp_norm(1)
}

fn nll_mean(y: &DVector<f64>, eta: &DVector<f64>, b0: f64) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &t)| softplus(t + b0) - yi * (t + b0))
        .sum::<f64>()
        / n
}

/// A penalized fit at one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Fit {
    pub beta: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub outer_iters: usize,
    /// Objective after each accepted outer step, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

impl L1Fit {
    pub fn support(&self) -> Configuration {
        Configuration::from_indicator(&self.beta.iter().map(|&b| b != 0.0).collect::<Vec<_>>())
    }
}

fn constant_columns(d: &Dataset) -> Vec<bool> {
    d.x()
        .column_iter()
        .map(|c| {
            let first = c[0];
            c.iter().all(|&v| v == first)
        })
        .collect()
}

/// Proximal-Newton fit at a single λ, optionally warm-started.
pub fn fit_l1_at(d: &Dataset, lambda: f64, warm: Option<&L1Fit>, ctl: &PilotControl) -> Result<L1Fit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let frozen = constant_columns(d);
    fit_l1_inner(d, lambda, warm, ctl, &frozen)
}

fn fit_l1_inner(
    d: &Dataset,
    lambda: f64,
    warm: Option<&L1Fit>,
    ctl: &PilotControl,
    frozen: &[bool],
) -> Result<L1Fit> {
    let (n, p) = d.x().shape();
    let nf = n as f64;
    let x = d.x();
    let y = d.y();
    let use_b0 = d.has_intercept();

    let (mut beta, mut b0) = match warm {
        Some(w) => (w.beta.clone(), w.intercept),
        None => (DVector::zeros(p), 0.0),
    };
    for j in 0..p {
        if frozen[j] {
            beta[j] = 0.0;
        }
    }
    let mut eta = x * &beta;
    let mut obj = nll_mean(y, &eta, b0) + lambda * beta.lp_norm(1);
    let mut trace = vec![obj];
    let mut outer = 0;

    let mut w = DVector::zeros(n);
    let mut resid = DVector::zeros(n);
    let mut curv = vec![0.0; p];

    while outer < ctl.max_outer {
        outer += 1;
        // quadratic model at the current point
        for i in 0..n {
            let mu = sigmoid(eta[i] + b0);
            let wi = (mu * (1.0 - mu)).max(1e-5);
            w[i] = wi;
            // working residual z - eta for the trial coefficients (initially the current ones)
            resid[i] = (y[i] - mu) / wi;
        }
        for j in 0..p {
            curv[j] = if frozen[j] {
                0.0
            } else {
                x.column(j).iter().zip(w.iter()).map(|(v, wi)| wi * v * v).sum::<f64>() / nf
            };
        }
        let w_sum = w.sum() / nf;

        let mut trial = beta.clone();
        let mut trial_b0 = b0;
        let cycle = |trial: &mut DVector<f64>, trial_b0: &mut f64, resid: &mut DVector<f64>, active_only: bool| {
            let mut max_change: f64 = 0.0;
            if use_b0 {
                let g = -resid.iter().zip(w.iter()).map(|(r, wi)| r * wi).sum::<f64>() / nf;
                let delta = -g / w_sum;
                if delta != 0.0 {
                    *trial_b0 += delta;
                    resid.add_scalar_mut(-delta);
                    max_change = max_change.max(delta.abs() * w_sum.sqrt());
                }
            }
            for j in 0..p {
                if curv[j] <= 0.0 || (active_only && trial[j] == 0.0) {
                    continue;
                }
                let col = x.column(j);
                let g = -col
                    .iter()
                    .zip(resid.iter())
                    .zip(w.iter())
                    .map(|((v, r), wi)| v * r * wi)
                    .sum::<f64>()
                    / nf;
                let new = soft_threshold_update(trial[j], g, curv[j], lambda);
                let delta = new - trial[j];
                if delta != 0.0 {
                    trial[j] = new;
                    resid.axpy(-delta, &col, 1.0);
                    max_change = max_change.max(delta.abs() * curv[j].sqrt());
                }
            }
            max_change
        };

        let mut sweeps = 0;
        loop {
            let change = cycle(&mut trial, &mut trial_b0, &mut resid, false);
            sweeps += 1;
            if change < ctl.tol || sweeps >= ctl.max_inner {
                break;
            }
            while sweeps < ctl.max_inner {
                let c = cycle(&mut trial, &mut trial_b0, &mut resid, true);
                sweeps += 1;
                if c < ctl.tol {
                    break;
                }
            }
        }

        // backtrack until the objective does not increase
        let dir = &trial - &beta;
        let dir_b0 = trial_b0 - b0;
        let dir_eta = x * &dir;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &beta + &dir * t;
            let cand_b0 = b0 + t * dir_b0;
            let cand_eta = &eta + &dir_eta * t;
            let cand_obj = nll_mean(y, &cand_eta, cand_b0) + lambda * cand.lp_norm(1);
            if cand_obj.is_finite() && cand_obj <= obj {
                accepted = Some((cand, cand_b0, cand_eta, cand_obj));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_b0, cand_eta, cand_obj)) = accepted else { break };
        let step_size = (&cand - &beta).amax().max((cand_b0 - b0).abs());
        let decrease = obj - cand_obj;
        beta = cand;
        b0 = cand_b0;
        eta = cand_eta;
        obj = cand_obj;
        trace.push(obj);
        if step_size < ctl.tol || decrease <= 1e-12 * obj.abs().max(1.0) {
            break;
        }
    }

    if beta.iter().any(|v| !v.is_finite()) || !b0.is_finite() {
        return Err(Error::NumericalFailure("L1 logistic fit diverged".into()));
    }
    Ok(L1Fit {
        beta,
        intercept: b0,
        lambda,
        outer_iters: outer,
        objective_trace: trace,
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("lambda grid must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// Warm-started fits along a decreasing grid.
pub fn fit_l1_path(d: &Dataset, grid: &[f64], ctl: &PilotControl) -> Result<Vec<L1Fit>> {
    check_grid(grid)?;
    let frozen = constant_columns(d);
    let mut fits: Vec<L1Fit> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let fit = fit_l1_inner(d, lambda, fits.last(), ctl, &frozen)?;
        fits.push(fit);
    }
    Ok(fits)
}

/// Assigns each observation to one of `folds` folds by a random permutation.
pub fn fold_assignment<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        fold[i] = rank % folds;
    }
    fold
}

fn deviance(d: &Dataset, fit: &L1Fit) -> f64 {
    let eta = d.x() * &fit.beta;
    2.0 * d.n() as f64 * nll_mean(d.y(), &eta, fit.intercept)
}

/// Cross-validated L1 logistic regression. Ties in CV deviance go to the larger λ.
pub fn fit_l1_logistic<R: Rng + ?Sized>(
    d: &Dataset,
    lambda_grid: &[f64],
    folds: usize,
    rng: &mut R,
) -> Result<PilotEstimate> {
    fit_l1_logistic_with(d, lambda_grid, folds, rng, &PilotControl::default())
}

pub fn fit_l1_logistic_with<R: Rng + ?Sized>(
    d: &Dataset,
    lambda_grid: &[f64],
    folds: usize,
    rng: &mut R,
    ctl: &PilotControl,
) -> Result<PilotEstimate> {
    check_grid(lambda_grid)?;
    if folds < 2 || folds > d.n() {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= folds <= n, got {folds} folds for n = {}",
            d.n()
        )));
    }
    let frozen = constant_columns(d);
    if let Some(j) = frozen.iter().position(|&f| f) {
        log::warn!(
            "column `{}` is constant and excluded from penalized updates",
            d.names()[j]
        );
    }

    let assignment = fold_assignment(d.n(), folds, rng);
    let mut cv = vec![0.0; lambda_grid.len()];
    for k in 0..folds {
        let train: Vec<usize> = (0..d.n()).filter(|&i| assignment[i] != k).collect();
        let test: Vec<usize> = (0..d.n()).filter(|&i| assignment[i] == k).collect();
        let train_d = d.select_rows(&train)?;
        let test_d = d.select_rows(&test)?;
        let path = fit_l1_path(&train_d, lambda_grid, ctl)?;
        for (acc, fit) in cv.iter_mut().zip(&path) {
            *acc += deviance(&test_d, fit);
        }
    }

    let mut best = 0;
    for (k, &dev) in cv.iter().enumerate() {
        if dev < cv[best] {
            best = k;
        }
    }
    let path = fit_l1_path(d, &lambda_grid[..=best], ctl)?;
    let chosen = path.last().expect("nonempty path");
    Ok(PilotEstimate {
        beta_tilde: chosen.beta.iter().copied().collect(),
        intercept: chosen.intercept,
        lambda_used: lambda_grid[best],
        jitter_applied: false,
        support: chosen.support(),
        cv_deviance: cv,
        lambda_grid: lambda_grid.to_vec(),
    })
}

/// Replaces exact zeros with draws from `Unif(-scale, scale) \ {0}`.
pub fn jitter_zeros<R: Rng + ?Sized>(est: &PilotEstimate, scale: f64, rng: &mut R) -> Result<PilotEstimate> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("jitter scale must be > 0, got {scale}")));
    }
    let dist = Uniform::new(-scale, scale).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = est.clone();
    for b in out.beta_tilde.iter_mut().filter(|b| **b == 0.0) {
        *b = loop {
            let v = dist.sample(rng);
            if v != 0.0 && v.abs() < scale {
                break v;
            }
        };
        out.jitter_applied = true;
    }
    Ok(out)
}
