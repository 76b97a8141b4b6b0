//! Logistic likelihood, score, Fisher information and per-configuration MLE.
//!
//! Coefficient vectors passed to these functions are ordered like the
//! configuration's indices. When the dataset carries an intercept, the
//! intercept coefficient comes first.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

/// Linear predictors beyond this magnitude are clamped inside the weights
/// and trigger the ridge safeguard in [`fit_mle`].
pub const PREDICTOR_LIMIT: f64 = 30.0;

/// Number of coefficients a configuration carries on this dataset.
pub fn coef_len(d: &Dataset, s: &Configuration) -> usize {
    s.len() + usize::from(d.has_intercept())
}

/// The columns of `X` selected by `s`, preceded by a constant column when the
/// dataset has an intercept.
pub fn design_submatrix(d: &Dataset, s: &Configuration) -> DMatrix<f64> {
    let n = d.n();
    let offset = usize::from(d.has_intercept());
    let mut xs = DMatrix::zeros(n, s.len() + offset);
    if offset == 1 {
        xs.column_mut(0).fill(1.0);
    }
    for (k, &j) in s.indices().iter().enumerate() {
        xs.column_mut(k + offset).copy_from(&d.x().column(j));
    }
    xs
}

fn check_dims(d: &Dataset, s: &Configuration, beta_s: &DVector<f64>) -> Result<()> {
    s.check_bounds(d.p())?;
    let want = coef_len(d, s);
    if beta_s.len() != want {
        return Err(Error::DimensionMismatch(format!(
            "configuration needs {want} coefficients, got {}",
            beta_s.len()
        )));
    }
    Ok(())
}

pub fn linear_predictor(d: &Dataset, s: &Configuration, beta_s: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(d, s, beta_s)?;
    let offset = usize::from(d.has_intercept());
    let mut eta = DVector::from_element(d.n(), if offset == 1 { beta_s[0] } else { 0.0 });
    for (k, &j) in s.indices().iter().enumerate() {
        eta.axpy(beta_s[k + offset], &d.x().column(j), 1.0);
    }
    Ok(eta)
}

fn loglik_from_predictor(y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    y.iter().zip(eta.iter()).map(|(&yi, &t)| yi * t - softplus(t)).sum()
}

/// `sum_i y_i t_i - log(1 + exp(t_i))` with `t = X_S beta_S`.
pub fn log_likelihood(d: &Dataset, s: &Configuration, beta_s: &DVector<f64>) -> Result<f64> {
    let eta = linear_predictor(d, s, beta_s)?;
    Ok(loglik_from_predictor(d.y(), &eta))
}

fn weight(t: f64) -> f64 {
    let t = t.clamp(-PREDICTOR_LIMIT, PREDICTOR_LIMIT);
    let mu = sigmoid(t);
    mu * (1.0 - mu)
}

/// Diagonal of `W(S, beta_S)`: `exp(t)/(1+exp(t))^2` per observation.
pub fn logistic_weights(d: &Dataset, s: &Configuration, beta_s: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(linear_predictor(d, s, beta_s)?.map(weight))
}

/// Gradient of [`log_likelihood`] with respect to `beta_S`.
pub fn score(d: &Dataset, s: &Configuration, beta_s: &DVector<f64>) -> Result<DVector<f64>> {
    let eta = linear_predictor(d, s, beta_s)?;
    let resid = DVector::from_iterator(
        d.n(),
        d.y().iter().zip(eta.iter()).map(|(&y, &t)| y - sigmoid(t)),
    );
    Ok(design_submatrix(d, s).tr_mul(&resid))
}

/// `X_S' W X_S`, the negative Hessian of the log-likelihood.
pub fn fisher_information(d: &Dataset, s: &Configuration, beta_s: &DVector<f64>) -> Result<DMatrix<f64>> {
    let w = logistic_weights(d, s, beta_s)?;
    Ok(weighted_gram(&design_submatrix(d, s), &w))
}

fn weighted_gram(xs: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = xs.clone();
    for mut col in scaled.column_iter_mut() {
        col.component_mul_assign(w);
    }
    let mut g = xs.tr_mul(&scaled);
    // symmetrize away rounding noise
    let k = g.nrows();
    for a in 0..k {
        for b in (a + 1)..k {
            let v = 0.5 * (g[(a, b)] + g[(b, a)]);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

/// Controls for [`fit_mle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonControl {
    /// Max-norm score tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge added to the Newton system when the safeguard triggers.
    pub ridge: f64,
    pub condition_limit: f64,
    /// With the ridge active, stop once an iteration gains less log-likelihood than this.
    pub separation_gain: f64,
}

impl Default for NewtonControl {
    fn default() -> Self {
        NewtonControl {
            tol: 1e-8,
            max_iter: 50,
            ridge: 1e-6,
            condition_limit: 1e10,
            separation_gain: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub loglik_at_mle: f64,
    pub fisher_info: DMatrix<f64>,
    pub converged: bool,
    /// The ridge safeguard engaged, or the final fit saturates (|x'b| > 30):
    /// the data are (quasi-)separated for this configuration.
    pub separation: bool,
    pub newton_iters: usize,
    pub score_norm: f64,
}

/// Damped Newton iteration for the MLE of `beta_S`, started at zero.
pub fn fit_mle(d: &Dataset, s: &Configuration, ctl: &NewtonControl) -> Result<FitResult> {
    s.check_bounds(d.p())?;
    let n = d.n();
    let k = coef_len(d, s);
    if s.len() >= n || k > n {
        return Err(Error::ModelTooLarge { size: s.len(), n });
    }
    let xs = design_submatrix(d, s);
    let y = d.y();

    let mut beta = DVector::zeros(k);
    let mut eta = DVector::zeros(n);
    let mut ll = loglik_from_predictor(y, &eta);
    if k == 0 {
        return Ok(FitResult {
            beta_hat: beta,
            loglik_at_mle: ll,
            fisher_info: DMatrix::zeros(0, 0),
            converged: true,
            separation: false,
            newton_iters: 0,
            score_norm: 0.0,
        });
    }

    let mut ridge_used = false;
    let mut iters = 0;
    let mut grad = score_from(&xs, y, &eta);
    while iters < ctl.max_iter && grad.amax() >= ctl.tol {
        iters += 1;
        let w = eta.map(weight);
        let h = weighted_gram(&xs, &w);

        let saturated = eta.iter().any(|t| t.abs() > PREDICTOR_LIMIT);
        let mut ridge = if saturated || condition_estimate(&h) > ctl.condition_limit {
            ctl.ridge
        } else {
            0.0
        };
        let step = loop {
            let mut system = h.clone();
            for a in 0..k {
                system[(a, a)] += ridge;
            }
            if let Some(chol) = system.cholesky() {
                break chol.solve(&grad);
            }
            ridge = if ridge == 0.0 { ctl.ridge } else { ridge * 10.0 };
            if ridge > 1e6 {
                return Err(Error::NumericalFailure(format!(
                    "Newton system singular for configuration {s}"
                )));
            }
        };
        if ridge > 0.0 {
            ridge_used = true;
        }

        // step halving until the log-likelihood does not decrease
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cand_eta = &xs * &cand;
            let cand_ll = loglik_from_predictor(y, &cand_eta);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((b, e, l)) = accepted else { break };
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite Newton iterate for configuration {s}"
            )));
        }
        let stalled = l == ll && b == beta;
        // under separation the likelihood creeps toward its supremum
        let negligible = ridge > 0.0 && l - ll <= ctl.separation_gain;
        beta = b;
        eta = e;
        ll = l;
        grad = score_from(&xs, y, &eta);
        if stalled || negligible {
            break;
        }
    }

    let score_norm = grad.amax();
    let saturated = eta.iter().any(|t| t.abs() > PREDICTOR_LIMIT);
    let separation = ridge_used || saturated;
    let fisher_info = weighted_gram(&xs, &eta.map(weight));
    Ok(FitResult {
        beta_hat: beta,
        loglik_at_mle: ll,
        fisher_info,
        converged: score_norm < ctl.tol && !separation,
        separation,
        newton_iters: iters,
        score_norm,
    })
}

fn score_from(xs: &DMatrix<f64>, y: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
    let resid = DVector::from_iterator(
        y.len(),
        y.iter().zip(eta.iter()).map(|(&yi, &t)| yi - sigmoid(t)),
    );
    xs.tr_mul(&resid)
}

/// Squared ratio of extreme Cholesky pivots; infinite when not positive definite.
fn condition_estimate(h: &DMatrix<f64>) -> f64 {
    match h.clone().cholesky() {
        Some(c) => {
            let l = c.l();
            let diag = l.diagonal();
            let (lo, hi) = diag
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if lo <= 0.0 {
                f64::INFINITY
            } else {
                (hi / lo).powi(2)
            }
        }
        None => f64::INFINITY,
    }
}
