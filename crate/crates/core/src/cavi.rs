//! Coordinate-ascent variational inference over model configurations.
//!
//! The marginal posterior over configurations is approximated by independent
//! Bernoulli inclusion variables `q_φ(S) = Π φ_j^{S_j} (1-φ_j)^{1-S_j}`. The
//! expected log-likelihood under `q_φ` is replaced by its Jaakkola-Jordan
//! lower bound with free parameters `η`, evaluated at a fixed plug-in
//! coefficient vector `β̃`, and the log-binomial prior term by
//! `log C(p, s) <= s (1 + log p)`. The resulting surrogate is maximized
//! cyclically: every `φ_j` has a closed-form update through its log-odds `ω_j`,
//! and `η_i = sqrt(E_q M_i^2)` is refreshed once per sweep.

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_mle, NewtonControl};
use crate::math::{binary_entropy_bits, jj_coefficient, log_sigmoid, sigmoid};
use crate::posterior::HyperParams;

/// Lower clamp applied to φ when its logarithm is needed.
pub const PHI_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaviConfig {
    /// Stopping threshold on the largest per-coordinate entropy change (bits).
    pub epsilon: f64,
    pub max_iter: usize,
    /// Starting inclusion probabilities; `None` means all 0.5.
    pub phi_init: Option<Vec<f64>>,
    /// Selection cutoff on the fitted φ.
    pub threshold: f64,
}

impl Default for CaviConfig {
    fn default() -> Self {
        CaviConfig {
            epsilon: 1e-5,
            max_iter: 100,
            phi_init: None,
            threshold: 0.5,
        }
    }
}

impl CaviConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if let Some(init) = &self.phi_init {
            if init.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "phi_init has {} entries for p = {p}",
                    init.len()
                )));
            }
            if init.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument("phi_init entries must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// `φ`, its log-odds `ω`, the bound parameters `η`, and the running mean
/// predictor `m_i = offset + Σ_k φ_k x_ik β̃_k` used by the coordinate updates.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub phi: Vec<f64>,
    pub omega: Vec<f64>,
    pub eta: Vec<f64>,
    pub sweep: usize,
    mean: Vec<f64>,
}

impl VariationalState {
    pub fn mean_predictor(&self) -> &[f64] {
        &self.mean
    }
}

fn logit(z: f64) -> f64 {
    let z = z.clamp(PHI_CLAMP, 1.0 - PHI_CLAMP);
    (z / (1.0 - z)).ln()
}

fn xlogx(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        z * z.ln()
    }
}

/// `log q_φ(S) = Σ_j S_j log φ_j + (1 - S_j) log(1 - φ_j)`, with `0 log 0 = 0`.
pub fn log_q(phi: &[f64], s: &Configuration) -> f64 {
    let mut bits = vec![false; phi.len()];
    for &j in s.indices() {
        bits[j] = true;
    }
    phi.iter()
        .zip(bits)
        .map(|(&f, inc)| {
            let prob = if inc { f } else { 1.0 - f };
            if prob == 1.0 {
                0.0
            } else {
                prob.ln()
            }
        })
        .sum()
}

/// `q_φ(S)`.
pub fn q_prob(phi: &[f64], s: &Configuration) -> f64 {
    log_q(phi, s).exp()
}

/// Jaakkola-Jordan lower bound `g_n(S, β_S; η)` on `ℓ_n(S, β_S)`.
///
/// `beta` is a full p-vector; only coordinates in `s` contribute.
pub fn logistic_lower_bound(d: &Dataset, s: &Configuration, beta: &[f64], eta: &[f64]) -> Result<f64> {
    s.check_bounds(d.p())?;
    if beta.len() != d.p() || eta.len() != d.n() {
        return Err(Error::DimensionMismatch(format!(
            "bound needs beta of length {} and eta of length {}",
            d.p(),
            d.n()
        )));
    }
    if eta.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidArgument("eta entries must be >= 0".into()));
    }
    let mut m = vec![0.0; d.n()];
    for &j in s.indices() {
        for (mi, &xij) in m.iter_mut().zip(d.x().column(j).iter()) {
            *mi += xij * beta[j];
        }
    }
    Ok(m.iter()
        .zip(eta)
        .zip(d.y().iter())
        .map(|((&mi, &e), &y)| {
            log_sigmoid(e) - 0.5 * e + (y - 0.5) * mi - jj_coefficient(e) * (mi * mi - e * e)
        })
        .sum())
}

/// A dataset paired with the fixed plug-in coefficients.
#[derive(Debug, Clone)]
pub struct CaviProblem<'d> {
    data: &'d Dataset,
    beta_tilde: Vec<f64>,
    offset: f64,
    /// `Σ_i (y_i - 1/2) x_ij`
    centered_score: Vec<f64>,
}

impl<'d> CaviProblem<'d> {
    pub fn new(data: &'d Dataset, beta_tilde: &[f64]) -> Result<Self> {
        if beta_tilde.len() != data.p() {
            return Err(Error::DimensionMismatch(format!(
                "beta_tilde has {} entries for p = {}",
                beta_tilde.len(),
                data.p()
            )));
        }
        if beta_tilde.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("beta_tilde has non-finite entries".into()));
        }
        let yc = data.y().map(|y| y - 0.5);
        let centered_score = data.x().tr_mul(&yc).iter().copied().collect();
        Ok(CaviProblem {
            data,
            beta_tilde: beta_tilde.to_vec(),
            offset: 0.0,
            centered_score,
        })
    }

    /// A constant added to every linear predictor, e.g. a fixed intercept.
    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn beta_tilde(&self) -> &[f64] {
        &self.beta_tilde
    }

    /// `E_q M_i = offset + Σ_j φ_j x_ij β̃_j`.
    pub fn expected_predictor(&self, phi: &[f64]) -> Vec<f64> {
        let mut m = vec![self.offset; self.data.n()];
        for (j, col) in self.data.x().column_iter().enumerate() {
            let w = phi[j] * self.beta_tilde[j];
            if w == 0.0 {
                continue;
            }
            for (mi, &xij) in m.iter_mut().zip(col.iter()) {
                *mi += w * xij;
            }
        }
        m
    }

    /// `Var_q M_i = Σ_j φ_j (1 - φ_j) x_ij^2 β̃_j^2`.
    pub fn predictor_variance(&self, phi: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.data.n()];
        for (j, col) in self.data.x().column_iter().enumerate() {
            let w = phi[j] * (1.0 - phi[j]) * self.beta_tilde[j] * self.beta_tilde[j];
            if w == 0.0 {
                continue;
            }
            for (vi, &xij) in v.iter_mut().zip(col.iter()) {
                *vi += w * xij * xij;
            }
        }
        v
    }

    /// `η_i = sqrt(E_q M_i^2)`.
    pub fn update_eta(&self, phi: &[f64]) -> Vec<f64> {
        let m = self.expected_predictor(phi);
        let v = self.predictor_variance(phi);
        m.iter().zip(&v).map(|(mi, vi)| (vi + mi * mi).sqrt()).collect()
    }

    /// A state at `phi` with `η` from [`CaviProblem::update_eta`].
    pub fn init_state(&self, phi: Vec<f64>) -> Result<VariationalState> {
        if phi.len() != self.data.p() {
            return Err(Error::DimensionMismatch(format!(
                "phi has {} entries for p = {}",
                phi.len(),
                self.data.p()
            )));
        }
        let omega = phi.iter().map(|&f| logit(f)).collect();
        let eta = self.update_eta(&phi);
        let mean = self.expected_predictor(&phi);
        Ok(VariationalState {
            phi,
            omega,
            eta,
            sweep: 0,
            mean,
        })
    }

    /// A state at `phi` with caller-supplied `η`, e.g. to probe the surrogate at fixed `η`.
    pub fn state_at(&self, phi: Vec<f64>, eta: Vec<f64>) -> Result<VariationalState> {
        if eta.len() != self.data.n() {
            return Err(Error::DimensionMismatch(format!(
                "eta has {} entries for n = {}",
                eta.len(),
                self.data.n()
            )));
        }
        let mut state = self.init_state(phi)?;
        state.eta = eta;
        Ok(state)
    }

    /// The data-independent part of every `ω_j`: `½ log(1+αγ) - (a+1) log p - 1`.
    pub fn omega_prior(&self, h: &HyperParams) -> f64 {
        0.5 * h.log_volume() - (h.a + 1.0) * (self.data.p() as f64).ln() - 1.0
    }

    /// Closed-form maximizer of the surrogate in `φ_j` at fixed `η` and other `φ_k`.
    /// Updates `state` in place and returns the new `(ω_j, φ_j)`.
    pub fn update_coordinate(&self, j: usize, state: &mut VariationalState, h: &HyperParams) -> (f64, f64) {
        let bt = self.beta_tilde[j];
        let col = self.data.x().column(j);
        let phi_old = state.phi[j];

        let mut quad = 0.0;
        if bt != 0.0 {
            for ((&xij, &mi), &e) in col.iter().zip(&state.mean).zip(&state.eta) {
                // m_i without coordinate j
                let rest = mi - phi_old * xij * bt;
                quad += jj_coefficient(e) * (xij * xij * bt + 2.0 * xij * rest);
            }
        }
        let omega = h.alpha * bt * self.centered_score[j] - h.alpha * bt * quad + self.omega_prior(h);
        let phi = sigmoid(omega);

        let delta = (phi - phi_old) * bt;
        if delta != 0.0 {
            for (mi, &xij) in state.mean.iter_mut().zip(col.iter()) {
                *mi += delta * xij;
            }
        }
        state.phi[j] = phi;
        state.omega[j] = omega;
        (omega, phi)
    }

    /// Closed-form lower bound on `-K(φ)` at the state's `φ` and `η`.
    pub fn surrogate_objective(&self, state: &VariationalState, h: &HyperParams) -> f64 {
        let p = self.data.p() as f64;
        let per_coord = 1.0 + (1.0 + h.a) * p.ln() - 0.5 * h.log_volume();
        let prior: f64 = -per_coord * state.phi.iter().sum::<f64>();

        let m = self.expected_predictor(&state.phi);
        let v = self.predictor_variance(&state.phi);
        let lik: f64 = (0..self.data.n())
            .map(|i| {
                let e = state.eta[i];
                let second = v[i] + m[i] * m[i];
                log_sigmoid(e) - 0.5 * e + (self.data.y()[i] - 0.5) * m[i]
                    - jj_coefficient(e) * (second - e * e)
            })
            .sum();

        let entropy: f64 = -state
            .phi
            .iter()
            .map(|&f| xlogx(f) + xlogx(1.0 - f))
            .sum::<f64>();
        prior + h.alpha * lik + entropy
    }

    /// One pass `j = 1..p` of coordinate updates followed by the `η` refresh.
    pub fn sweep(&self, state: &mut VariationalState, h: &HyperParams) {
        for j in 0..self.data.p() {
            self.update_coordinate(j, state, h);
        }
        state.mean = self.expected_predictor(&state.phi);
        state.eta = self.update_eta(&state.phi);
        state.sweep += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Entropy change fell to epsilon or below.
    Converged,
    MaxIter,
}

/// Output of [`run_cavi`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaviResult {
    pub phi: Vec<f64>,
    pub omega: Vec<f64>,
    /// Coordinates with `φ̂_j >= threshold`.
    pub selected: Configuration,
    /// Surrogate value at the initial state and after each sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub stopped_reason: StopReason,
    /// `max_j |H(φ_j^(t)) - H(φ_j^(t-1))|` of the last sweep.
    pub last_entropy_change: f64,
}

impl CaviResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cavi result serializes")
    }
}

/// Runs the coordinate-ascent loop from `cfg.phi_init` and returns `φ̂`.
pub fn run_cavi(d: &Dataset, beta_tilde: &[f64], cfg: &CaviConfig, h: &HyperParams) -> Result<CaviResult> {
    run_cavi_with_offset(d, beta_tilde, 0.0, cfg, h)
}

pub fn run_cavi_with_offset(
    d: &Dataset,
    beta_tilde: &[f64],
    offset: f64,
    cfg: &CaviConfig,
    h: &HyperParams,
) -> Result<CaviResult> {
    h.validate()?;
    cfg.validate(d.p())?;
    if let Some(j) = beta_tilde.iter().position(|&b| b == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta_tilde has an exact zero at coordinate {j}; jitter it first"
        )));
    }
    let problem = CaviProblem::new(d, beta_tilde)?.with_offset(offset);
    let phi0 = cfg
        .phi_init
        .clone()
        .unwrap_or_else(|| vec![0.5; d.p()]);
    let mut state = problem.init_state(phi0)?;
    let mut trace = vec![problem.surrogate_objective(&state, h)];

    let mut reason = StopReason::MaxIter;
    let mut change = f64::INFINITY;
    while state.sweep < cfg.max_iter {
        let before: Vec<f64> = state.phi.iter().map(|&f| binary_entropy_bits(f)).collect();
        problem.sweep(&mut state, h);
        let value = problem.surrogate_objective(&state, h);
        trace.push(value);
        if !value.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "surrogate objective became non-finite at sweep {}; trace {:?}",
                state.sweep, trace
            )));
        }
        change = state
            .phi
            .iter()
            .zip(&before)
            .map(|(&f, &hb)| (binary_entropy_bits(f) - hb).abs())
            .fold(0.0, f64::max);
        if change <= cfg.epsilon {
            reason = StopReason::Converged;
            break;
        }
    }

    let selected = select(&state.phi, cfg.threshold);
    Ok(CaviResult {
        phi: state.phi,
        omega: state.omega,
        selected,
        objective_trace: trace,
        sweeps: state.sweep,
        stopped_reason: reason,
        last_entropy_change: change,
    })
}

fn select(phi: &[f64], threshold: f64) -> Configuration {
    Configuration::from_indicator(&phi.iter().map(|&f| f >= threshold).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitStatus {
    Fitted,
    EmptyModel,
    TooLarge,
    Separated,
    Failed,
}

/// Selected support and, when available, its MLE refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub support: Configuration,
    pub status: RefitStatus,
    /// Refit coefficients in support order, intercept first when present.
    pub coefficients: Option<Vec<f64>>,
}

/// `Ŝ = {j : φ̂_j >= threshold}` followed by an unpenalized refit on `Ŝ`.
pub fn select_and_refit(phi_hat: &[f64], d: &Dataset, threshold: f64) -> Result<Selection> {
    if phi_hat.len() != d.p() {
        return Err(Error::DimensionMismatch(format!(
            "phi has {} entries for p = {}",
            phi_hat.len(),
            d.p()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let support = select(phi_hat, threshold);
    let (status, coefficients) = if support.is_empty() {
        (RefitStatus::EmptyModel, None)
    } else if support.len() >= d.n() {
        (RefitStatus::TooLarge, None)
    } else {
        match fit_mle(d, &support, &NewtonControl::default()) {
            Ok(fit) if fit.separation => (RefitStatus::Separated, None),
            Ok(fit) => (RefitStatus::Fitted, Some(fit.beta_hat.iter().copied().collect())),
            Err(_) => (RefitStatus::Failed, None),
        }
    };
    Ok(Selection {
        support,
        status,
        coefficients,
    })
}
