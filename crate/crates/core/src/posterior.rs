//! Empirical prior over configurations and the Laplace-approximated marginal
//! posterior `pi^n(S) ∝ pi_n(S) (1 + αγ)^{-|S|/2} L_n(S, β̂_S)^α`.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use lru::LruCache;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_mle, NewtonControl};
use crate::math::{binomial_u128, ln_binomial, log_sum_exp};

/// Prior and fractional-likelihood hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// Complexity-prior exponent.
    pub a: f64,
    /// Spread of the conditional Gaussian prior around the MLE.
    pub gamma: f64,
    /// Likelihood discount.
    pub alpha: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            a: 0.01,
            gamma: 0.1,
            alpha: 0.99,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidArgument(format!("a must be > 0, got {}", self.a)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// `log(1 + αγ)`, the per-coordinate Laplace volume term.
    pub fn log_volume(&self) -> f64 {
        (self.alpha * self.gamma).ln_1p()
    }
}

/// Unnormalized log complexity prior: `-log C(p, |S|) - a |S| log p`.
pub fn log_prior_config(size: usize, p: usize, a: f64) -> f64 {
    assert!(size <= p, "configuration larger than p");
    -ln_binomial(p, size) - a * size as f64 * (p as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CachedFit {
    loglik: f64,
    separation: bool,
}

/// Bounded LRU memo of per-configuration MLE fits, safe to share across threads.
pub struct FitCache {
    inner: Mutex<LruCache<Configuration, CachedFit>>,
    fits: AtomicUsize,
    hits: AtomicUsize,
    separations: AtomicUsize,
}

impl FitCache {
    pub const DEFAULT_CAPACITY: usize = 100_000;

    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("nonzero");
        FitCache {
            inner: Mutex::new(LruCache::new(cap)),
            fits: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
            separations: AtomicUsize::new(0),
        }
    }

    /// Number of MLE fits actually computed.
    pub fn fits_computed(&self) -> usize {
        self.fits.load(Ordering::Relaxed)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Fits that needed the separation safeguard.
    pub fn separation_count(&self) -> usize {
        self.separations.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("fit cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_fit(&self, d: &Dataset, s: &Configuration, ctl: &NewtonControl) -> Result<CachedFit> {
        if let Some(hit) = self.inner.lock().expect("fit cache poisoned").get(s).copied() {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        // fit outside the lock; a racing duplicate fit yields the same value
        let fit = fit_mle(d, s, ctl)?;
        let entry = CachedFit {
            loglik: fit.loglik_at_mle,
            separation: fit.separation,
        };
        self.fits.fetch_add(1, Ordering::Relaxed);
        if fit.separation {
            self.separations.fetch_add(1, Ordering::Relaxed);
            log::debug!("separation safeguard engaged for configuration {s}");
        }
        self.inner
            .lock()
            .expect("fit cache poisoned")
            .put(s.clone(), entry);
        Ok(entry)
    }
}

impl Default for FitCache {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}

impl std::fmt::Debug for FitCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FitCache")
            .field("fits", &self.fits_computed())
            .field("hits", &self.hits())
            .finish()
    }
}

/// `log pi~^n(S) = log pi_n(S) - (|S|/2) log(1+αγ) + α ℓ_n(S, β̂_S)`.
pub fn log_marginal_unnorm(
    d: &Dataset,
    s: &Configuration,
    h: &HyperParams,
    cache: &FitCache,
) -> Result<f64> {
    log_marginal_unnorm_with(d, s, h, cache, &NewtonControl::default())
}

pub fn log_marginal_unnorm_with(
    d: &Dataset,
    s: &Configuration,
    h: &HyperParams,
    cache: &FitCache,
    ctl: &NewtonControl,
) -> Result<f64> {
    s.check_bounds(d.p())?;
    if s.len() >= d.n() {
        return Err(Error::ModelTooLarge {
            size: s.len(),
            n: d.n(),
        });
    }
    let fit = cache.get_or_fit(d, s, ctl)?;
    let k = s.len() as f64;
    Ok(log_prior_config(s.len(), d.p(), h.a) - 0.5 * k * h.log_volume() + h.alpha * fit.loglik)
}

/// The Laplace posterior of one dataset, bundled with its fit cache.
#[derive(Debug)]
pub struct LaplacePosterior<'d> {
    data: &'d Dataset,
    hyper: HyperParams,
    ctl: NewtonControl,
    cache: FitCache,
}

impl<'d> LaplacePosterior<'d> {
    pub fn new(data: &'d Dataset, hyper: HyperParams) -> Result<Self> {
        hyper.validate()?;
        Ok(LaplacePosterior {
            data,
            hyper,
            ctl: NewtonControl::default(),
            cache: FitCache::default(),
        })
    }

    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.cache = FitCache::new(capacity);
        self
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn cache(&self) -> &FitCache {
        &self.cache
    }

    pub fn log_marginal(&self, s: &Configuration) -> Result<f64> {
        log_marginal_unnorm_with(self.data, s, &self.hyper, &self.cache, &self.ctl)
    }
}

/// One configuration's normalized posterior probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub indices: Configuration,
    pub prob: f64,
}

/// Exact posterior over all configurations up to a size cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub entries: Vec<PosteriorEntry>,
    pub log_norm_const: f64,
    pub inclusion: Vec<f64>,
}

impl PosteriorTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("posterior table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("posterior table: {e}")))
    }

    /// The highest-probability configuration.
    pub fn mode(&self) -> &PosteriorEntry {
        self.entries
            .iter()
            .max_by(|a, b| a.prob.total_cmp(&b.prob))
            .expect("posterior table is never empty")
    }

    pub fn prob_of(&self, s: &Configuration) -> f64 {
        self.entries
            .iter()
            .find(|e| &e.indices == s)
            .map_or(0.0, |e| e.prob)
    }
}

/// Largest number of configurations [`enumerate_posterior`] will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Every configuration of size at most `smax` over `p` coordinates, by size then lexicographically.
pub fn configurations_up_to(p: usize, smax: usize) -> impl Iterator<Item = Configuration> {
    (0..=smax.min(p)).flat_map(move |k| Combinations::new(p, k))
}

struct Combinations {
    p: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(p: usize, k: usize) -> Self {
        Combinations {
            p,
            current: (k <= p).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        let cur = self.current.take()?;
        let out = Configuration::new(cur.clone()).expect("combination is sorted");
        let k = cur.len();
        let mut next = cur;
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.p - k + i {
                next[i] += 1;
                for t in (i + 1)..k {
                    next[t] = next[t - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Exact normalized posterior over configurations with `|S| <= smax`.
///
/// Configurations whose fit fails numerically get probability zero.
pub fn enumerate_posterior(d: &Dataset, h: &HyperParams, smax: usize) -> Result<PosteriorTable> {
    h.validate()?;
    let p = d.p();
    let smax = smax.min(p);
    if smax >= d.n() {
        return Err(Error::ModelTooLarge { size: smax, n: d.n() });
    }
    let count = (0..=smax).fold(0u128, |acc, k| acc.saturating_add(binomial_u128(p, k)));
    if count > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }

    let cache = FitCache::new(1);
    let mut configs = Vec::with_capacity(count as usize);
    let mut logs = Vec::with_capacity(count as usize);
    for s in configurations_up_to(p, smax) {
        let lp = match log_marginal_unnorm(d, &s, h, &cache) {
            Ok(v) => v,
            Err(Error::NumericalFailure(msg)) => {
                log::warn!("treating {s} as posterior-zero: {msg}");
                f64::NEG_INFINITY
            }
            Err(e) => return Err(e),
        };
        configs.push(s);
        logs.push(lp);
    }

    let log_norm_const = log_sum_exp(&logs);
    if !log_norm_const.is_finite() {
        return Err(Error::NumericalFailure(
            "posterior normalizing constant is not finite".into(),
        ));
    }
    let mut inclusion = vec![0.0; p];
    let entries = configs
        .into_iter()
        .zip(logs)
        .map(|(s, lp)| {
            let prob = (lp - log_norm_const).exp();
            for &j in s.indices() {
                inclusion[j] += prob;
            }
            PosteriorEntry { indices: s, prob }
        })
        .collect();
    Ok(PosteriorTable {
        entries,
        log_norm_const,
        inclusion,
    })
}
