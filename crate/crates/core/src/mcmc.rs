//! Metropolis–Hastings over configurations with single-coordinate-flip proposals.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::posterior::{HyperParams, LaplacePosterior};
use crate::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Total iterations M, burn-in included.
    pub samples: usize,
    /// Defaults to `samples / 5`.
    pub burn_in: Option<usize>,
    /// Defaults to `min(n / 2, 50)`.
    pub smax: Option<usize>,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            samples: 10_000,
            burn_in: None,
            smax: None,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.samples / 5)
    }

    pub fn smax(&self, n: usize) -> usize {
        self.smax.unwrap_or((n / 2).min(50))
    }

    pub fn rng(&self) -> SimRng {
        SimRng::seed_from_u64(self.seed)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be positive".into()));
        }
        if self.burn_in() >= self.samples {
            return Err(Error::InvalidArgument(format!(
                "burn_in ({}) must be smaller than samples ({})",
                self.burn_in(),
                self.samples
            )));
        }
        if self.smax(n) >= n {
            return Err(Error::InvalidArgument(format!(
                "smax ({}) must be smaller than n ({n})",
                self.smax(n)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub inclusion: Vec<f64>,
    pub accept_rate: f64,
    pub visited: usize,
    pub map_config: Configuration,
    /// MLE fits computed by the posterior cache during the run (0 for non-cached targets).
    #[serde(default)]
    pub fits_computed: usize,
}

impl ChainResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("chain result: {e}")))
    }
}

/// An unnormalized log target over configurations of `p` coordinates.
pub trait LogTarget {
    fn p(&self) -> usize;
    fn log_target(&self, s: &Configuration) -> Result<f64>;

    fn fits_computed(&self) -> usize {
        0
    }
}

impl LogTarget for LaplacePosterior<'_> {
    fn p(&self) -> usize {
        self.data().p()
    }

    fn log_target(&self, s: &Configuration) -> Result<f64> {
        self.log_marginal(s)
    }

    fn fits_computed(&self) -> usize {
        self.cache().fits_computed()
    }
}

/// Runs the sampler on the Laplace posterior of `d`.
pub fn mh_run<R: Rng + ?Sized>(d: &Dataset, h: &HyperParams, cfg: &ChainConfig, rng: &mut R) -> Result<ChainResult> {
    cfg.validate(d.n())?;
    let post = LaplacePosterior::new(d, *h)?;
    mh_run_target(&post, cfg.samples, cfg.burn_in(), cfg.smax(d.n()), rng)
}

/// Runs the sampler on an existing posterior, reusing its fit cache.
pub fn mh_run_on<R: Rng + ?Sized>(post: &LaplacePosterior<'_>, cfg: &ChainConfig, rng: &mut R) -> Result<ChainResult> {
    let n = post.data().n();
    cfg.validate(n)?;
    mh_run_target(post, cfg.samples, cfg.burn_in(), cfg.smax(n), rng)
}

fn log_target_or_reject<T: LogTarget + ?Sized>(target: &T, s: &Configuration) -> Result<f64> {
    match target.log_target(s) {
        Ok(v) if v.is_nan() => Ok(f64::NEG_INFINITY),
        Ok(v) => Ok(v),
        Err(Error::NumericalFailure(msg)) => {
            log::debug!("rejecting {s}: {msg}");
            Ok(f64::NEG_INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// Generic sampler: `samples` total iterations, the first `burn_in` discarded.
pub fn mh_run_target<T: LogTarget + ?Sized, R: Rng + ?Sized>(
    target: &T,
    samples: usize,
    burn_in: usize,
    smax: usize,
    rng: &mut R,
) -> Result<ChainResult> {
    if burn_in >= samples {
        return Err(Error::InvalidArgument("burn_in must be smaller than samples".into()));
    }
    let p = target.p();
    if p == 0 {
        return Err(Error::InvalidArgument("target has no coordinates".into()));
    }
    let fits_before = target.fits_computed();

    let mut state = Configuration::empty();
    let mut current = log_target_or_reject(target, &state)?;
    let mut best = (current, state.clone());
    let mut visited = HashSet::new();
    visited.insert(state.clone());

    let mut counts = vec![0u64; p];
    let mut accepted = 0usize;
    for it in 0..samples {
        let j = rng.random_range(0..p);
        let proposal = state.flipped(j);
        // the uniform draw is consumed on every step so the stream does not depend on the cap
        let u: f64 = rng.random();
        if proposal.len() <= smax {
            let lp = log_target_or_reject(target, &proposal)?;
            if lp > f64::NEG_INFINITY && (lp >= current || u.ln() < lp - current) {
                state = proposal;
                current = lp;
                accepted += 1;
                if current > best.0 {
                    best = (current, state.clone());
                }
                visited.insert(state.clone());
            }
        }
        if it >= burn_in {
            for &k in state.indices() {
                counts[k] += 1;
            }
        }
    }

    let kept = (samples - burn_in) as f64;
    Ok(ChainResult {
        inclusion: counts.iter().map(|&c| c as f64 / kept).collect(),
        accept_rate: accepted as f64 / samples as f64,
        visited: visited.len(),
        map_config: best.1,
        fits_computed: target.fits_computed() - fits_before,
    })
}

/// Coordinate-wise mean of the binary state vectors.
pub fn inclusion_from_chain(states: &[Configuration], p: usize) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("empty chain".into()));
    }
    let mut counts = vec![0usize; p];
    for s in states {
        s.check_bounds(p)?;
        for &k in s.indices() {
            counts[k] += 1;
        }
    }
    let m = states.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / m).collect())
}
