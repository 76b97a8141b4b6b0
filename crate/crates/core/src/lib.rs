//! Empirical-Bayes variable selection for high-dimensional logistic regression.
//!
//! The marginal posterior over model configurations is a Laplace-approximated
//! empirical-Bayes posterior ([`posterior`]). It is approximated by an
//! independent-Bernoulli variational family fitted with coordinate ascent
//! ([`cavi`]), sampled with Metropolis-Hastings as a baseline ([`mcmc`]), and
//! enumerated exactly for small problems ([`posterior::enumerate_posterior`]).

pub mod cavi;
pub mod config;
pub mod dataset;
pub mod error;
pub mod glm;
pub mod math;
pub mod mcmc;
pub mod metrics;
pub mod pilot;
pub mod posterior;

pub use config::Configuration;
pub use dataset::{Dataset, DesignKind, SimScenario, Signal};
pub use error::{Error, Result};
pub use posterior::HyperParams;

/// The seedable generator every stochastic operation takes explicitly.
pub type SimRng = rand_chacha::ChaCha8Rng;
