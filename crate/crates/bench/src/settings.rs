//! Run settings shared by the JSON config file and command-line flags.
//!
//! Every field is optional; [`Settings::overlay`] lets flags override a file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use ebvi::cavi::CaviConfig;
use ebvi::mcmc::ChainConfig;
use ebvi::pilot::PilotControl;
use ebvi::{Error, HyperParams, Result};

use crate::experiment::{ExperimentSpec, Method, ScenarioRef};
use crate::output::Format;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub scenario: Option<ScenarioRef>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub threshold: Option<f64>,
    pub samples: Option<usize>,
    pub burn_in: Option<usize>,
    pub smax: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub beta_tilde: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub intercept: Option<bool>,
    pub methods: Option<Vec<Method>>,
    pub jitter_scale: Option<f64>,
    pub folds: Option<usize>,
    pub timing: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay_fields!(base, top; scenario, reps, seed, a, gamma, alpha, epsilon, max_iter,
            threshold, samples, burn_in, smax, workers, out, format, beta_tilde, data, response,
            intercept, methods, jitter_scale, folds, timing)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn hyper(&self) -> HyperParams {
        let d = HyperParams::default();
        HyperParams {
            a: self.a.unwrap_or(d.a),
            gamma: self.gamma.unwrap_or(d.gamma),
            alpha: self.alpha.unwrap_or(d.alpha),
        }
    }

    pub fn cavi(&self) -> CaviConfig {
        let d = CaviConfig::default();
        CaviConfig {
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            phi_init: None,
            threshold: self.threshold.unwrap_or(d.threshold),
        }
    }

    pub fn chain(&self) -> ChainConfig {
        let d = ChainConfig::default();
        ChainConfig {
            samples: self.samples.unwrap_or(d.samples),
            burn_in: self.burn_in,
            smax: self.smax,
            seed: self.seed(),
        }
    }

    pub fn pilot(&self) -> PilotControl {
        let d = PilotControl::default();
        PilotControl {
            folds: self.folds.unwrap_or(d.folds),
            jitter_scale: self.jitter_scale.unwrap_or(d.jitter_scale),
            ..d
        }
    }

    pub fn experiment(&self, default_methods: &[Method]) -> Result<ExperimentSpec> {
        let scenario = self
            .scenario
            .clone()
            .ok_or_else(|| Error::InvalidArgument("a scenario is required".into()))?;
        let spec = ExperimentSpec {
            scenario,
            methods: self.methods.clone().unwrap_or_else(|| default_methods.to_vec()),
            replications: self.reps.unwrap_or(1),
            seed: self.seed(),
            hyper: self.hyper(),
            cavi: self.cavi(),
            chain: self.chain(),
            pilot: self.pilot(),
            workers: self.workers,
            timing: self.timing.unwrap_or(true),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings::from_json(r#"{"reps": 5, "seed": 3, "a": 0.5, "scenario": "test1"}"#).unwrap();
        let flags = Settings {
            reps: Some(7),
            ..Settings::default()
        };
        let s = file.overlay(flags);
        assert_eq!(s.reps, Some(7));
        assert_eq!(s.seed, Some(3));
        assert_eq!(s.hyper().a, 0.5);
        assert_eq!(s.scenario, Some(ScenarioRef::Named("test1".into())));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Settings::from_json(r#"{"repz": 5}"#).is_err());
    }

    #[test]
    fn inline_scenario() {
        let s = Settings::from_json(
            r#"{"scenario": {"n": 50, "p": 20, "s": 2, "signal": {"fixed": 3.0},
                "design": {"iid_gaussian": {"sigma": 1.0}}}, "methods": ["ebvi"]}"#,
        )
        .unwrap();
        let spec = s.experiment(&[Method::Pilot]).unwrap();
        assert_eq!(spec.methods, vec![Method::Ebvi]);
        assert!(matches!(spec.scenario, ScenarioRef::Inline(sc) if sc.p == 20));
    }
}
