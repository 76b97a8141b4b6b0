//! Scenario presets, replicated experiments, and result emission for `ebvi`.

pub mod experiment;
pub mod output;
pub mod presets;
pub mod settings;

pub use experiment::{compare_vi_mcmc, run_experiment, ExperimentSpec, Method, RunResult, ScenarioRef};
pub use output::{emit, Format};
pub use settings::Settings;
