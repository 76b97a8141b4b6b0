//! Replicated simulation experiments.

use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ebvi::cavi::{run_cavi, CaviConfig};
use ebvi::dataset::{simulate, Simulated};
use ebvi::mcmc::{mh_run_on, ChainConfig};
use ebvi::metrics::{confusion, d_distance, ConfusionCounts, Rates};
use ebvi::pilot::{default_lambda_grid, fit_l1_logistic_with, jitter_zeros, PilotControl, PilotEstimate};
use ebvi::posterior::LaplacePosterior;
use ebvi::{Configuration, Error, HyperParams, Result, SimRng, SimScenario};

use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ebvi,
    Ebmcmc,
    Pilot,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ebvi, Method::Ebmcmc, Method::Pilot];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ebvi => "ebvi",
            Method::Ebmcmc => "ebmcmc",
            Method::Pilot => "pilot",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ebvi" => Ok(Method::Ebvi),
            "ebmcmc" | "mcmc" => Ok(Method::Ebmcmc),
            "pilot" => Ok(Method::Pilot),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// A preset name or an explicit scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Named(String),
    Inline(SimScenario),
}

impl ScenarioRef {
    pub fn resolve(&self) -> Result<(String, SimScenario)> {
        match self {
            ScenarioRef::Named(name) => presets::preset(name)
                .map(|s| (name.clone(), s))
                .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario `{name}`"))),
            ScenarioRef::Inline(s) => {
                s.validate()?;
                let id = format!("custom-{}-{}-{}", s.n, s.p, s.s);
                Ok((id, *s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioRef,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default)]
    pub cavi: CaviConfig,
    /// `seed` is ignored here; chains are seeded per replication.
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub pilot: PilotControl,
    /// `None` uses every available core.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Record wall-clock times; off makes the output a pure function of the spec.
    #[serde(default = "yes")]
    pub timing: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioRef, methods: Vec<Method>, replications: usize, seed: u64) -> Self {
        ExperimentSpec {
            scenario,
            methods,
            replications,
            seed,
            hyper: HyperParams::default(),
            cavi: CaviConfig::default(),
            chain: ChainConfig::default(),
            pilot: PilotControl::default(),
            workers: None,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("at least one method is required".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        let (_, sc) = self.scenario.resolve()?;
        self.hyper.validate()?;
        self.cavi.validate(sc.p)?;
        if self.methods.contains(&Method::Ebmcmc) {
            self.chain.validate(sc.n)?;
        }
        Ok(())
    }

    fn methods_sorted(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

/// `hash(master seed, scenario id, replication index)`, first 8 bytes of SHA-256.
pub fn replication_seed(master: u64, scenario_id: &str, replication: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((scenario_id.len() as u64).to_le_bytes());
    h.update(scenario_id.as_bytes());
    h.update((replication as u64).to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Independent stream for one stage of a replication.
pub fn stage_seed(replication_seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(replication_seed.to_le_bytes());
    h.update(stage.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    /// φ̂ for EB-VI, inclusion probabilities for EB-MCMC, absent for the pilot.
    pub scores: Option<Vec<f64>>,
    pub selected: Configuration,
    pub confusion: ConfusionCounts,
    pub rates: Rates,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub outcome: Option<MethodOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub method: Method,
    /// Replications that produced an outcome.
    pub rep_count: usize,
    pub tpr_mean: Option<f64>,
    pub tpr_sd: Option<f64>,
    pub fdr_mean: Option<f64>,
    pub fdr_sd: Option<f64>,
    pub tnr_mean: Option<f64>,
    pub tnr_sd: Option<f64>,
    pub mcc_mean: Option<f64>,
    pub mcc_sd: Option<f64>,
    pub time_mean_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario_id: String,
    pub scenario: SimScenario,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    pub records: Vec<ReplicationRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("run result: {e}")))
    }

    pub fn outcomes(&self, method: Method) -> impl Iterator<Item = (usize, &MethodOutcome)> {
        self.records
            .iter()
            .filter(move |r| r.method == method)
            .filter_map(|r| r.outcome.as_ref().map(|o| (r.replication, o)))
    }

    pub fn aggregate(&self, method: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

/// Mean and sample standard deviation (0 for a single value); `None` when empty.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(sd))
}

/// Per-method summaries of `records`, in method order.
pub fn aggregate(scenario_id: &str, methods: &[Method], records: &[ReplicationRecord]) -> Vec<Aggregate> {
    methods
        .iter()
        .map(|&m| {
            let outs: Vec<&MethodOutcome> = records
                .iter()
                .filter(|r| r.method == m)
                .filter_map(|r| r.outcome.as_ref())
                .collect();
            let col = |f: &dyn Fn(&MethodOutcome) -> Option<f64>| -> Vec<f64> { outs.iter().filter_map(|o| f(o)).collect() };
            let (tpr_mean, tpr_sd) = mean_sd(&col(&|o| o.rates.tpr));
            let (fdr_mean, fdr_sd) = mean_sd(&col(&|o| Some(o.rates.fdr)));
            let (tnr_mean, tnr_sd) = mean_sd(&col(&|o| o.rates.tnr));
            let (mcc_mean, mcc_sd) = mean_sd(&col(&|o| Some(o.rates.mcc)));
            let (time_mean_s, _) = mean_sd(&col(&|o| Some(o.wall_time_s)));
            Aggregate {
                scenario: scenario_id.to_string(),
                method: m,
                rep_count: outs.len(),
                tpr_mean,
                tpr_sd,
                fdr_mean,
                fdr_sd,
                tnr_mean,
                tnr_sd,
                mcc_mean,
                mcc_sd,
                time_mean_s,
            }
        })
        .collect()
}

/// Simulated data for replication `replication` of a spec.
pub fn replication_data(scenario_id: &str, scenario: &SimScenario, master: u64, replication: usize) -> Result<(u64, Simulated)> {
    let seed = replication_seed(master, scenario_id, replication);
    let mut rng = SimRng::seed_from_u64(stage_seed(seed, "data"));
    Ok((seed, simulate(scenario, &mut rng)?))
}

/// Cross-validated L1 pilot on the default grid.
pub fn fit_pilot(sim: &Simulated, ctl: &PilotControl, seed: u64) -> Result<PilotEstimate> {
    let mut rng = SimRng::seed_from_u64(seed);
    let grid = default_lambda_grid(&sim.data, ctl.n_lambda, ctl.lambda_min_ratio);
    fit_l1_logistic_with(&sim.data, &grid, ctl.folds, &mut rng, ctl)
}

fn outcome(
    scores: Option<Vec<f64>>,
    selected: Configuration,
    truth: &Configuration,
    p: usize,
    secs: f64,
) -> MethodOutcome {
    let c = confusion(&selected, truth, p);
    MethodOutcome {
        scores,
        selected,
        rates: Rates::from(&c),
        confusion: c,
        wall_time_s: secs,
    }
}

fn failed(replication: usize, seed: u64, method: Method, e: &Error) -> ReplicationRecord {
    ReplicationRecord {
        replication,
        seed,
        method,
        outcome: None,
        error: Some(e.to_string()),
    }
}

/// One replication: data, pilot, then each method in order.
fn run_replication(spec: &ExperimentSpec, id: &str, sc: &SimScenario, methods: &[Method], r: usize) -> Vec<ReplicationRecord> {
    let clock = |t: Instant| if spec.timing { t.elapsed().as_secs_f64() } else { 0.0 };
    let (seed, sim) = match replication_data(id, sc, spec.seed, r) {
        Ok(v) => v,
        Err(e) => {
            let seed = replication_seed(spec.seed, id, r);
            return methods.iter().map(|&m| failed(r, seed, m, &e)).collect();
        }
    };
    let p = sc.p;

    let needs_pilot = methods.iter().any(|m| matches!(m, Method::Ebvi | Method::Pilot));
    let t0 = Instant::now();
    let pilot = needs_pilot.then(|| fit_pilot(&sim, &spec.pilot, stage_seed(seed, "pilot")));
    let pilot_secs = clock(t0);

    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let rec = match m {
            Method::Pilot => match pilot.as_ref().expect("pilot requested") {
                Ok(est) => Ok(outcome(None, est.support.clone(), &sim.support, p, pilot_secs)),
                Err(e) => Err(e.to_string()),
            },
            Method::Ebvi => match pilot.as_ref().expect("pilot requested") {
                Ok(est) => {
                    let t = Instant::now();
                    let mut rng = SimRng::seed_from_u64(stage_seed(seed, "jitter"));
                    jitter_zeros(est, spec.pilot.jitter_scale, &mut rng)
                        .and_then(|j| run_cavi(&sim.data, &j.beta_tilde, &spec.cavi, &spec.hyper))
                        .map(|res| outcome(Some(res.phi), res.selected, &sim.support, p, pilot_secs + clock(t)))
                        .map_err(|e| e.to_string())
                }
                Err(e) => Err(e.to_string()),
            },
            Method::Ebmcmc => {
                let t = Instant::now();
                let mut rng = SimRng::seed_from_u64(stage_seed(seed, "chain"));
                LaplacePosterior::new(&sim.data, spec.hyper)
                    .and_then(|post| mh_run_on(&post, &spec.chain, &mut rng))
                    .map(|chain| {
                        let sel = Configuration::from_indicator(
                            &chain.inclusion.iter().map(|&v| v >= spec.cavi.threshold).collect::<Vec<_>>(),
                        );
                        outcome(Some(chain.inclusion), sel, &sim.support, p, clock(t))
                    })
                    .map_err(|e| e.to_string())
            }
        };
        out.push(match rec {
            Ok(o) => ReplicationRecord {
                replication: r,
                seed,
                method: m,
                outcome: Some(o),
                error: None,
            },
            Err(msg) => {
                log::warn!("replication {r}, {}: {msg}", m.name());
                ReplicationRecord {
                    replication: r,
                    seed,
                    method: m,
                    outcome: None,
                    error: Some(msg),
                }
            }
        });
    }
    out
}

/// Runs every replication of `spec`, distributed over `spec.workers` threads.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunResult> {
    spec.validate()?;
    let (id, sc) = spec.scenario.resolve()?;
    let methods = spec.methods_sorted();
    let workers = spec
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let per_rep: Vec<Vec<ReplicationRecord>> = pool.install(|| {
        (0..spec.replications)
            .into_par_iter()
            .map(|r| run_replication(spec, &id, &sc, &methods, r))
            .collect()
    });
    let records: Vec<ReplicationRecord> = per_rep.into_iter().flatten().collect();
    let aggregates = aggregate(&id, &methods, &records);
    Ok(RunResult {
        scenario_id: id,
        scenario: sc,
        methods,
        replications: spec.replications,
        seed: spec.seed,
        records,
        aggregates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub d: f64,
    /// Replications where both methods succeeded.
    pub replications_used: Vec<usize>,
    pub phi_runs: Vec<Vec<f64>>,
    pub pi_runs: Vec<Vec<f64>>,
    pub result: RunResult,
}

/// D between CAVI's φ̂ and MCMC inclusion probabilities over paired replications.
pub fn compare_runs(result: RunResult) -> Result<Comparison> {
    let mut phi_runs = Vec::new();
    let mut pi_runs = Vec::new();
    let mut used = Vec::new();
    for r in 0..result.replications {
        let get = |m: Method| {
            result
                .records
                .iter()
                .find(|x| x.replication == r && x.method == m)
                .and_then(|x| x.outcome.as_ref())
                .and_then(|o| o.scores.clone())
        };
        if let (Some(phi), Some(pi)) = (get(Method::Ebvi), get(Method::Ebmcmc)) {
            phi_runs.push(phi);
            pi_runs.push(pi);
            used.push(r);
        }
    }
    if used.is_empty() {
        return Err(Error::NumericalFailure("no replication produced both EB-VI and EB-MCMC output".into()));
    }
    Ok(Comparison {
        d: d_distance(&phi_runs, &pi_runs)?,
        replications_used: used,
        phi_runs,
        pi_runs,
        result,
    })
}

/// Runs EB-VI and EB-MCMC on identical data and returns D.
pub fn compare_vi_mcmc(spec: &ExperimentSpec) -> Result<Comparison> {
    if !(spec.methods.contains(&Method::Ebvi) && spec.methods.contains(&Method::Ebmcmc)) {
        return Err(Error::InvalidArgument("comparison needs both ebvi and ebmcmc".into()));
    }
    compare_runs(run_experiment(spec)?)
}
