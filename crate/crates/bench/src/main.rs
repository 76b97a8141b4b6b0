use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;

use ebvi::cavi::{run_cavi_with_offset, select_and_refit};
use ebvi::dataset::simulate;
use ebvi::mcmc::mh_run;
use ebvi::pilot::{default_lambda_grid, fit_l1_logistic_with, jitter_zeros, parse_beta_tilde, PilotEstimate};
use ebvi::posterior::enumerate_posterior;
use ebvi::{Dataset, Error, Result, SimRng};
use ebvi_bench::experiment::{compare_runs, run_experiment, Method, ScenarioRef};
use ebvi_bench::output::{render, Format};
use ebvi_bench::Settings;

#[derive(Parser)]
#[command(name = "ebvi-bench", version, about = "Empirical-Bayes variational variable selection for logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit EB-VI to a CSV dataset
    Fit(Flags),
    /// Run the EB-MCMC sampler on a CSV dataset or a simulated scenario
    Mcmc(Flags),
    /// Write one simulated dataset as CSV
    Simulate(Flags),
    /// Replicated comparison of methods on a scenario
    Compare(Flags),
    /// Exact posterior over all small configurations
    Enumerate(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// JSON file with default values for any of these flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (test1..test5, table2-*, dtable-*)
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    smax: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<Format>,
    /// Whitespace- or comma-separated plug-in coefficients, one per covariate
    #[arg(long)]
    beta_tilde: Option<PathBuf>,
    /// CSV file with a header row
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the 0/1 response column
    #[arg(long)]
    response: Option<String>,
    /// Add an unpenalized intercept to the fitted model
    #[arg(long)]
    intercept: bool,
    /// Comma-separated subset of ebvi, ebmcmc, pilot
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    jitter_scale: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Record zero wall times so output is reproducible byte for byte
    #[arg(long)]
    no_timing: bool,
}

impl Flags {
    fn settings(self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let flags = Settings {
            scenario: self.scenario.map(ScenarioRef::Named),
            reps: self.reps,
            seed: self.seed,
            a: self.a,
            gamma: self.gamma,
            alpha: self.alpha,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            threshold: self.threshold,
            samples: self.samples,
            burn_in: self.burn_in,
            smax: self.smax,
            workers: self.workers,
            out: self.out,
            format: self.format,
            beta_tilde: self.beta_tilde,
            data: self.data,
            response: self.response,
            intercept: self.intercept.then_some(true),
            methods: self.methods,
            jitter_scale: self.jitter_scale,
            folds: self.folds,
            timing: self.no_timing.then_some(false),
        };
        Ok(file.overlay(flags))
    }
}

fn write_output(s: &Settings, text: &str) -> Result<()> {
    match &s.out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_data(s: &Settings) -> Result<Dataset> {
    let path = s
        .data
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--data is required".into()))?;
    let d = Dataset::load_csv(path, s.response.as_deref().unwrap_or("y"))?;
    Ok(d.with_intercept(s.intercept.unwrap_or(false)))
}

/// `--data` when given, otherwise one simulated replication of `--scenario`.
fn data_or_scenario(s: &Settings) -> Result<Dataset> {
    if s.data.is_some() {
        return load_data(s);
    }
    let scenario = s
        .scenario
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("either --data or --scenario is required".into()))?;
    let (_, mut sc) = scenario.resolve()?;
    sc.seed = s.seed();
    Ok(simulate(&sc, &mut sc.rng())?.data)
}

fn cmd_fit(s: &Settings) -> Result<()> {
    let d = load_data(s)?;
    let mut rng = SimRng::seed_from_u64(s.seed());
    let pilot = match &s.beta_tilde {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let beta = parse_beta_tilde(&text)?;
            if beta.len() != d.p() {
                return Err(Error::DimensionMismatch(format!(
                    "{} coefficients for {} covariates",
                    beta.len(),
                    d.p()
                )));
            }
            PilotEstimate::external(beta)
        }
        None => {
            let ctl = s.pilot();
            let grid = default_lambda_grid(&d, ctl.n_lambda, ctl.lambda_min_ratio);
            fit_l1_logistic_with(&d, &grid, ctl.folds, &mut rng, &ctl)?
        }
    };
    let jittered = jitter_zeros(&pilot, s.pilot().jitter_scale, &mut rng)?;
    let cfg = s.cavi();
    let result = run_cavi_with_offset(&d, &jittered.beta_tilde, jittered.intercept, &cfg, &s.hyper())?;
    let selection = select_and_refit(&result.phi, &d, cfg.threshold)?;
    let names: Vec<&str> = selection.support.indices().iter().map(|&j| d.names()[j].as_str()).collect();
    let report = serde_json::json!({
        "pilot": {
            "lambda_used": pilot.lambda_used,
            "jitter_applied": jittered.jitter_applied,
            "support": pilot.support,
            "intercept": pilot.intercept,
        },
        "cavi": result,
        "selection": selection,
        "selected_names": names,
    });
    write_output(s, &to_json(&report))
}

fn cmd_mcmc(s: &Settings) -> Result<()> {
    let d = data_or_scenario(s)?;
    let cfg = s.chain();
    let chain = mh_run(&d, &s.hyper(), &cfg, &mut cfg.rng())?;
    write_output(s, &to_json(&chain))
}

fn cmd_simulate(s: &Settings) -> Result<()> {
    if s.data.is_some() {
        return Err(Error::InvalidArgument("simulate takes --scenario, not --data".into()));
    }
    let d = data_or_scenario(s)?;
    write_output(s, &d.to_csv_string(s.response.as_deref().unwrap_or("y")))
}

fn cmd_compare(s: &Settings) -> Result<()> {
    let spec = s.experiment(&Method::ALL)?;
    let result = run_experiment(&spec)?;
    if result.methods.contains(&Method::Ebvi) && result.methods.contains(&Method::Ebmcmc) {
        let cmp = compare_runs(result.clone())?;
        eprintln!("D = {} over {} replications", cmp.d, cmp.replications_used.len());
    }
    write_output(s, &render(&[result], s.format.unwrap_or(Format::Csv)))
}

fn cmd_enumerate(s: &Settings) -> Result<()> {
    let d = data_or_scenario(s)?;
    let smax = s.smax.unwrap_or_else(|| d.p().min(d.n().saturating_sub(1)));
    let table = enumerate_posterior(&d, &s.hyper(), smax)?;
    write_output(s, &table.to_json())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (run, flags): (fn(&Settings) -> Result<()>, Flags) = match cli.command {
        Command::Fit(f) => (cmd_fit, f),
        Command::Mcmc(f) => (cmd_mcmc, f),
        Command::Simulate(f) => (cmd_simulate, f),
        Command::Compare(f) => (cmd_compare, f),
        Command::Enumerate(f) => (cmd_enumerate, f),
    };
    match flags.settings().and_then(|s| run(&s)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
