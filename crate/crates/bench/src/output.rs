//! CSV and JSON emission of experiment results.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ebvi::{Error, Result};

use crate::experiment::RunResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "method",
    "rep_count",
    "tpr_mean",
    "tpr_sd",
    "fdr_mean",
    "fdr_sd",
    "tnr_mean",
    "tnr_sd",
    "mcc_mean",
    "mcc_sd",
    "time_mean_s",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per scenario and method.
pub fn to_csv_string(results: &[RunResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in results {
        for a in &r.aggregates {
            w.write_record([
                a.scenario.clone(),
                a.method.name().to_string(),
                a.rep_count.to_string(),
                cell(a.tpr_mean),
                cell(a.tpr_sd),
                cell(a.fdr_mean),
                cell(a.fdr_sd),
                cell(a.tnr_mean),
                cell(a.tnr_sd),
                cell(a.mcc_mean),
                cell(a.mcc_sd),
                cell(a.time_mean_s),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn to_json_string(results: &[RunResult]) -> String {
    let mut s = serde_json::to_string_pretty(results).expect("results serialize");
    s.push('\n');
    s
}

pub fn results_from_json(text: &str) -> Result<Vec<RunResult>> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("results: {e}")))
}

pub fn render(results: &[RunResult], format: Format) -> String {
    match format {
        Format::Csv => to_csv_string(results),
        Format::Json => to_json_string(results),
    }
}

pub fn emit(results: &[RunResult], format: Format, path: &Path) -> Result<()> {
    std::fs::write(path, render(results, format)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
