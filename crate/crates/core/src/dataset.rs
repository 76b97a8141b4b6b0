//! Data containers, CSV ingestion and synthetic data generation.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::SimRng;

/// A fixed design matrix with a binary response.
///
/// Rows of `x` are observations. `y` holds 0.0 / 1.0. When `intercept` is set,
/// likelihood computations include an always-active constant column that is
/// not part of any [`Configuration`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
    intercept: bool,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset must have n >= 1 and p >= 1, got {n}x{p}"
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        if names.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {p} columns",
                names.len()
            )));
        }
        if let Some((row, v)) = y.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryResponse {
                column: "y".into(),
                value: v.to_string(),
                row: row + 1,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design matrix has non-finite entries".into()));
        }
        Ok(Dataset {
            x,
            y: DVector::from_vec(y),
            names,
            intercept: false,
        })
    }

    /// Same as [`Dataset::new`] with generated column names `x1..xp`.
    pub fn unnamed(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names)
    }

    pub fn with_intercept(mut self, on: bool) -> Self {
        self.intercept = on;
        self
    }

    /// Rescales every non-constant column to unit sample variance. Columns are not centred.
    pub fn standardized(mut self) -> Self {
        let n = self.n();
        if n < 2 {
            return self;
        }
        for mut col in self.x.column_iter_mut() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if var > 0.0 {
                col /= var.sqrt();
            }
        }
        self
    }

    /// The dataset restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("row selection is empty".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n()) {
            return Err(Error::DimensionMismatch(format!("row {bad} out of range")));
        }
        Ok(Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            names: self.names.clone(),
            intercept: self.intercept,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Reads a CSV file with a header row; `response_column` is removed from the design.
    pub fn load_csv(path: impl AsRef<Path>, response_column: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, response_column)
    }

    pub fn from_csv_str(text: &str, response_column: &str) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes(), response_column)
    }

    pub fn from_csv_reader<R: Read>(reader: R, response_column: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let header = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("header: {e}")))?
            .clone();
        if header.is_empty() || header.iter().all(str::is_empty) {
            return Err(Error::Parse("missing header row".into()));
        }
        let matches: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| *h == response_column)
            .map(|(k, _)| k)
            .collect();
        let resp = match matches.as_slice() {
            [k] => *k,
            [] => {
                return Err(Error::Parse(format!(
                    "response column `{response_column}` not found in header"
                )))
            }
            _ => {
                return Err(Error::Parse(format!(
                    "response column `{response_column}` appears more than once"
                )))
            }
        };
        let names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != resp)
            .map(|(_, h)| h.to_string())
            .collect();
        let p = names.len();

        let mut values = Vec::new();
        let mut y = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
            for (k, field) in record.iter().enumerate() {
                if k == resp {
                    let v = match field.parse::<f64>() {
                        Ok(v) if v == 0.0 || v == 1.0 => v,
                        _ => {
                            return Err(Error::NonBinaryResponse {
                                column: response_column.to_string(),
                                value: field.to_string(),
                                row: row + 1,
                            })
                        }
                    };
                    y.push(v);
                } else {
                    let v: f64 = field.parse().map_err(|_| {
                        Error::Parse(format!("row {}: `{field}` is not a number", row + 1))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse(format!("row {}: non-finite value", row + 1)));
                    }
                    values.push(v);
                }
            }
        }
        if y.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        if p == 0 {
            return Err(Error::Parse("no covariate columns besides the response".into()));
        }
        let x = DMatrix::from_row_slice(y.len(), p, &values);
        Dataset::new(x, y, names)
    }

    /// Writes the dataset as CSV with the response in the first column.
    pub fn to_csv_string(&self, response_column: &str) -> String {
        let mut out = String::new();
        out.push_str(response_column);
        for name in &self.names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(if self.y[i] == 1.0 { "1" } else { "0" });
            for j in 0..self.p() {
                out.push(',');
                out.push_str(&format!("{:?}", self.x[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Signal amplitude of the nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Independent `N(0, sigma^2)` entries.
    IidGaussian { sigma: f64 },
    /// Rows from `N(0, Sigma)` with `Sigma_jk = r^|j-k|`.
    Ar1Gaussian { r: f64 },
}

/// A synthetic data-generating scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub signal: Signal,
    pub design: DesignKind,
    #[serde(default)]
    pub seed: u64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidArgument("scenario needs n >= 1 and p >= 1".into()));
        }
        if self.s > self.p {
            return Err(Error::InvalidArgument(format!(
                "s = {} exceeds p = {}",
                self.s, self.p
            )));
        }
        match self.design {
            DesignKind::IidGaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")))
            }
            DesignKind::Ar1Gaussian { r } if !(0.0..1.0).contains(&r) => {
                return Err(Error::InvalidArgument(format!("r must lie in [0, 1), got {r}")))
            }
            _ => {}
        }
        if let Signal::Uniform { lo, hi } = self.signal {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("empty signal range ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> SimRng {
        SimRng::seed_from_u64(self.seed)
    }
}

/// Output of [`generate_design`].
#[derive(Debug, Clone)]
pub struct SimulatedDesign {
    pub x: DMatrix<f64>,
    pub beta_star: DVector<f64>,
    pub support: Configuration,
}

pub fn generate_design<R: Rng + ?Sized>(
    scenario: &SimScenario,
    rng: &mut R,
) -> Result<SimulatedDesign> {
    scenario.validate()?;
    let SimScenario { n, p, s, .. } = *scenario;

    let x = match scenario.design {
        DesignKind::IidGaussian { sigma } => {
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                for j in 0..p {
                    let z: f64 = StandardNormal.sample(rng);
                    x[(i, j)] = sigma * z;
                }
            }
            x
        }
        DesignKind::Ar1Gaussian { r } => {
            let cov = DMatrix::from_fn(p, p, |a, b| r.powi(a.abs_diff(b) as i32));
            let chol = cov.cholesky().ok_or_else(|| {
                Error::NumericalFailure("AR(1) covariance is not positive definite".into())
            })?;
            let mut z = DMatrix::<f64>::zeros(n, p);
            for i in 0..n {
                for j in 0..p {
                    z[(i, j)] = StandardNormal.sample(rng);
                }
            }
            // row i of X is L z_i, so X = Z L^T
            z * chol.l().transpose()
        }
    };

    let mut beta_star = DVector::zeros(p);
    match scenario.signal {
        Signal::Fixed(a) => beta_star.rows_mut(0, s).fill(a),
        Signal::Uniform { lo, hi } => {
            let dist = Uniform::new(lo, hi)
                .map_err(|e| Error::InvalidArgument(format!("signal range: {e}")))?;
            for j in 0..s {
                beta_star[j] = dist.sample(rng);
            }
        }
    }

    Ok(SimulatedDesign {
        x,
        beta_star,
        support: Configuration::leading(s),
    })
}

/// Draws `y_i ~ Bernoulli(sigmoid(x_i' beta))` independently.
pub fn sample_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    beta_star: &DVector<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if x.ncols() != beta_star.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns, coefficient vector has {} entries",
            x.ncols(),
            beta_star.len()
        )));
    }
    let eta = x * beta_star;
    Ok(eta
        .iter()
        .map(|&t| {
            let u: f64 = rng.random();
            if u < sigmoid(t) {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// A complete simulated replication.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub beta_star: DVector<f64>,
    pub support: Configuration,
}

/// Generates a design and response from one generator, in that order.
pub fn simulate<R: Rng + ?Sized>(scenario: &SimScenario, rng: &mut R) -> Result<Simulated> {
    let design = generate_design(scenario, rng)?;
    let y = sample_response(&design.x, &design.beta_star, rng)?;
    Ok(Simulated {
        data: Dataset::unnamed(design.x, y)?,
        beta_star: design.beta_star,
        support: design.support,
    })
}
