//! Model configurations: subsets of covariate indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A model configuration `S`: the set of active covariates.
///
/// Stored as a strictly increasing list of zero-based column indices. The
/// equivalent binary p-vector view is available through [`Configuration::to_indicator`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    pub fn empty() -> Self {
        Configuration(Vec::new())
    }

    /// Builds a configuration from indices in any order. Duplicates are rejected.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate index in configuration {indices:?}"
            )));
        }
        Ok(Configuration(indices))
    }

    /// The leading block `{0, .., s-1}`.
    pub fn leading(s: usize) -> Self {
        Configuration((0..s).collect())
    }

    pub fn from_indicator(bits: &[bool]) -> Self {
        Configuration(
            bits.iter()
                .enumerate()
                .filter_map(|(j, &b)| b.then_some(j))
                .collect(),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Largest index plus one, or 0 when empty.
    pub fn span(&self) -> usize {
        self.0.last().map_or(0, |&j| j + 1)
    }

    pub fn to_indicator(&self, p: usize) -> Vec<bool> {
        let mut bits = vec![false; p];
        for &j in &self.0 {
            bits[j] = true;
        }
        bits
    }

    /// Returns a copy with coordinate `j` toggled.
    pub fn flipped(&self, j: usize) -> Self {
        let mut idx = self.0.clone();
        match idx.binary_search(&j) {
            Ok(pos) => {
                idx.remove(pos);
            }
            Err(pos) => idx.insert(pos, j),
        }
        Configuration(idx)
    }

    pub fn check_bounds(&self, p: usize) -> Result<()> {
        if self.span() > p {
            return Err(Error::DimensionMismatch(format!(
                "configuration index {} out of range for p = {p}",
                self.span() - 1
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}
