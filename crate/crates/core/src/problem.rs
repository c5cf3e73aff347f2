//! JSON problem files: a dimension plus basis matrices whose entries are
//! `[re, im]` pairs.
//!
//! ```json
//! { "dimension": 2,
//!   "basis": [ [[[1, 0], [0, 0]], [[0, 0], [0, 0]]],
//!              [[[0, 0], [1, 0]], [[0, 0], [0, 0]]] ],
//!   "label": "ax+b" }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{build_algebra, OperatorLieAlgebra};
use crate::numeric::{Matrix, TolerancePolicy, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub dimension: usize,
    /// `basis[b][row][col] = [re, im]`.
    pub basis: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed problem file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn from_matrices(basis: &[Matrix], label: Option<String>) -> Self {
        let dimension = basis.first().map(|m| m.nrows()).unwrap_or(0);
        let basis = basis
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                    .collect()
            })
            .collect();
        Self {
            dimension,
            basis,
            label,
        }
    }

    pub fn from_algebra(alg: &OperatorLieAlgebra, label: Option<String>) -> Self {
        Self::from_matrices(alg.basis(), label)
    }

    /// Checks the shape of every matrix and converts it.
    pub fn matrices(&self) -> Result<Vec<Matrix>> {
        let d = self.dimension;
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if self.basis.is_empty() {
            return Err(Error::InvalidInput("basis is empty".into()));
        }
        self.basis
            .iter()
            .enumerate()
            .map(|(b, rows)| {
                if rows.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "matrix {b} has {} rows, expected {d}",
                        rows.len()
                    )));
                }
                if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != d) {
                    return Err(Error::InvalidInput(format!(
                        "matrix {b} row {r} has {} entries, expected {d}",
                        row.len()
                    )));
                }
                Ok(Matrix::from_fn(d, d, |r, c| {
                    let [re, im] = rows[r][c];
                    C64::new(re, im)
                }))
            })
            .collect()
    }

    pub fn to_algebra(&self, pol: &TolerancePolicy) -> Result<OperatorLieAlgebra> {
        build_algebra(&self.matrices()?, pol)
    }
}
