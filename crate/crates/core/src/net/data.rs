use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Paired inputs and labels, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    labels: DMatrix<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, labels: DMatrix<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Empty("dataset"));
        }
        if labels.nrows() != inputs.nrows() {
            return Err(Error::Shape {
                what: "label rows",
                expected: inputs.nrows(),
                found: labels.nrows(),
            });
        }
        if inputs.ncols() == 0 || labels.ncols() == 0 {
            return Err(Error::InvalidConfig("dataset needs at least one input and one label column".into()));
        }
        if inputs.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("dataset contains non-finite values".into()));
        }
        Ok(Self { inputs, labels })
    }

    /// Builds a dataset from per-sample rows.
    pub fn from_rows(inputs: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(Error::Empty("dataset"));
        }
        let d = inputs[0].len();
        let c = labels.first().map_or(0, Vec::len);
        if inputs.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidConfig("ragged input rows".into()));
        }
        if labels.len() != n || labels.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidConfig("ragged or missing label rows".into()));
        }
        Self::new(
            DMatrix::from_fn(n, d, |i, j| inputs[i][j]),
            DMatrix::from_fn(n, c, |i, j| labels[i][j]),
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.labels.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &DMatrix<f64> {
        &self.labels
    }

    pub fn input(&self, i: usize) -> DVector<f64> {
        self.inputs.row(i).transpose()
    }

    pub fn label(&self, i: usize) -> DVector<f64> {
        self.labels.row(i).transpose()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Empty("batch"));
        }
        Ok(Dataset {
            inputs: self.inputs.select_rows(indices),
            labels: self.labels.select_rows(indices),
        })
    }

    pub(crate) fn check_against(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        if self.input_dim() != input_dim {
            return Err(Error::Shape {
                what: "dataset inputs",
                expected: input_dim,
                found: self.input_dim(),
            });
        }
        if self.output_dim() != output_dim {
            return Err(Error::Shape {
                what: "dataset labels",
                expected: output_dim,
                found: self.output_dim(),
            });
        }
        Ok(())
    }
}
