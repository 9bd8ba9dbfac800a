use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MASS_SUM_TOL;
use crate::matrix::{compensated_sum, Matrix};
use crate::{Error, Result};

/// Ground metric between feature vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMetric {
    #[default]
    Euclidean,
    SquaredEuclidean,
}

/// Pairwise cost between two discrete measures, plus the measures' masses.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub values: Matrix,
    pub row_mass: Vec<f64>,
    pub col_mass: Vec<f64>,
}

impl CostMatrix {
    pub fn new(values: Matrix, row_mass: Vec<f64>, col_mass: Vec<f64>) -> Result<Self> {
        let (n, m) = values.shape();
        if n == 0 || m == 0 {
            return Err(Error::EmptyDataset);
        }
        if row_mass.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row_mass.len(),
            });
        }
        if col_mass.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: col_mass.len(),
            });
        }
        if values.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteCost);
        }
        for masses in [&row_mass, &col_mass] {
            if let Some(row) = masses.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
                return Err(Error::NegativeMass { row });
            }
            let sum = compensated_sum(masses);
            if (sum - 1.0).abs() > MASS_SUM_TOL {
                return Err(Error::MassSumMismatch { sum });
            }
        }
        Ok(Self {
            values,
            row_mass,
            col_mass,
        })
    }

    /// Uniform masses on both sides.
    pub fn uniform(values: Matrix) -> Result<Self> {
        let (n, m) = values.shape();
        let a = vec![1.0 / n as f64; n.max(1)];
        let b = vec![1.0 / m as f64; m.max(1)];
        Self::new(values, a, b)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn transpose(&self) -> CostMatrix {
        CostMatrix {
            values: self.values.transpose(),
            row_mass: self.col_mass.clone(),
            col_mass: self.row_mass.clone(),
        }
    }

    /// Same costs with new masses, validated.
    pub fn with_masses(&self, row_mass: Vec<f64>, col_mass: Vec<f64>) -> Result<Self> {
        Self::new(self.values.clone(), row_mass, col_mass)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.values.map(|v| v * s),
            self.row_mass.clone(),
            self.col_mass.clone(),
        )
    }
}

/// `out[i * M + j] = metric(a_i, b_j)`. Rows are filled in parallel; each
/// entry is an independent, sequentially accumulated sum.
pub fn pairwise_distances(a: &Matrix, b: &Matrix, metric: GroundMetric) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            found: b.cols(),
        });
    }
    let (n, m) = (a.rows(), b.rows());
    let mut out = Matrix::zeros(n, m);
    if m == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(i, row)| {
            let x = a.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let sq: f64 = x.iter().zip(b.row(j)).map(|(p, q)| (p - q) * (p - q)).sum();
                *slot = match metric {
                    GroundMetric::Euclidean => sq.sqrt(),
                    GroundMetric::SquaredEuclidean => sq,
                };
            }
        });
    Ok(out)
}

/// Euclidean cost between two feature matrices with uniform masses.
pub fn euclidean_cost(a: &Matrix, b: &Matrix) -> Result<CostMatrix> {
    CostMatrix::uniform(pairwise_distances(a, b, GroundMetric::Euclidean)?)
}
