//! Isotropic Gaussian blob fixtures.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::matrix::Matrix;
use crate::rng;
use crate::{Error, Result};

/// `classes` spherical Gaussians in `dim` dimensions, `per_class` points each.
///
/// Class `c` is centred at `separation * (1 + c / dim) * e_{c mod dim}`, so
/// classes stay distinct even when there are more classes than dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBlobs {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub spread: f64,
}

impl GaussianBlobs {
    pub fn mean(&self, class: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        m[class % self.dim] += self.separation * (1 + class / self.dim) as f64;
        m
    }

    /// Rows are grouped by class, labels `0..classes`, masses uniform.
    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        if self.classes == 0 || self.dim == 0 || self.per_class == 0 {
            return Err(Error::InvalidArgument(
                "blob fixture needs classes, dim and per_class > 0".into(),
            ));
        }
        if !(self.spread >= 0.0) || !self.separation.is_finite() || !self.spread.is_finite() {
            return Err(Error::InvalidArgument(
                "blob separation/spread must be finite, spread >= 0".into(),
            ));
        }
        let noise = Normal::new(0.0, self.spread).expect("validated spread");
        let mut rng = rng::seeded(seed);
        let n = self.classes * self.per_class;
        let mut data = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for c in 0..self.classes {
            let mean = self.mean(c);
            for _ in 0..self.per_class {
                data.extend(mean.iter().map(|m| m + noise.sample(&mut rng)));
                labels.push(c);
            }
        }
        LabeledDataset::uniform(Matrix::from_vec(n, self.dim, data), labels)?
            .with_label_universe(self.classes)
    }
}
