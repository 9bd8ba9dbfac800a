//! Labeled datasets as discrete probability measures.
//!
//! A dataset is a set of feature rows, one integer label per row, and one
//! probability mass per row. CSV is the only ingestion format:
//!
//! ```text
//! f0,f1,...,f{d-1},label[,mass]
//! ```
//!
//! Labels are opaque ids taken verbatim. When the mass column is absent (or
//! ignored via [`MassPolicy::Uniform`]) every row gets `1/n`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::matrix::{compensated_sum, Matrix};
use crate::rng;
use crate::{Error, Result};

/// Tolerance on `|sum(masses) - 1|`.
pub const MASS_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassPolicy {
    /// Every row receives mass `1/n`; a mass column, if present, is ignored.
    Uniform,
    /// Masses are read from the trailing `mass` column.
    Column,
}

/// Provenance of a dataset loaded from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: PathBuf,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "V")]
    pub label_universe: usize,
    /// Hex SHA-256 of the raw file bytes.
    pub checksum: String,
    pub mass_policy: MassPolicy,
}

impl DatasetManifest {
    /// Recomputes the checksum of `source` and compares.
    pub fn verify(&self) -> Result<bool> {
        let bytes = std::fs::read(&self.source)?;
        Ok(sha256_hex(&bytes) == self.checksum)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Features, labels and per-point masses of a discrete labeled measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    masses: Vec<f64>,
    label_universe: usize,
    manifest: Option<DatasetManifest>,
}

impl LabeledDataset {
    /// Validates and builds a dataset.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        masses: Vec<f64>,
        label_universe: usize,
    ) -> Result<Self> {
        let (n, d) = features.shape();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::InvalidArgument(
                "feature dimension must be at least 1".into(),
            ));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if masses.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: masses.len(),
            });
        }
        for i in 0..n {
            if features.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row: i });
            }
            if !(masses[i] >= 0.0) || !masses[i].is_finite() {
                return Err(Error::NegativeMass { row: i });
            }
            if labels[i] >= label_universe {
                return Err(Error::LabelOutOfRange {
                    row: i,
                    label: labels[i],
                    universe: label_universe,
                });
            }
        }
        let sum = compensated_sum(&masses);
        if (sum - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::MassSumMismatch { sum });
        }
        Ok(Self {
            features,
            labels,
            masses,
            label_universe,
            manifest: None,
        })
    }

    /// Builds a dataset with uniform masses and `V = max(label) + 1`.
    pub fn uniform(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let universe = labels.iter().copied().max().map_or(1, |m| m + 1);
        Self::new(features, labels, uniform_masses(n), universe)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn label_universe(&self) -> usize {
        self.label_universe
    }

    pub fn manifest(&self) -> Option<&DatasetManifest> {
        self.manifest.as_ref()
    }

    /// Same rows with the label universe widened to `universe`.
    pub fn with_label_universe(mut self, universe: usize) -> Result<Self> {
        if let Some((row, &label)) = self.labels.iter().enumerate().find(|(_, &l)| l >= universe) {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                universe,
            });
        }
        self.label_universe = universe;
        Ok(self)
    }

    /// Same rows and labels with new masses.
    pub fn with_masses(&self, masses: Vec<f64>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.labels.clone(),
            masses,
            self.label_universe,
        )
    }

    /// Keeps the listed rows (in order) and re-uniformizes the masses.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(
            self.features.select_rows(indices),
            labels,
            uniform_masses(indices.len()),
            self.label_universe,
        )
    }

    /// Drops the listed rows and re-uniformizes the masses over the rest.
    pub fn remove(&self, drop: &[usize]) -> Result<Self> {
        let mut keep = vec![true; self.len()];
        for &i in drop {
            keep[i] = false;
        }
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        self.select(&idx)
    }

    /// Replaces features and labels, keeping masses and universe. Used by the
    /// corruption generators, which never change the row count.
    pub(crate) fn with_rows(&self, features: Matrix, labels: Vec<usize>) -> Result<Self> {
        Self::new(features, labels, self.masses.clone(), self.label_universe)
    }

    /// Labels that carry positive mass.
    pub fn present_labels(&self) -> Vec<bool> {
        let mut present = vec![false; self.label_universe];
        for (l, m) in self.labels.iter().zip(&self.masses) {
            if *m > 0.0 {
                present[*l] = true;
            }
        }
        present
    }

    /// Serializes to CSV with an explicit mass column. Floats are written in
    /// shortest round-trip form, so reloading with [`MassPolicy::Column`]
    /// reproduces the dataset bit for bit.
    pub fn to_csv_string(&self) -> String {
        let d = self.dim();
        let mut out = String::new();
        for c in 0..d {
            let _ = write!(out, "f{c},");
        }
        out.push_str("label,mass\n");
        for i in 0..self.len() {
            for v in self.features.row(i) {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{},{:?}", self.labels[i], self.masses[i]);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

pub fn uniform_masses(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads a dataset from a CSV file with header `f0..f{d-1},label[,mass]`.
pub fn load_csv(path: impl AsRef<Path>, mass_policy: MassPolicy) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut ds = parse_csv(&bytes, mass_policy)?;
    ds.manifest = Some(DatasetManifest {
        source: path.to_path_buf(),
        n: ds.len(),
        d: ds.dim(),
        label_universe: ds.label_universe,
        checksum: sha256_hex(&bytes),
        mass_policy,
    });
    Ok(ds)
}

/// Parses CSV bytes; see [`load_csv`].
pub fn parse_csv(bytes: &[u8], mass_policy: MassPolicy) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = reader.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let label_pos = names
        .iter()
        .position(|&h| h == "label")
        .ok_or_else(|| Error::MalformedHeader("missing `label` column".into()))?;
    let d = label_pos;
    if d == 0 {
        return Err(Error::MalformedHeader(
            "no feature columns before `label`".into(),
        ));
    }
    for (c, name) in names[..d].iter().enumerate() {
        if *name != format!("f{c}") {
            return Err(Error::MalformedHeader(format!(
                "column {c} is `{name}`, expected `f{c}`"
            )));
        }
    }
    let has_mass = match &names[d + 1..] {
        [] => false,
        ["mass"] => true,
        other => {
            return Err(Error::MalformedHeader(format!(
                "unexpected trailing columns {other:?}"
            )));
        }
    };
    if mass_policy == MassPolicy::Column && !has_mass {
        return Err(Error::MalformedHeader(
            "mass policy `column` requires a `mass` column".into(),
        ));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut masses = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        for c in 0..d {
            let v: f64 = record[c].trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("feature `{}` is not a number", &record[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature { row });
            }
            features.push(v);
        }
        let label: usize = record[d].trim().parse().map_err(|_| Error::Parse {
            row,
            message: format!("label `{}` is not a non-negative integer", &record[d]),
        })?;
        labels.push(label);
        if has_mass {
            let m: f64 = record[d + 1].trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("mass `{}` is not a number", &record[d + 1]),
            })?;
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::NegativeMass { row });
            }
            masses.push(m);
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let masses = match mass_policy {
        MassPolicy::Uniform => uniform_masses(n),
        MassPolicy::Column => masses,
    };
    let universe = labels.iter().copied().max().unwrap_or(0) + 1;
    LabeledDataset::new(Matrix::from_vec(n, d, features), labels, masses, universe)
}

/// Draws `k` rows without replacement; masses become uniform `1/k`.
///
/// The rows keep the order in which they were drawn, so `k = n` yields a
/// seeded permutation of the dataset.
pub fn subsample(ds: &LabeledDataset, k: usize, seed: u64) -> Result<LabeledDataset> {
    let n = ds.len();
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut rng = rng::seeded(seed);
    let idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    ds.select(&idx)
}

/// Repeats the rows `times` times and divides every mass by `times`. The
/// resulting measure is the same distribution as the input.
pub fn duplicate_concat(ds: &LabeledDataset, times: usize) -> Result<LabeledDataset> {
    if times == 0 {
        return Err(Error::InvalidArgument("times must be at least 1".into()));
    }
    let n = ds.len();
    let total = n
        .checked_mul(times)
        .ok_or_else(|| Error::InvalidArgument("duplicated size overflows".into()))?;
    let idx: Vec<usize> = (0..total).map(|r| r % n).collect();
    let features = ds.features.select_rows(&idx);
    let labels = idx.iter().map(|&i| ds.labels[i]).collect();
    let masses = idx.iter().map(|&i| ds.masses[i] / times as f64).collect();
    LabeledDataset::new(features, labels, masses, ds.label_universe)
}
