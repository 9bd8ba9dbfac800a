//! Class-wise hybrid cost and the dataset distance built on it.
//!
//! The ground cost between a training point `(x, y)` and a validation point
//! `(x', y')` is
//!
//! ```text
//! C = feature_weight * d(x, x') + c_weight * W_d(mu_t(. | y), mu_v(. | y'))
//! ```
//!
//! where `W_d` is the transport distance between the two label-conditional
//! feature distributions. The conditional distances form a
//! [`LabelDistanceTable`]; the outer transport problem over `C` yields the
//! dataset distance and the duals used for valuation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::matrix::Matrix;
use crate::ot::{
    self, pairwise_distances, CostMatrix, GroundMetric, SolverConfig, TransportSolution,
};
use crate::{Error, Result};

/// What to do when a label occurs in only one of the two datasets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingLabelPolicy {
    #[default]
    Error,
    /// Fill undefined table entries with the largest finite entry.
    ImputeMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridCostConfig {
    /// Coefficient of the label distance.
    pub c_weight: f64,
    /// Coefficient of the feature distance.
    pub feature_weight: f64,
    pub metric: GroundMetric,
    pub inner: SolverConfig,
    pub outer: SolverConfig,
    pub missing_label: MissingLabelPolicy,
}

impl Default for HybridCostConfig {
    fn default() -> Self {
        Self {
            c_weight: 1.0,
            feature_weight: 1.0,
            metric: GroundMetric::Euclidean,
            inner: SolverConfig::sinkhorn(0.1),
            outer: SolverConfig::sinkhorn(0.1),
            missing_label: MissingLabelPolicy::Error,
        }
    }
}

impl HybridCostConfig {
    /// Exact LP for both the inner and the outer problems.
    pub fn oracle() -> Self {
        Self {
            inner: SolverConfig::exact(),
            outer: SolverConfig::exact(),
            ..Self::default()
        }
    }

    /// Sinkhorn with the same `epsilon` inside and outside.
    pub fn entropic(epsilon: f64) -> Self {
        Self {
            inner: SolverConfig::sinkhorn(epsilon),
            outer: SolverConfig::sinkhorn(epsilon),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in [self.c_weight, self.feature_weight] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "weights must be finite and >= 0, got {w}"
                )));
            }
        }
        if self.c_weight == 0.0 && self.feature_weight == 0.0 {
            return Err(Error::InvalidArgument(
                "at least one weight must be positive".into(),
            ));
        }
        self.inner.validate()?;
        self.outer.validate()
    }
}

/// Rows of one label with masses renormalized to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMeasure {
    pub label: usize,
    /// Row indices into the parent dataset.
    pub indices: Vec<usize>,
    pub features: Matrix,
    pub masses: Vec<f64>,
}

/// Per-label conditional measures, indexed by label id. Labels without
/// positive mass are `None`.
pub fn conditional_measures(ds: &LabeledDataset) -> Vec<Option<ConditionalMeasure>> {
    let universe = ds.label_universe();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); universe];
    for (i, &l) in ds.labels().iter().enumerate() {
        buckets[l].push(i);
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(label, indices)| {
            let total: f64 = indices.iter().map(|&i| ds.masses()[i]).sum();
            if !(total > 0.0) {
                return None;
            }
            let mut masses: Vec<f64> = indices.iter().map(|&i| ds.masses()[i] / total).collect();
            // Push the rounding residue onto the largest entry so the
            // conditional passes the mass-sum check exactly.
            let sum: f64 = masses.iter().sum();
            if let Some(k) = (0..masses.len()).max_by(|&p, &q| masses[p].total_cmp(&masses[q])) {
                masses[k] += 1.0 - sum;
            }
            Some(ConditionalMeasure {
                label,
                features: ds.features().select_rows(&indices),
                indices,
                masses,
            })
        })
        .collect()
}

/// `values[a][b]` is the inner transport distance between training label `a`
/// and validation label `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistanceTable {
    #[serde(rename = "V_t")]
    pub train_labels: usize,
    #[serde(rename = "V_v")]
    pub valid_labels: usize,
    /// Row-major `V_t x V_v`; `None` (JSON `null`) marks an undefined entry.
    pub values: Vec<Option<f64>>,
    pub present_train: Vec<bool>,
    pub present_valid: Vec<bool>,
    /// Largest marginal residual among the inner solves.
    pub inner_residual: f64,
    pub inner_converged: bool,
}

impl LabelDistanceTable {
    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        self.values[a * self.valid_labels + b]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Largest defined entry.
    pub fn max_entry(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::max)
    }
}

/// Inner transport distance for every pair of present labels.
pub fn label_distance_table(
    dt: &LabeledDataset,
    dv: &LabeledDataset,
    cfg: &HybridCostConfig,
) -> Result<LabelDistanceTable> {
    if dt.dim() != dv.dim() {
        return Err(Error::DimensionMismatch {
            expected: dt.dim(),
            found: dv.dim(),
        });
    }
    let ct = conditional_measures(dt);
    let cv = conditional_measures(dv);
    let present_train: Vec<bool> = ct.iter().map(Option::is_some).collect();
    let present_valid: Vec<bool> = cv.iter().map(Option::is_some).collect();

    let universe = present_train.len().max(present_valid.len());
    for label in 0..universe {
        let t = present_train.get(label).copied().unwrap_or(false);
        let v = present_valid.get(label).copied().unwrap_or(false);
        if t != v && cfg.missing_label == MissingLabelPolicy::Error {
            let side = if t { "training" } else { "validation" };
            return Err(Error::MissingLabel { label, side });
        }
    }

    let pairs: Vec<(usize, usize)> = (0..ct.len())
        .flat_map(|a| (0..cv.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| ct[a].is_some() && cv[b].is_some())
        .collect();
    let results: Vec<Result<((usize, usize), (f64, f64, bool))>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (pa, pb) = (ct[a].as_ref().unwrap(), cv[b].as_ref().unwrap());
            let values = pairwise_distances(&pa.features, &pb.features, cfg.metric)?;
            let cost = CostMatrix::new(values, pa.masses.clone(), pb.masses.clone())?;
            let sol = ot::solve(&cost, &cfg.inner)?;
            Ok(((a, b), (sol.objective, sol.residual, sol.converged)))
        })
        .collect();

    let mut values = vec![None; ct.len() * cv.len()];
    let mut inner_residual = 0.0f64;
    let mut inner_converged = true;
    for r in results {
        let ((a, b), (v, residual, converged)) = r?;
        values[a * cv.len() + b] = Some(v);
        inner_residual = inner_residual.max(residual);
        inner_converged &= converged;
    }
    let mut table = LabelDistanceTable {
        train_labels: ct.len(),
        valid_labels: cv.len(),
        values,
        present_train,
        present_valid,
        inner_residual,
        inner_converged,
    };
    if cfg.missing_label == MissingLabelPolicy::ImputeMax {
        let fill = table.max_entry().unwrap_or(0.0);
        for v in table.values.iter_mut() {
            if v.is_none() {
                *v = Some(fill);
            }
        }
    }
    Ok(table)
}

/// `C_ij = feature_weight * d(x_i, x'_j) + c_weight * table[y_i, y'_j]`.
pub fn hybrid_cost(
    dt: &LabeledDataset,
    dv: &LabeledDataset,
    table: &LabelDistanceTable,
    cfg: &HybridCostConfig,
) -> Result<CostMatrix> {
    let mut values = if cfg.feature_weight > 0.0 {
        let mut d = pairwise_distances(dt.features(), dv.features(), cfg.metric)?;
        if cfg.feature_weight != 1.0 {
            for v in d.as_mut_slice() {
                *v *= cfg.feature_weight;
            }
        }
        d
    } else {
        Matrix::zeros(dt.len(), dv.len())
    };
    if cfg.c_weight > 0.0 {
        let m = dv.len();
        for (i, row) in values.as_mut_slice().chunks_mut(m).enumerate() {
            let a = dt.labels()[i];
            for (slot, &b) in row.iter_mut().zip(dv.labels()) {
                let entry = table
                    .values
                    .get(a * table.valid_labels + b)
                    .copied()
                    .flatten()
                    .ok_or(Error::MissingLabel {
                        label: a.max(b),
                        side: "label table",
                    })?;
                *slot += cfg.c_weight * entry;
            }
        }
    }
    CostMatrix::new(values, dt.masses().to_vec(), dv.masses().to_vec())
}

/// Dataset distance with its transport solution and label table.
#[derive(Debug, Clone)]
pub struct DatasetDistance {
    pub distance: f64,
    pub solution: TransportSolution,
    pub table: LabelDistanceTable,
}

impl DatasetDistance {
    /// Whether the outer solve and every inner solve reached tolerance.
    pub fn converged(&self) -> bool {
        self.solution.converged && self.table.inner_converged
    }
}

/// Label table, hybrid cost and outer solve in one call.
pub fn dataset_distance(
    dt: &LabeledDataset,
    dv: &LabeledDataset,
    cfg: &HybridCostConfig,
) -> Result<DatasetDistance> {
    cfg.validate()?;
    let table = label_distance_table(dt, dv, cfg)?;
    let cost = hybrid_cost(dt, dv, &table, cfg)?;
    let solution = ot::solve(&cost, &cfg.outer)?;
    Ok(DatasetDistance {
        distance: solution.objective,
        solution,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[f64], labels: &[usize]) -> LabeledDataset {
        let m: Vec<[f64; 1]> = rows.iter().map(|&x| [x]).collect();
        LabeledDataset::uniform(Matrix::from_rows(&m), labels.to_vec()).unwrap()
    }

    #[test]
    fn conditionals_renormalize() {
        let six = ds(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[0, 0, 0, 1, 1, 1]);
        let cond = conditional_measures(&six);
        assert_eq!(cond.len(), 2);
        for c in cond.iter().flatten() {
            assert_eq!(c.indices.len(), 3);
            assert!(c.masses.iter().all(|&m| (m - 1.0 / 3.0).abs() < 1e-15));
        }
        let three = ds(&[0.0, 1.0, 2.0], &[0, 0, 1]);
        let cond = conditional_measures(&three);
        assert_eq!(cond[0].as_ref().unwrap().masses, vec![0.5, 0.5]);
        assert_eq!(cond[1].as_ref().unwrap().masses, vec![1.0]);

        let single = ds(&[0.0, 1.0], &[0, 0]);
        let cond = conditional_measures(&single);
        assert_eq!(cond[0].as_ref().unwrap().masses, vec![0.5, 0.5]);
    }

    #[test]
    fn absent_labels_flagged() {
        let d = LabeledDataset::uniform(Matrix::from_rows(&[[0.0], [1.0]]), vec![0, 2]).unwrap();
        let cond = conditional_measures(&d);
        assert!(cond[0].is_some() && cond[1].is_none() && cond[2].is_some());
    }

    #[test]
    fn point_mass_table_entry() {
        let dt = ds(&[0.0], &[0]);
        let dv = ds(&[3.0], &[0]);
        let table = label_distance_table(&dt, &dv, &HybridCostConfig::oracle()).unwrap();
        assert_eq!(table.get(0, 0), Some(3.0));
    }

    #[test]
    fn hand_hybrid_entry() {
        let dt = ds(&[1.0], &[0]);
        let dv = LabeledDataset::uniform(Matrix::from_rows(&[[2.0]]), vec![1]).unwrap();
        let table = LabelDistanceTable {
            train_labels: 1,
            valid_labels: 2,
            values: vec![None, Some(3.0)],
            present_train: vec![true],
            present_valid: vec![false, true],
            inner_residual: 0.0,
            inner_converged: true,
        };
        let cost = hybrid_cost(&dt, &dv, &table, &HybridCostConfig::oracle()).unwrap();
        assert_eq!(cost.values.get(0, 0), 4.0);
    }

    #[test]
    fn zero_label_weight_is_plain_feature_cost() {
        let dt = ds(&[0.0, 1.0, 5.0], &[0, 1, 1]);
        let dv = ds(&[0.5, 4.0], &[1, 0]);
        let cfg = HybridCostConfig {
            c_weight: 0.0,
            ..HybridCostConfig::oracle()
        };
        let table = label_distance_table(&dt, &dv, &cfg).unwrap();
        let cost = hybrid_cost(&dt, &dv, &table, &cfg).unwrap();
        let plain = crate::ot::euclidean_cost(dt.features(), dv.features()).unwrap();
        assert_eq!(cost.values, plain.values);
    }

    #[test]
    fn missing_label_policy() {
        let dt = ds(&[0.0, 1.0], &[0, 1]);
        let dv = ds(&[0.0, 1.0], &[0, 0]);
        let err = label_distance_table(&dt, &dv, &HybridCostConfig::oracle()).unwrap_err();
        assert!(matches!(
            err,
            Error::MissingLabel {
                label: 1,
                side: "training"
            }
        ));

        let cfg = HybridCostConfig {
            missing_label: MissingLabelPolicy::ImputeMax,
            ..HybridCostConfig::oracle()
        };
        let dist = dataset_distance(&dt, &dv, &cfg).unwrap();
        assert!(dist.distance.is_finite());
    }

    #[test]
    fn self_distance_is_zero() {
        let d = ds(&[0.0, 1.0, 2.5, 3.0], &[0, 1, 0, 1]);
        let exact = dataset_distance(&d, &d, &HybridCostConfig::oracle()).unwrap();
        assert!(exact.distance.abs() < 1e-12);
    }

    #[test]
    fn table_json_has_presence_masks() {
        let d = ds(&[0.0, 1.0], &[0, 1]);
        let table = label_distance_table(&d, &d, &HybridCostConfig::oracle()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&table.to_json().unwrap()).unwrap();
        assert_eq!(v["V_t"], 2);
        assert_eq!(v["values"].as_array().unwrap().len(), 4);
        assert_eq!(v["present_valid"], serde_json::json!([true, true]));
    }
}
