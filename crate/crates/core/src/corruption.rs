//! Seeded corruption generators with ground-truth bookkeeping.
//!
//! Each generator returns the corrupted dataset together with a
//! [`CorruptionRecord`] listing exactly which rows were touched. Rows that are
//! not listed are bit-identical to the input. Generators are pure functions of
//! their inputs and seed.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dataset::{uniform_masses, LabeledDataset};
use crate::matrix::Matrix;
use crate::rng;
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Mislabel,
    FeatureNoise,
    BackdoorTrigger,
    FeatureCollision,
    IrrelevantInjection,
}

/// Ground truth of a corruption run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub kind: CorruptionKind,
    pub seed: u64,
    pub params: Map<String, Value>,
    /// Sorted, distinct row indices of the corrupted points.
    pub corrupted_indices: Vec<usize>,
}

impl CorruptionRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Boolean mask over `n` rows.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.corrupted_indices {
            mask[i] = true;
        }
        mask
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    Ok(())
}

/// `round(fraction * n)`.
pub fn corruption_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

fn params(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Replaces the label of `round(fraction * n)` uniformly chosen rows with a
/// label drawn uniformly from the other `V - 1` labels.
pub fn mislabel(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, CorruptionRecord)> {
    check_fraction(fraction)?;
    let universe = ds.label_universe();
    if universe < 2 {
        return Err(Error::SingleClassDataset);
    }
    let mut rng = rng::seeded(seed);
    let chosen = rng::sample_indices(&mut rng, ds.len(), corruption_count(fraction, ds.len()));
    let mut labels = ds.labels().to_vec();
    for &i in &chosen {
        let r = rng.random_range(0..universe - 1);
        labels[i] = if r >= labels[i] { r + 1 } else { r };
    }
    let out = ds.with_rows(ds.features().clone(), labels)?;
    let record = CorruptionRecord {
        kind: CorruptionKind::Mislabel,
        seed,
        params: params(json!({ "fraction": fraction })),
        corrupted_indices: chosen,
    };
    Ok((out, record))
}

/// Adds zero-mean Gaussian noise to `round(fraction * n)` rows. Column `c`
/// receives standard deviation `sigma_scale * std(column c of the clean data)`.
pub fn feature_noise(
    ds: &LabeledDataset,
    fraction: f64,
    sigma_scale: f64,
    seed: u64,
) -> Result<(LabeledDataset, CorruptionRecord)> {
    check_fraction(fraction)?;
    if !(sigma_scale >= 0.0) || !sigma_scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma_scale {sigma_scale} must be >= 0"
        )));
    }
    let (n, d) = ds.features().shape();
    let col_std: Vec<f64> = (0..d)
        .map(|c| {
            let col: Vec<f64> = (0..n).map(|i| ds.features().get(i, c)).collect();
            stats::std_dev(&col)
        })
        .collect();
    let mut rng = rng::seeded(seed);
    let chosen = rng::sample_indices(&mut rng, n, corruption_count(fraction, n));
    let mut features = ds.features().clone();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for &i in &chosen {
        for (c, v) in features.row_mut(i).iter_mut().enumerate() {
            let z: f64 = unit.sample(&mut rng);
            let noise = sigma_scale * col_std[c] * z;
            // Keep untouched coordinates bit-identical when the scale is zero.
            if noise != 0.0 {
                *v += noise;
            }
        }
    }
    let out = ds.with_rows(features, ds.labels().to_vec())?;
    let record = CorruptionRecord {
        kind: CorruptionKind::FeatureNoise,
        seed,
        params: params(json!({ "fraction": fraction, "sigma_scale": sigma_scale })),
        corrupted_indices: chosen,
    };
    Ok((out, record))
}

/// Overwrites `patch_coords` of `round(fraction * n)` rows with `patch_value`
/// and relabels them as `target_label`.
pub fn backdoor_trigger(
    ds: &LabeledDataset,
    fraction: f64,
    target_label: usize,
    patch_coords: &[usize],
    patch_value: f64,
    seed: u64,
) -> Result<(LabeledDataset, CorruptionRecord)> {
    check_fraction(fraction)?;
    let d = ds.dim();
    if let Some(&coord) = patch_coords.iter().find(|&&c| c >= d) {
        return Err(Error::BadPatchCoord { coord, dim: d });
    }
    if target_label >= ds.label_universe() {
        return Err(Error::LabelOutOfRange {
            row: 0,
            label: target_label,
            universe: ds.label_universe(),
        });
    }
    if !patch_value.is_finite() {
        return Err(Error::InvalidArgument("patch value must be finite".into()));
    }
    let mut rng = rng::seeded(seed);
    let chosen = rng::sample_indices(&mut rng, ds.len(), corruption_count(fraction, ds.len()));
    let mut features = ds.features().clone();
    let mut labels = ds.labels().to_vec();
    for &i in &chosen {
        let row = features.row_mut(i);
        for &c in patch_coords {
            row[c] = patch_value;
        }
        labels[i] = target_label;
    }
    let out = ds.with_rows(features, labels)?;
    let record = CorruptionRecord {
        kind: CorruptionKind::BackdoorTrigger,
        seed,
        params: params(json!({
            "fraction": fraction,
            "target_label": target_label,
            "patch_coords": patch_coords,
            "patch_value": patch_value,
        })),
        corrupted_indices: chosen,
    };
    Ok((out, record))
}

/// Blends `count` rows carrying `base_label` toward `blend_source`:
/// `x <- (1 - alpha) x + alpha * blend_source`. Labels are kept.
pub fn feature_collision(
    ds: &LabeledDataset,
    count: usize,
    base_label: usize,
    blend_source: &[f64],
    alpha: f64,
    seed: u64,
) -> Result<(LabeledDataset, CorruptionRecord)> {
    if blend_source.len() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: blend_source.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    let base_rows: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels()[i] == base_label)
        .collect();
    if base_rows.len() < count {
        return Err(Error::NotEnoughBaseRows {
            needed: count,
            available: base_rows.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let picks = rng::sample_indices(&mut rng, base_rows.len(), count);
    let chosen: Vec<usize> = picks.iter().map(|&p| base_rows[p]).collect();
    let mut features = ds.features().clone();
    for &i in &chosen {
        for (v, s) in features.row_mut(i).iter_mut().zip(blend_source) {
            *v = (1.0 - alpha) * *v + alpha * s;
        }
    }
    let out = ds.with_rows(features, ds.labels().to_vec())?;
    let record = CorruptionRecord {
        kind: CorruptionKind::FeatureCollision,
        seed,
        params: params(json!({
            "count": count,
            "base_label": base_label,
            "alpha": alpha,
            "blend_source": blend_source,
        })),
        corrupted_indices: chosen,
    };
    Ok((out, record))
}

/// Appends donor rows relabeled into receiving classes.
///
/// Donor rows are consumed in order: the first `per_class_counts[l0]` rows
/// (smallest receiving label first) get label `l0`, and so on. Masses are made
/// uniform over the enlarged dataset.
pub fn irrelevant_injection(
    ds: &LabeledDataset,
    donor: &LabeledDataset,
    per_class_counts: &BTreeMap<usize, usize>,
) -> Result<(LabeledDataset, CorruptionRecord)> {
    if donor.dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: donor.dim(),
        });
    }
    let total: usize = per_class_counts.values().sum();
    if total > donor.len() {
        return Err(Error::KTooLarge {
            k: total,
            n: donor.len(),
        });
    }
    let params_json = params(json!({
        "per_class_counts": per_class_counts
            .iter()
            .map(|(l, c)| (l.to_string(), json!(c)))
            .collect::<Map<String, Value>>(),
    }));
    if total == 0 {
        let record = CorruptionRecord {
            kind: CorruptionKind::IrrelevantInjection,
            seed: 0,
            params: params_json,
            corrupted_indices: Vec::new(),
        };
        return Ok((ds.clone(), record));
    }
    let n = ds.len();
    let d = ds.dim();
    let mut data = ds.features().as_slice().to_vec();
    let mut labels = ds.labels().to_vec();
    let mut next = 0;
    for (&label, &count) in per_class_counts {
        for _ in 0..count {
            data.extend_from_slice(donor.features().row(next));
            labels.push(label);
            next += 1;
        }
    }
    let universe = labels
        .iter()
        .copied()
        .max()
        .map_or(1, |m| m + 1)
        .max(ds.label_universe());
    let new_n = n + total;
    let out = LabeledDataset::new(
        Matrix::from_vec(new_n, d, data),
        labels,
        uniform_masses(new_n),
        universe,
    )?;
    let record = CorruptionRecord {
        kind: CorruptionKind::IrrelevantInjection,
        seed: 0,
        params: params_json,
        corrupted_indices: (n..new_n).collect(),
    };
    Ok((out, record))
}
