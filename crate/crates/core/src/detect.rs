//! Corrupt, value, rank, remove.
//!
//! The detection rate at budget `b` is recall: the share of all corrupted
//! points found among the `b` lowest-valued training points. Removing those
//! points and recomputing the dataset distance gives a learning-agnostic
//! stand-in for retrained-model accuracy. It is a distance, not a test
//! accuracy, and should not be read as one.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::{self, CorruptionKind, CorruptionRecord};
use crate::dataset::LabeledDataset;
use crate::hierarchical::{dataset_distance, HybridCostConfig};
use crate::rng;
use crate::synthetic::GaussianBlobs;
use crate::valuation::{calibrated_gradients, ValuationReport};
use crate::{Error, Result};

/// `lava <version>` plus the git description when one was supplied at build
/// time through `LAVA_GIT_DESCRIBE`.
pub fn version_string() -> String {
    match option_env!("LAVA_GIT_DESCRIBE") {
        Some(desc) => format!("lava {} ({desc})", env!("CARGO_PKG_VERSION")),
        None => format!("lava {}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCurve {
    pub budgets: Vec<usize>,
    pub rates: Vec<f64>,
    pub corruption_count: usize,
    pub n: usize,
    pub seed: u64,
    pub kind: CorruptionKind,
}

impl DetectionCurve {
    pub fn rate_at(&self, budget: usize) -> Option<f64> {
        self.budgets
            .iter()
            .position(|&b| b == budget)
            .map(|k| self.rates[k])
    }

    /// `budget,rate`, one line per budget.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("budget,rate\n");
        for (b, r) in self.budgets.iter().zip(&self.rates) {
            out.push_str(&format!("{b},{r:?}\n"));
        }
        out
    }
}

fn check_budgets(budgets: &[usize], lo: usize, n: usize) -> Result<()> {
    let mut prev = None;
    for &b in budgets {
        if b < lo || b > n || prev.is_some_and(|p| b <= p) {
            return Err(Error::BudgetOutOfRange { budget: b, n });
        }
        prev = Some(b);
    }
    Ok(())
}

/// Ten evenly spaced budgets up to `n / 2`, deduplicated, each at least one.
pub fn default_budgets(n: usize) -> Vec<usize> {
    let half = (n / 2).max(1);
    let mut out: Vec<usize> = (1..=10)
        .map(|k| ((k as f64 * half as f64 / 10.0).round() as usize).clamp(1, half))
        .collect();
    out.dedup();
    out
}

/// Detection rate of `ranking` (lowest value first) at each budget.
pub fn detection_rates(
    ranking: &[usize],
    corrupted: &[usize],
    budgets: &[usize],
) -> Result<Vec<f64>> {
    let n = ranking.len();
    check_budgets(budgets, 1, n)?;
    if corrupted.is_empty() {
        return Err(Error::InvalidArgument(
            "no corrupted points to detect".into(),
        ));
    }
    let mut bad = vec![false; n];
    for &i in corrupted {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "corrupted index {i} >= n = {n}"
            )));
        }
        bad[i] = true;
    }
    let total = bad.iter().filter(|&&b| b).count();
    let mut found = 0;
    let mut cursor = 0;
    let mut rates = Vec::with_capacity(budgets.len());
    for &b in budgets {
        while cursor < b {
            found += bad[ranking[cursor]] as usize;
            cursor += 1;
        }
        rates.push(found as f64 / total as f64);
    }
    Ok(rates)
}

pub fn detection_curve(
    report: &ValuationReport,
    record: &CorruptionRecord,
    budgets: &[usize],
) -> Result<DetectionCurve> {
    let rates = detection_rates(&report.ranking_train, &record.corrupted_indices, budgets)?;
    Ok(DetectionCurve {
        budgets: budgets.to_vec(),
        rates,
        corruption_count: record.corrupted_indices.len(),
        n: report.ranking_train.len(),
        seed: record.seed,
        kind: record.kind,
    })
}

/// Expected detection rate of a uniformly random ranking: `b / n`.
pub fn random_baseline_rate(budget: usize, n: usize) -> f64 {
    budget as f64 / n as f64
}

/// Mean and standard deviation of the detection rate over `trials` random
/// permutations.
pub fn simulate_random_baseline(
    n: usize,
    corrupted: &[usize],
    budget: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = rng::seeded(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rates = Vec::with_capacity(trials);
    for _ in 0..trials {
        perm.shuffle(&mut rng);
        rates.push(detection_rates(&perm, corrupted, &[budget])?[0]);
    }
    Ok((crate::stats::mean(&rates), crate::stats::std_dev(&rates)))
}

/// `budget,distance`, one line per budget.
pub fn distance_curve_csv(budgets: &[usize], distances: &[f64]) -> String {
    let mut out = String::from("budget,distance\n");
    for (b, d) in budgets.iter().zip(distances) {
        out.push_str(&format!("{b},{d:?}\n"));
    }
    out
}

/// Dataset distance after dropping the `b` lowest-valued training points,
/// for each budget. Budget 0 is the original distance.
pub fn distance_after_removal(
    dt: &LabeledDataset,
    dv: &LabeledDataset,
    report: &ValuationReport,
    budgets: &[usize],
    cfg: &HybridCostConfig,
) -> Result<Vec<f64>> {
    let n = dt.len();
    if report.ranking_train.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: report.ranking_train.len(),
        });
    }
    check_budgets(budgets, 0, n.saturating_sub(1))?;
    budgets
        .par_iter()
        .map(|&b| {
            let remaining = dt.remove(&report.ranking_train[..b])?;
            Ok(dataset_distance(&remaining, dv, cfg)?.distance)
        })
        .collect()
}

/// Distance after dropping `budget` uniformly random training points.
pub fn distance_after_random_removal(
    dt: &LabeledDataset,
    dv: &LabeledDataset,
    budget: usize,
    seed: u64,
    cfg: &HybridCostConfig,
) -> Result<f64> {
    check_budgets(&[budget], 0, dt.len().saturating_sub(1))?;
    let drop = rng::sample_indices(&mut rng::seeded(seed), dt.len(), budget);
    Ok(dataset_distance(&dt.remove(&drop)?, dv, cfg)?.distance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Best,
    Worst,
}

/// Indices of the `keep` highest-valued (`Best`) or lowest-valued (`Worst`)
/// training points.
///
/// Both directions cut the same order, value descending with ties to the
/// lower index, so best-`k` and worst-`(n - k)` always partition the points.
pub fn select_subset(
    report: &ValuationReport,
    keep: usize,
    direction: Selection,
) -> Result<Vec<usize>> {
    let n = report.values_train.len();
    if keep == 0 || keep > n {
        return Err(Error::KeepOutOfRange { keep, n });
    }
    let v = &report.values_train;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    Ok(match direction {
        Selection::Best => order[..keep].to_vec(),
        Selection::Worst => order[n - keep..].iter().rev().copied().collect(),
    })
}

/// Distance and valuation of `dt` against `dv`.
pub fn value_dataset(
    dt: &LabeledDataset,
    dv: &LabeledDataset,
    cfg: &HybridCostConfig,
) -> Result<(f64, ValuationReport)> {
    let result = dataset_distance(dt, dv, cfg)?;
    Ok((result.distance, calibrated_gradients(&result.solution)))
}

/// Corruption applied by [`detection_run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorruptionSpec {
    Mislabel { fraction: f64 },
    FeatureNoise { fraction: f64, sigma_scale: f64 },
}

impl CorruptionSpec {
    pub fn apply(
        &self,
        ds: &LabeledDataset,
        seed: u64,
    ) -> Result<(LabeledDataset, CorruptionRecord)> {
        match *self {
            CorruptionSpec::Mislabel { fraction } => corruption::mislabel(ds, fraction, seed),
            CorruptionSpec::FeatureNoise {
                fraction,
                sigma_scale,
            } => corruption::feature_noise(ds, fraction, sigma_scale, seed),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRun {
    pub record: CorruptionRecord,
    pub distance: f64,
    pub curve: DetectionCurve,
    #[serde(skip)]
    pub report: Option<ValuationReport>,
}

/// Corrupts `clean`, values it against `valid`, and scores the ranking.
pub fn detection_run(
    clean: &LabeledDataset,
    valid: &LabeledDataset,
    corruption: CorruptionSpec,
    seed: u64,
    budgets: &[usize],
    cfg: &HybridCostConfig,
) -> Result<DetectionRun> {
    let (train, record) = corruption.apply(clean, seed)?;
    let (distance, report) = value_dataset(&train, valid, cfg)?;
    let curve = detection_curve(&report, &record, budgets)?;
    Ok(DetectionRun {
        record,
        distance,
        curve,
        report: Some(report),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityTable {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `distances[s][f]`: seed `s`, mislabel fraction `f`.
    pub distances: Vec<Vec<f64>>,
    /// Whether each seed's row strictly increases.
    pub strictly_increasing: Vec<bool>,
}

impl MonotonicityTable {
    pub fn all_increasing(&self) -> bool {
        self.strictly_increasing.iter().all(|&b| b)
    }

    /// `seed,fraction,distance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,fraction,distance\n");
        for (s, row) in self.seeds.iter().zip(&self.distances) {
            for (f, d) in self.fractions.iter().zip(row) {
                out.push_str(&format!("{s},{f:?},{d:?}\n"));
            }
        }
        out
    }
}

/// Seeds used for the training draw, the validation draw and the mislabel
/// step of one monotonicity row.
pub fn monotonicity_seeds(seed: u64) -> (u64, u64, u64) {
    (
        seed.wrapping_mul(3),
        seed.wrapping_mul(3).wrapping_add(1),
        seed.wrapping_mul(3).wrapping_add(2),
    )
}

/// Distance from mislabeled training draws to a clean validation draw, per
/// seed and fraction. A fraction of zero uses the clean training draw.
pub fn monotonicity_experiment(
    blobs: &GaussianBlobs,
    fractions: &[f64],
    seeds: &[u64],
    cfg: &HybridCostConfig,
) -> Result<MonotonicityTable> {
    if fractions.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "fractions must be strictly ascending".into(),
        ));
    }
    let distances: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let (train_seed, valid_seed, corrupt_seed) = monotonicity_seeds(seed);
            let train = blobs.generate(train_seed)?;
            let valid = blobs.generate(valid_seed)?;
            fractions
                .par_iter()
                .map(|&f| {
                    let dt = if f == 0.0 {
                        train.clone()
                    } else {
                        corruption::mislabel(&train, f, corrupt_seed)?.0
                    };
                    Ok(dataset_distance(&dt, &valid, cfg)?.distance)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let strictly_increasing = distances
        .iter()
        .map(|row| row.windows(2).all(|w| w[0] < w[1]))
        .collect();
    Ok(MonotonicityTable {
        fractions: fractions.to_vec(),
        seeds: seeds.to_vec(),
        distances,
        strictly_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::ot::{SolverMode, TransportSolution};

    fn report_with_values(values: &[f64]) -> ValuationReport {
        let n = values.len();
        let sol = TransportSolution {
            plan: Matrix::zeros(n, 1),
            dual_f: values.iter().map(|v| -v).collect(),
            dual_g: vec![0.0],
            objective: 0.0,
            residual: 0.0,
            iterations: 0,
            mode: SolverMode::ExactLp,
            epsilon: 0.0,
            converged: true,
            row_mass: vec![1.0 / n as f64; n],
            col_mass: vec![1.0],
        };
        calibrated_gradients(&sol)
    }

    fn record(indices: Vec<usize>) -> CorruptionRecord {
        CorruptionRecord {
            kind: CorruptionKind::Mislabel,
            seed: 0,
            params: Default::default(),
            corrupted_indices: indices,
        }
    }

    #[test]
    fn perfect_ranking_hits_one() {
        let r = report_with_values(&[0.5, -1.0, 0.2, -2.0, 0.9]);
        let c = detection_curve(&r, &record(vec![1, 3]), &[1, 2, 5]).unwrap();
        assert_eq!(c.rates, vec![0.5, 1.0, 1.0]);
    }

    #[test]
    fn budgets_validated() {
        let r = report_with_values(&[0.0, 1.0, 2.0]);
        for bad in [vec![0], vec![4], vec![2, 2], vec![3, 1]] {
            assert!(matches!(
                detection_curve(&r, &record(vec![0]), &bad),
                Err(Error::BudgetOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn default_grid() {
        assert_eq!(
            default_budgets(100),
            vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]
        );
        assert_eq!(default_budgets(4), vec![1, 2]);
        assert_eq!(default_budgets(1), vec![1]);
    }

    #[test]
    fn subset_selection() {
        let r = report_with_values(&[0.5, 2.0, 2.0, -1.0]);
        assert_eq!(select_subset(&r, 1, Selection::Best).unwrap(), vec![1]);
        assert_eq!(select_subset(&r, 1, Selection::Worst).unwrap(), vec![3]);
        let mut all = select_subset(&r, 4, Selection::Best).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        for k in 1..4 {
            let mut both = select_subset(&r, k, Selection::Best).unwrap();
            both.extend(select_subset(&r, 4 - k, Selection::Worst).unwrap());
            both.sort();
            assert_eq!(both, vec![0, 1, 2, 3]);
        }
        assert!(matches!(
            select_subset(&r, 0, Selection::Best),
            Err(Error::KeepOutOfRange { .. })
        ));
    }

    #[test]
    fn random_baseline_near_b_over_n() {
        let corrupted: Vec<usize> = (0..50).collect();
        let (mean, sd) = simulate_random_baseline(200, &corrupted, 40, 1000, 3).unwrap();
        let expected = random_baseline_rate(40, 200);
        assert!(
            (mean - expected).abs() <= 3.0 * sd / (1000f64).sqrt(),
            "{mean} vs {expected}"
        );
    }

    #[test]
    fn csv_layout() {
        let r = report_with_values(&[0.0, 1.0]);
        let c = detection_curve(&r, &record(vec![0]), &[1, 2]).unwrap();
        assert_eq!(c.to_csv(), "budget,rate\n1,1.0\n2,1.0\n");
        assert_eq!(
            distance_curve_csv(&[0, 3], &[0.5, 0.25]),
            "budget,distance\n0,0.5\n3,0.25\n"
        );
    }
}
