use lava::dataset::duplicate_concat;
use lava::detect::{self, CorruptionSpec, Selection};
use lava::hierarchical::{dataset_distance, HybridCostConfig, MissingLabelPolicy};
use lava::ot::{self, pairwise_distances, CostMatrix, GroundMetric, SolverConfig};
use lava::synthetic::GaussianBlobs;
use lava::{Error, LabeledDataset, Matrix};

fn blobs(classes: usize, per_class: usize, seed: u64) -> LabeledDataset {
    GaussianBlobs { classes, dim: 3, per_class, separation: 3.0, spread: 1.0 }
        .generate(seed)
        .unwrap()
}

fn line(xs: &[f64], labels: &[usize]) -> LabeledDataset {
    let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
    LabeledDataset::uniform(Matrix::from_rows(&rows), labels.to_vec()).unwrap()
}

#[test]
fn self_distance_vanishes_in_exact_mode() {
    for seed in 0..3 {
        let ds = blobs(3, 8, seed);
        let d = dataset_distance(&ds, &ds, &HybridCostConfig::oracle()).unwrap();
        assert!(d.distance <= 1e-9, "seed {seed}: {}", d.distance);
        assert!(d.converged());
    }
}

#[test]
fn entropic_self_distance_shrinks_with_epsilon() {
    // The entropic plan spreads mass off the diagonal, so the transport cost
    // of a dataset to itself is positive and falls with epsilon.
    let ds = blobs(2, 10, 7);
    let mut last = f64::INFINITY;
    for eps in [0.5, 0.1, 0.02] {
        let d = dataset_distance(&ds, &ds, &HybridCostConfig::entropic(eps)).unwrap().distance;
        assert!(d < last, "eps {eps}: {d} !< {last}");
        last = d;
    }
    assert!(last < 1e-3, "{last}");
}

#[test]
fn swapping_datasets_is_symmetric() {
    let a = blobs(3, 9, 1);
    let b = blobs(3, 7, 2);
    for cfg in [HybridCostConfig::oracle(), HybridCostConfig::default()] {
        let ab = dataset_distance(&a, &b, &cfg).unwrap().distance;
        let ba = dataset_distance(&b, &a, &cfg).unwrap().distance;
        assert!((ab - ba).abs() <= 1e-6, "{ab} vs {ba}");
    }
}

#[test]
fn label_term_only_adds_cost() {
    let a = blobs(3, 9, 3);
    let b = blobs(3, 9, 4);
    let feats = pairwise_distances(a.features(), b.features(), GroundMetric::Euclidean).unwrap();
    let plain = CostMatrix::new(feats, a.masses().to_vec(), b.masses().to_vec()).unwrap();
    let features_only = ot::solve_exact_lp(&plain, &SolverConfig::exact()).unwrap().objective;
    for c_weight in [0.0, 0.5, 1.0, 3.0] {
        let cfg = HybridCostConfig { c_weight, ..HybridCostConfig::oracle() };
        let w = dataset_distance(&a, &b, &cfg).unwrap().distance;
        assert!(w >= features_only - 1e-12, "c_weight {c_weight}");
        if c_weight == 0.0 {
            assert!((w - features_only).abs() <= 1e-12);
        }
    }
}

#[test]
fn duplication_leaves_distance_unchanged() {
    for seed in 0..3 {
        let dt = blobs(3, 6, seed);
        let dv = blobs(3, 5, seed + 100);
        let base = dataset_distance(&dt, &dv, &HybridCostConfig::oracle()).unwrap().distance;
        for k in [2, 3, 5] {
            let dup = duplicate_concat(&dt, k).unwrap();
            let w = dataset_distance(&dup, &dv, &HybridCostConfig::oracle()).unwrap().distance;
            assert!((w - base).abs() <= 1e-9, "seed {seed} k {k}: {w} vs {base}");
        }
    }
}

#[test]
fn separated_line_monotone_in_mislabel_fraction() {
    let xs: Vec<f64> = (0..20).map(|i| if i < 10 { i as f64 * 0.1 } else { 10.0 + i as f64 * 0.1 }).collect();
    let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
    let clean = line(&xs, &labels);
    let mut last = -1.0;
    for (flips, fraction) in [(0, 0.0), (2, 0.1), (6, 0.3)] {
        let mut l = labels.clone();
        // Flip the first `flips` rows of alternating classes.
        for k in 0..flips {
            let i = if k % 2 == 0 { k / 2 } else { 10 + k / 2 };
            l[i] = 1 - l[i];
        }
        let dt = line(&xs, &l);
        let w = dataset_distance(&dt, &clean, &HybridCostConfig::oracle()).unwrap().distance;
        assert!(w > last, "fraction {fraction}: {w} <= {last}");
        last = w;
    }
}

#[test]
fn missing_labels() {
    let a = line(&[0.0, 1.0, 2.0], &[0, 1, 2]);
    let b = line(&[0.0, 1.0], &[0, 1]).with_label_universe(3).unwrap();
    assert!(matches!(
        dataset_distance(&a, &b, &HybridCostConfig::oracle()),
        Err(Error::MissingLabel { .. })
    ));
    let cfg = HybridCostConfig { missing_label: MissingLabelPolicy::ImputeMax, ..HybridCostConfig::oracle() };
    let d = dataset_distance(&a, &b, &cfg).unwrap();
    assert!(d.distance.is_finite());
}

#[test]
fn subset_selection_partitions() {
    let dt = blobs(3, 10, 5);
    let dv = blobs(3, 10, 6);
    let (_, report) = detect::value_dataset(&dt, &dv, &HybridCostConfig::default()).unwrap();
    for k in [1, 7, 29] {
        let mut all = detect::select_subset(&report, k, Selection::Best).unwrap();
        all.extend(detect::select_subset(&report, 30 - k, Selection::Worst).unwrap());
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
    }
}

#[test]
fn detection_run_is_deterministic() {
    let blobs = GaussianBlobs { classes: 4, dim: 4, per_class: 25, separation: 4.0, spread: 0.5 };
    let clean = blobs.generate(1).unwrap();
    let valid = blobs.generate(2).unwrap();
    let spec = CorruptionSpec::Mislabel { fraction: 0.2 };
    let run = || detect::detection_run(&clean, &valid, spec, 3, &[5, 20, 50], &HybridCostConfig::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.curve.to_csv(), b.curve.to_csv());
    assert_eq!(a.report.unwrap().to_csv(), b.report.unwrap().to_csv());
    assert_eq!(a.record.corrupted_indices.len(), 20);
    assert!(a.curve.rate_at(20).unwrap() >= 0.5);
}
