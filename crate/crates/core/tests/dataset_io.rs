use std::collections::BTreeMap;

use lava::corruption::{self, corruption_count};
use lava::dataset::{duplicate_concat, load_csv, parse_csv, subsample};
use lava::synthetic::GaussianBlobs;
use lava::{Error, LabeledDataset, MassPolicy, Matrix};
use proptest::prelude::*;

fn blobs(seed: u64) -> LabeledDataset {
    GaussianBlobs { classes: 3, dim: 4, per_class: 20, separation: 3.0, spread: 1.0 }
        .generate(seed)
        .unwrap()
}

fn same_rows(a: &LabeledDataset, i: usize, b: &LabeledDataset, j: usize) -> bool {
    a.features().row(i) == b.features().row(j) && a.labels()[i] == b.labels()[j]
}

#[test]
fn round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.csv");
    let masses: Vec<f64> = {
        let raw: Vec<f64> = (0..60).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let total: f64 = raw.iter().sum();
        let mut m: Vec<f64> = raw.iter().map(|x| x / total).collect();
        m[0] += 1.0 - m.iter().sum::<f64>();
        m
    };
    let ds = blobs(4).with_masses(masses).unwrap();
    ds.write_csv(&path).unwrap();
    let back = load_csv(&path, MassPolicy::Column).unwrap();
    assert_eq!(back.features().as_slice(), ds.features().as_slice());
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.masses(), ds.masses());
}

#[test]
fn manifest_checksum_is_recomputable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.csv");
    blobs(1).write_csv(&path).unwrap();
    let ds = load_csv(&path, MassPolicy::Uniform).unwrap();
    let manifest = ds.manifest().unwrap();
    assert_eq!((manifest.n, manifest.d, manifest.label_universe), (60, 4, 3));
    assert_eq!(manifest.checksum.len(), 64);
    assert!(manifest.verify().unwrap());
    let json: serde_json::Value = serde_json::from_str(&manifest.to_json().unwrap()).unwrap();
    assert_eq!(json["V"], 3);
    assert_eq!(json["mass_policy"], "uniform");

    std::fs::write(&path, "f0,label\n1,0\n").unwrap();
    assert!(!manifest.verify().unwrap());
}

#[test]
fn malformed_inputs() {
    let bad = |s: &str, p| parse_csv(s.as_bytes(), p);
    assert!(matches!(bad("f0,f1\n1,2\n", MassPolicy::Uniform), Err(Error::MalformedHeader(_))));
    assert!(matches!(bad("f1,label\n1,0\n", MassPolicy::Uniform), Err(Error::MalformedHeader(_))));
    assert!(matches!(bad("f0,label,extra\n1,0,2\n", MassPolicy::Uniform), Err(Error::MalformedHeader(_))));
    assert!(matches!(bad("f0,label\n1,0\n", MassPolicy::Column), Err(Error::MalformedHeader(_))));
    assert!(matches!(bad("f0,label\nx,0\n", MassPolicy::Uniform), Err(Error::Parse { row: 0, .. })));
    assert!(matches!(bad("f0,label\n1,-1\n", MassPolicy::Uniform), Err(Error::Parse { .. })));
    assert!(matches!(bad("f0,label\n1,0\nNaN,1\n", MassPolicy::Uniform), Err(Error::NonFiniteFeature { row: 1 })));
    assert!(matches!(bad("f0,label\n", MassPolicy::Uniform), Err(Error::EmptyDataset)));
    assert!(matches!(
        bad("f0,label,mass\n1,0,0.5\n2,1,0.6\n", MassPolicy::Column),
        Err(Error::MassSumMismatch { .. })
    ));
    assert!(matches!(
        bad("f0,label,mass\n1,0,1.5\n2,1,-0.5\n", MassPolicy::Column),
        Err(Error::NegativeMass { row: 1 })
    ));
    // A mass column is ignored under the uniform policy.
    let ds = bad("f0,label,mass\n1,0,0.9\n2,1,0.1\n", MassPolicy::Uniform).unwrap();
    assert_eq!(ds.masses(), &[0.5, 0.5]);
}

#[test]
fn subsample_contracts() {
    let ds = blobs(2);
    let full = subsample(&ds, 60, 9).unwrap();
    let mut seen = vec![false; 60];
    for i in 0..60 {
        let j = (0..60).find(|&j| same_rows(&full, i, &ds, j)).unwrap();
        seen[j] = true;
    }
    assert!(seen.iter().all(|&s| s));
    assert!(full.masses().iter().all(|&m| (m - 1.0 / 60.0).abs() < 1e-15));

    let one = subsample(&ds, 1, 3).unwrap();
    assert_eq!(one.masses(), &[1.0]);
    assert_eq!(subsample(&ds, 17, 5).unwrap(), subsample(&ds, 17, 5).unwrap());
    assert!(matches!(subsample(&ds, 61, 0), Err(Error::KTooLarge { k: 61, n: 60 })));
}

#[test]
fn duplication_divides_masses() {
    let ds = LabeledDataset::uniform(Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]), vec![0, 1, 0, 1, 0]).unwrap();
    assert_eq!(duplicate_concat(&ds, 1).unwrap(), ds);
    let two = duplicate_concat(&ds, 2).unwrap();
    assert_eq!(two.len(), 10);
    assert!(two.masses().iter().all(|&m| (m - 0.1).abs() < 1e-15));
    assert!(duplicate_concat(&ds, 0).is_err());
}

#[test]
fn injection_appends_donor_rows() {
    let ds = blobs(3);
    let donor = GaussianBlobs { classes: 1, dim: 4, per_class: 90, separation: 0.0, spread: 1.0 }
        .generate(8)
        .unwrap();
    let counts: BTreeMap<usize, usize> = [(0, 30), (1, 30), (2, 30)].into_iter().collect();
    let (out, record) = corruption::irrelevant_injection(&ds, &donor, &counts).unwrap();
    assert_eq!(out.len(), 150);
    assert_eq!(record.corrupted_indices, (60..150).collect::<Vec<_>>());
    assert!(out.masses().iter().all(|&m| (m - 1.0 / 150.0).abs() < 1e-15));
    let (same, rec) = corruption::irrelevant_injection(&ds, &donor, &BTreeMap::new()).unwrap();
    assert_eq!(same, ds);
    assert!(rec.corrupted_indices.is_empty());
}

#[derive(Debug, Clone)]
enum Gen {
    Mislabel(f64),
    Noise(f64, f64),
    Backdoor(f64, usize),
    Collision(usize, f64),
}

fn apply(ds: &LabeledDataset, g: &Gen, seed: u64) -> (LabeledDataset, lava::CorruptionRecord, usize) {
    let n = ds.len();
    match *g {
        Gen::Mislabel(f) => {
            let (o, r) = corruption::mislabel(ds, f, seed).unwrap();
            (o, r, corruption_count(f, n))
        }
        Gen::Noise(f, s) => {
            let (o, r) = corruption::feature_noise(ds, f, s, seed).unwrap();
            (o, r, corruption_count(f, n))
        }
        Gen::Backdoor(f, t) => {
            let (o, r) = corruption::backdoor_trigger(ds, f, t, &[0, 2], 9.0, seed).unwrap();
            (o, r, corruption_count(f, n))
        }
        Gen::Collision(c, a) => {
            let (o, r) = corruption::feature_collision(ds, c, 1, &[5.0, 5.0, 5.0, 5.0], a, seed).unwrap();
            (o, r, c)
        }
    }
}

fn any_gen() -> impl Strategy<Value = Gen> {
    prop_oneof![
        (0.01f64..=1.0).prop_map(Gen::Mislabel),
        (0.01f64..=1.0, 0.1f64..3.0).prop_map(|(f, s)| Gen::Noise(f, s)),
        (0.01f64..=1.0, 0usize..3).prop_map(|(f, t)| Gen::Backdoor(f, t)),
        (0usize..=20, 0.0f64..=1.0).prop_map(|(c, a)| Gen::Collision(c, a)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generators_are_pure_and_local(g in any_gen(), seed in 0u64..10_000, data_seed in 0u64..50) {
        let ds = blobs(data_seed);
        let (a, ra, expected) = apply(&ds, &g, seed);
        let (b, rb, _) = apply(&ds, &g, seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&ra, &rb);
        prop_assert_eq!(ra.corrupted_indices.len(), expected);
        prop_assert!(ra.corrupted_indices.windows(2).all(|w| w[0] < w[1]));
        let mask = ra.mask(ds.len());
        for i in 0..ds.len() {
            if !mask[i] {
                prop_assert!(same_rows(&a, i, &ds, i));
            }
        }
        if let Gen::Mislabel(_) = g {
            for &i in &ra.corrupted_indices {
                prop_assert_ne!(a.labels()[i], ds.labels()[i]);
            }
        }
        let back = lava::CorruptionRecord::from_json(&ra.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, ra);
    }

    #[test]
    fn subsample_is_deterministic(k in 1usize..=60, seed in 0u64..u64::MAX) {
        let ds = blobs(0);
        let a = subsample(&ds, k, seed).unwrap();
        prop_assert_eq!(&a, &subsample(&ds, k, seed).unwrap());
        prop_assert_eq!(a.len(), k);
    }
}
