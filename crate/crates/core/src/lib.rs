//! Learning-agnostic data valuation with class-wise optimal transport.
//!
//! The distance between a training set and a validation set is measured with
//! a hierarchical Wasserstein distance whose ground cost mixes feature
//! distance with an inner OT distance between the per-label conditional
//! feature distributions. The dual potentials of that transport problem give
//! each datapoint a *calibrated gradient*: the rate at which the distance
//! changes when probability mass is shifted onto the point while the total
//! mass stays at one. The negated gradient is the point's value.
//!
//! Module map:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`dataset`] | [`LabeledDataset`], CSV ingestion, subsampling, duplication |
//! | [`corruption`] | seeded mislabel / noise / backdoor / collision / injection generators |
//! | [`ot`] | cost matrices, log-stabilized Sinkhorn, network simplex, log-barrier solver |
//! | [`hierarchical`] | label distance table, hybrid cost, dataset distance |
//! | [`valuation`] | calibrated gradients, first-order prediction, radius, oracle checks |
//! | [`detect`] | detection curves, distance after removal, subset selection, experiments |
//! | [`oracle`] | generated fixtures and the exact/barrier/entropic cross-checks |
//! | [`synthetic`] | Gaussian blob fixtures |
//!
//! ```
//! use lava::{dataset_distance, calibrated_gradients, HybridCostConfig};
//! use lava::synthetic::GaussianBlobs;
//!
//! let blobs = GaussianBlobs { classes: 2, dim: 2, per_class: 10, separation: 5.0, spread: 1.0 };
//! let train = blobs.generate(1).unwrap();
//! let valid = blobs.generate(2).unwrap();
//! let result = dataset_distance(&train, &valid, &HybridCostConfig::default()).unwrap();
//! let report = calibrated_gradients(&result.solution);
//! assert_eq!(report.values_train.len(), 20);
//! ```

pub mod corruption;
pub mod dataset;
pub mod detect;
mod error;
pub mod hierarchical;
pub mod matrix;
pub mod oracle;
pub mod ot;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod valuation;

pub use corruption::{CorruptionKind, CorruptionRecord};
pub use dataset::{DatasetManifest, LabeledDataset, MassPolicy};
pub use detect::DetectionCurve;
pub use error::{Error, Result};
pub use hierarchical::{
    dataset_distance, DatasetDistance, HybridCostConfig, LabelDistanceTable, MissingLabelPolicy,
};
pub use matrix::Matrix;
pub use ot::{CostMatrix, SolverConfig, SolverMode, TransportSolution};
pub use valuation::{calibrated_gradients, Side, ValuationReport};
