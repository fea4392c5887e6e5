//! Multi-label classification with partially annotated labels.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! - [`dataset`]: synthetic imbalanced data and one-time FAL/PAL/PPL/SPL masking
//! - [`format`]: the plain-text dataset file format
//! - [`pseudo`]: pseudo-labels for missing entries, refreshed every epoch
//! - [`loss`]: the batch-balanced split loss and the AN/WAN/BCE baselines
//! - [`model`]: linear and one-hidden-layer classifiers with momentum SGD
//! - [`trainer`]: the epoch loop with per-epoch subsampling of missing labels
//! - [`metrics`]: average precision and mAP
//! - [`experiment`]: manifests, runs, sweeps and report tables

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod format;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod pseudo;
pub mod seed;
pub mod trainer;

pub use dataset::{apply_mask, generate_synthetic, Dataset, Label, LabelMatrix, MaskSpec, Setting, SyntheticSpec};
pub use error::{Error, Result};
pub use loss::{BatchView, LossConfig, LossOutput};
pub use metrics::{average_precision, evaluate, EvalResult};
pub use model::{Arch, ModelConfig, ModelParams, Sgd};
pub use pseudo::PseudoLabelStore;
pub use trainer::{train, EpochReport, LossKind, TrainConfig, Trainer};
