//! Pool-based active learning with local-risk query selection.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: CSV loading, standardization and L/U/T index partitions.
//! - [`classifier`]: k-NN and logistic regression, 0/1 loss, test risk.
//! - [`local_risk`]: Nadaraya-Watson estimate of the local risk with a
//!   Gaussian kernel and leave-one-out bandwidth selection.
//! - [`selection`]: passive, uncertainty, local-risk batch and survey
//!   (conditional Poisson) strategies.
//! - [`experiment`]: the simulated labeling loop and learning curves.
//! - [`output`]: result CSV files.
//! - [`selftest`]: reproducible numerical self-checks.

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod local_risk;
pub mod output;
pub mod selection;
pub mod selftest;

pub use classifier::{ClassifierKind, ClassifierModel, ClassifierSpec};
pub use dataset::{CsvOptions, Dataset, IndexPartition, LabelColumn};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentResult, LearningCurve};
pub use local_risk::{BandwidthGrid, GridSpec, LossMode, RiskConfig, RiskField};
pub use selection::{InclusionProbabilities, Strategy};
