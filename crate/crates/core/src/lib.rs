//! Simulation, featurization and accuracy-weighted ensemble detection of
//! ARP spoofing on IoT networks.
//!
//! The crate is organised as a pipeline:
//!
//! * [`sim`] generates labeled ARP traffic on a simulated LAN.
//! * [`featurize`] turns frames into windowed per-source feature vectors.
//! * [`resample`] balances the training data with SMOTE.
//! * [`classifiers`] holds the tree, forest and MLP learners.
//! * [`ensemble`] combines them by accuracy-weighted majority vote.
//! * [`metrics`] computes confusion matrices and derived scores.
//! * [`drift`] detects feature-distribution shift and retrains.
//! * [`stages`] and [`pipeline`] wire everything into reproducible runs.

pub mod artifact;
pub mod classifiers;
pub mod config;
pub mod drift;
pub mod ensemble;
pub mod error;
pub mod featurize;
mod label;
pub mod metrics;
pub mod model_io;
pub mod pipeline;
pub mod resample;
pub mod rng;
pub mod sim;
pub mod stages;

pub use config::ExperimentConfig;
pub use ensemble::{evaluate, train_ensemble, EnsembleConfig, EnsembleModel};
pub use error::{Error, Result};
pub use featurize::{FeatureVector, LabeledDataset};
pub use label::Label;
