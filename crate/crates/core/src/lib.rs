//! Simulator for personalized federated learning with generative
//! (Gaussian) classifier heads.
//!
//! A shared MLP body is trained federatedly while every client keeps its own
//! class-conditional Gaussian over the body's features. Each client's
//! Gaussian is an interpolation between local estimates and the
//! federation-wide ones, with the interpolation weight β picked by
//! cross-validation on the client's own features.
//!
//! The crate also contains the baselines (local training, FedAvg, FedAvg with
//! fine-tuning), a synthetic benchmark generator with label skew, covariate
//! shift and data scarcity, and a Monte Carlo lab for the interpolated
//! mean estimator's error bound.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas.
#![allow(clippy::needless_range_loop)]

pub mod adaptation;
pub mod benchmark;
pub mod classifier;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod federation;
pub mod gauss;
pub mod linalg;
pub mod mlp;
pub mod rng;
pub mod theory;

pub use adaptation::{adapt, AdaptOptions, BetaMode, BetaResult};
pub use classifier::{build_classifier, GenerativeClassifier};
pub use config::{parse_config, ExperimentConfig};
pub use datagen::{ClientShard, CorruptionKind, CorruptionSpec, Dataset, SyntheticTask, SyntheticTaskSpec};
pub use error::{Error, Result};
pub use federation::{run_federation, AlgorithmKind, FederationConfig, FederationOutcome};
pub use gauss::{ClassGaussian, CovOptions, LabeledFeatures};
pub use linalg::Mat;
pub use mlp::{MlpParams, TrainHyper};
pub use theory::TheoremScenario;
