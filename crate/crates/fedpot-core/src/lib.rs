//! Core algorithms for the FedPot federated-learning simulator: dataset
//! handling and partitioning, data-quality estimation, radio/compute cost
//! modelling, contract construction and participant selection, a small
//! from-scratch MLP learner, and the federated round loop with trust- and
//! verification-based aggregation.
//!
//! Everything here is deterministic given the seeds in the configuration;
//! parallel sections collect results in index order so reruns are
//! bit-identical.

pub mod config;
pub mod contract;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod learner;
pub mod quality;
pub mod radio_cost;
pub mod seeding;

pub use config::{parse_config, ExperimentConfig};
pub use contract::{ContractItem, ContractMenu, SelectionResult};
pub use dataset::{LabeledDataset, PartitionMode, PartitionPlan, Sample};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentOutcome, Summary};
pub use federation::{
    AggregationScheme, AttackType, FederationRun, RoundReport, VerificationConfig,
    VerificationMethod,
};
pub use learner::{EvalMetrics, MlpArchitecture, ParameterVector, TrainingConfig};
pub use quality::{QualityEstimate, ReferenceMode};
pub use radio_cost::{ChannelSpec, ComputeSpec, CostBreakdown};
