//! Averaged constrained binomial mixture (ACBM) item-response model.
//!
//! Questions are partitioned into clusters; within each cluster the examinees
//! follow a finite binomial mixture whose component count is capped by
//! `floor((|c| + 1) / 2)`. Inference is a collapsed Gibbs sampler over both
//! partition levels, summarized with Dahl's least-squares estimate.
//!
//! Main entry points:
//! - [`sampler::run_chain`] runs the sampler on a [`ResponseMatrix`];
//! - [`summarize::summarize_trace`] turns a chain into a [`FitSummary`];
//! - [`dgp`] simulates cohorts with known ground truth;
//! - [`metrics`] scores a fit against the truth;
//! - [`rasch`] fits the Rasch baseline by marginal maximum likelihood;
//! - [`bench`] runs seeded Monte Carlo replications.

pub mod assignment;
pub mod bench;
pub mod cli;
pub mod dgp;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod priors;
pub mod quadrature;
pub mod rasch;
pub mod sampler;
pub mod state;
pub mod summarize;
pub mod trace;

pub use error::{Error, Result};
pub use matrix::{validate_matrix, AccuracyMatrix, ResponseMatrix};
pub use metrics::GroundTruth;
pub use model::{Hyperparams, Model};
pub use partition::{kmax_bound, ColumnPartition, Partition, RowPartition};
pub use sampler::{run_chain, InitMode, SamplerConfig};
pub use state::{BlockSuffStats, ModelState};
pub use summarize::FitSummary;
pub use trace::{ChainTrace, StateRecord};
