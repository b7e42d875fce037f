//! Tooling for datasets built from perturbation clusters: a seed yes/no
//! question plus human-written minimal edits of it.
//!
//! The crate covers the data side of the workflow:
//!
//! - [`model`]: instances, clusters, datasets, validation and summary statistics
//! - [`io`]: line-delimited JSON records and CSV reports
//! - [`verification`]: two-phase majority-vote filtering of annotated questions
//! - [`subsample`]: the cluster cost model and budget-constrained subsampling
//! - [`metrics`]: accuracy and the cluster consensus score `CS(k)`
//! - [`sweep`]: experiment grids, manifest emission, result aggregation and a
//!   synthetic responder for exercising the pipeline without a trained model
//! - [`cli`]: the `perturbkit` command-line front end
//!
//! Runnable walkthroughs of each capability live under `examples/`.

pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod subsample;
pub mod sweep;
pub mod synthetic;
pub mod verification;

pub use error::{Error, Result};
pub use metrics::{accuracy, consensus_curve, consensus_score, ConsensusReport, PredictionSet};
pub use model::{compute_stats, Cluster, Dataset, DatasetStats, Instance, Kind, Label, Split};
pub use subsample::{cluster_cost, max_uniform_clusters, replicate, subsample, BudgetSpec, SubsampleManifest};
