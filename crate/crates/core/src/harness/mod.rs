//! Experiment orchestration: sample generated data from a benchmark SCM,
//! check the estimators on it, train a generator, estimate again on its
//! synthetic output, and aggregate over seeded repetitions.

mod config;
mod report;
mod run;
mod seeds;

pub use config::{EstimatorKind, ExperimentConfig, GeneratorKind, GraphSource, ModelKind, SCHEMA_VERSION};
pub use report::{aggregate, render_tables, render_text, Aggregate, DatasetSummary, Rendered, Report, Summary};
pub use run::{
    artifact_path, estimate_table_parameters, run_experiment, run_one, BaselineCheck, Checkpoint, DatasetEstimates, GraphEstimate,
    ParamEstimate, RunRecord,
};
pub use seeds::{derive_seed, splitmix64, RunSeeds, Stage};
