//! ICA-based causal discovery: FastICA, ICA-LiNGAM for cross-sectional
//! data, and a two-stage VAR-LiNGAM for time series.

mod compare;
mod ica;
mod lingam;

pub use compare::{compare_graphs, EdgeComparison, GraphComparison};
pub use ica::{fastica, IcaConfig, IcaResult};
pub use lingam::{lingam_fit, var_lingam_fit, LingamConfig, LingamResult, VarLingamResult, DEFAULT_PRUNE_THRESHOLD};
