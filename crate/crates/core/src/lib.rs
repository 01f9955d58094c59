//! Benchmark for whether GAN-family generators preserve causal structure.
//!
//! Data is drawn from known linear structural causal models ([`scm`]),
//! a generator is trained on it ([`gan`], [`timegan`], [`causalgan`]),
//! and causal estimates ([`inference`], [`discovery`]) on the generated and
//! synthetic datasets are compared by the [`harness`].

pub mod causalgan;
pub mod dataset;
pub mod discovery;
pub mod error;
pub mod gan;
pub mod graph;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod nn;
pub mod scm;
pub mod timegan;

pub use dataset::PanelDataset;
pub use error::{Error, Result};
