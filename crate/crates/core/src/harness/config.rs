use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causalgan::CausalGanConfig;
use crate::discovery::LingamConfig;
use crate::error::{Error, Result};
use crate::gan::GanConfig;
use crate::scm::{model_a_with, model_b_with, ModelParams, NoiseDist, ScmSpec};
use crate::timegan::TimeGanConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Gan,
    Timegan,
    Causalgan,
    None,
}

impl GeneratorKind {
    pub fn label(self) -> &'static str {
        match self {
            GeneratorKind::Gan => "GAN",
            GeneratorKind::Timegan => "TimeGAN",
            GeneratorKind::Causalgan => "CausalGAN",
            GeneratorKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ols,
    Ar,
    Lingam,
    VarLingam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Truth,
    Discovered,
}

fn default_n() -> usize {
    10_000
}

fn default_repetitions() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("causalbench-out")
}

/// One experiment, read from a single JSON document. Generator seeds inside
/// the hyperparameter blocks are replaced by per-run derived seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelKind,
    /// Noise law for every variable; Gaussian with sd 0.5 when absent.
    #[serde(default)]
    pub noise: Option<NoiseDist>,
    #[serde(default = "default_n")]
    pub n_samples: usize,
    #[serde(default = "default_n")]
    pub n_synthetic: usize,
    pub generator: GeneratorKind,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub gan: GanConfig,
    #[serde(default)]
    pub timegan: TimeGanConfig,
    #[serde(default)]
    pub causalgan: CausalGanConfig,
    /// Where CausalGAN gets its graph. Required for `causalgan`.
    #[serde(default)]
    pub graph_source: Option<GraphSource>,
    #[serde(default)]
    pub lingam: LingamConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, generator: GeneratorKind, estimators: Vec<EstimatorKind>) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            model,
            noise: None,
            n_samples: default_n(),
            n_synthetic: default_n(),
            generator,
            estimators,
            repetitions: default_repetitions(),
            master_seed: 0,
            gan: GanConfig::default(),
            timegan: TimeGanConfig::default(),
            causalgan: CausalGanConfig::default(),
            graph_source: (generator == GeneratorKind::Causalgan).then_some(GraphSource::Discovered),
            lingam: LingamConfig::default(),
            output_dir: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.n_samples < 10 || self.n_synthetic < 10 {
            return fail("n_samples and n_synthetic must be at least 10".into());
        }
        if self.estimators.is_empty() {
            return fail("no estimators selected".into());
        }
        if self.generator == GeneratorKind::Causalgan && self.graph_source.is_none() {
            return fail("causalgan needs graph_source (truth or discovered)".into());
        }
        match self.generator {
            GeneratorKind::Gan => self.gan.validate()?,
            GeneratorKind::Timegan => self.timegan.validate(5)?,
            _ => {}
        }
        self.spec().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn noise_dist(&self) -> NoiseDist {
        self.noise.unwrap_or(NoiseDist::gaussian(0.0, 0.5))
    }

    pub fn spec(&self) -> Result<ScmSpec> {
        let params = ModelParams::with_noise(self.noise_dist());
        match self.model {
            ModelKind::A => model_a_with(&params),
            ModelKind::B => model_b_with(&params),
        }
    }

    pub fn uses(&self, e: EstimatorKind) -> bool {
        self.estimators.contains(&e)
    }
}
