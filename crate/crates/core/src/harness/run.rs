use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{EstimatorKind, ExperimentConfig, GeneratorKind, GraphSource};
use super::report::{aggregate, render_tables, Report};
use super::seeds::RunSeeds;
use crate::causalgan::{sample_causal, train_causal_gan, TrainedCausalGan};
use crate::dataset::PanelDataset;
use crate::discovery::{compare_graphs, lingam_fit, var_lingam_fit, GraphComparison, LingamConfig};
use crate::error::{Error, Result};
use crate::gan::{sample_gan, train_gan, TrainedGan};
use crate::graph::{Edge, WeightedDag};
use crate::inference::{ar_fit, ols_fit, EstimateReport, FitOptions, RegressionSpec};
use crate::scm::{ground_truth, sample, TrueParams};
use crate::timegan::{sample_timegan_rows, train_timegan, TrainedTimeGan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEstimate {
    pub edges: Vec<Edge>,
    pub comparison: GraphComparison,
    pub identifiable: bool,
    /// VAR-LiNGAM only: `from[t-1] -> to[t]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lagged_edges: Vec<Edge>,
}

/// Everything estimated on one dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetEstimates {
    /// Benchmark parameters (`alpha`, `beta1`..`beta5`).
    pub parameters: BTreeMap<String, ParamEstimate>,
    pub regressions: Vec<EstimateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lingam: Option<GraphEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_lingam: Option<GraphEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineCheck {
    pub valid: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seeds: RunSeeds,
    pub generated: DatasetEstimates,
    pub synthetic: Option<DatasetEstimates>,
    pub baseline: BaselineCheck,
    /// Files written for this run, relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
    pub wall_time_secs: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkpoint {
    Gan(TrainedGan),
    Timegan(TrainedTimeGan),
    Causalgan(TrainedCausalGan),
}

impl Checkpoint {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PanelDataset> {
        match self {
            Checkpoint::Gan(g) => sample_gan(&g.generator, n, seed),
            Checkpoint::Timegan(t) => sample_timegan_rows(&t.nets, n, seed),
            Checkpoint::Causalgan(c) => sample_causal(&c.generator, n, seed),
        }
    }

    pub fn log_json(&self) -> Result<String> {
        Ok(match self {
            Checkpoint::Gan(g) => serde_json::to_string_pretty(&g.log)?,
            Checkpoint::Timegan(t) => serde_json::to_string_pretty(&t.log)?,
            Checkpoint::Causalgan(c) => serde_json::to_string_pretty(&c.log)?,
        })
    }
}

struct TableRegression {
    estimator: EstimatorKind,
    spec: RegressionSpec,
    params: &'static [(&'static str, &'static str)],
}

fn table_regressions() -> Vec<TableRegression> {
    vec![
        TableRegression {
            estimator: EstimatorKind::Ols,
            spec: RegressionSpec::new("x1", &[("z1", 0), ("z2", 0)]),
            params: &[("z1", "beta3"), ("z2", "beta4")],
        },
        TableRegression {
            estimator: EstimatorKind::Ols,
            spec: RegressionSpec::new("x2", &[("z2", 0)]),
            params: &[("z2", "beta5")],
        },
        TableRegression {
            estimator: EstimatorKind::Ar,
            spec: RegressionSpec::new("y", &[("y", 1), ("x1", 0), ("x2", 0)]),
            params: &[("y[t-1]", "alpha"), ("x1", "beta1"), ("x2", "beta2")],
        },
    ]
}

/// Fits the benchmark regressions selected in `estimators`. Rows that are not
/// time-ordered are treated as if they were when an AR fit is requested.
pub fn estimate_table_parameters(data: &PanelDataset, estimators: &[EstimatorKind]) -> Result<DatasetEstimates> {
    let mut out = DatasetEstimates::default();
    for reg in table_regressions() {
        if !estimators.contains(&reg.estimator) {
            continue;
        }
        let report = match reg.estimator {
            EstimatorKind::Ar => {
                let opts = if data.is_time_indexed() { FitOptions::default() } else { FitOptions::forced() };
                if !data.is_time_indexed() {
                    out.notes.push("AR fitted on rows in sampled order".into());
                }
                ar_fit(data, &reg.spec, opts)?
            }
            _ => ols_fit(data, &reg.spec)?,
        };
        for (term, name) in reg.params {
            let estimate = report.coefficient(term).expect("term present");
            let std_error = report.standard_error(term).expect("term present");
            out.parameters.insert(name.to_string(), ParamEstimate { estimate, std_error });
        }
        out.regressions.push(report);
    }
    Ok(out)
}

/// ICA failing to converge (typical on near-Gaussian data) leaves the graph
/// out and records a note instead of failing the run.
fn unconverged_as_note<T>(fit: Result<T>, label: &str, out: &mut DatasetEstimates) -> Result<Option<T>> {
    match fit {
        Ok(f) => Ok(Some(f)),
        Err(e @ Error::NoConvergence { .. }) => {
            out.notes.push(format!("{label} skipped: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn discover(
    data: &PanelDataset,
    cfg: &ExperimentConfig,
    truth: &WeightedDag,
    seed: u64,
    out: &mut DatasetEstimates,
) -> Result<()> {
    let lcfg = LingamConfig { seed, ..cfg.lingam };
    if cfg.uses(EstimatorKind::Lingam) {
        let Some(fit) = unconverged_as_note(lingam_fit(data, lcfg), "LiNGAM", out)? else {
            return Ok(());
        };
        out.lingam = Some(GraphEstimate {
            edges: fit.pruned_graph.edges().to_vec(),
            comparison: compare_graphs(&fit.pruned_graph, truth)?,
            identifiable: fit.identifiable,
            lagged_edges: Vec::new(),
        });
    }
    if cfg.uses(EstimatorKind::VarLingam) {
        if data.is_time_indexed() {
            let Some(fit) = unconverged_as_note(var_lingam_fit(data, lcfg), "VAR-LiNGAM", out)? else {
                return Ok(());
            };
            let graph = &fit.contemporaneous.pruned_graph;
            out.var_lingam = Some(GraphEstimate {
                edges: graph.edges().to_vec(),
                comparison: compare_graphs(graph, truth)?,
                identifiable: fit.contemporaneous.identifiable,
                lagged_edges: fit.lagged_edges,
            });
        } else {
            out.notes.push("VAR-LiNGAM skipped: rows carry no time order".into());
        }
    }
    Ok(())
}

fn estimate_all(data: &PanelDataset, cfg: &ExperimentConfig, truth: &WeightedDag, seed: u64) -> Result<DatasetEstimates> {
    let mut est = estimate_table_parameters(data, &cfg.estimators)?;
    discover(data, cfg, truth, seed, &mut est)?;
    Ok(est)
}

const BASELINE_SE: f64 = 5.0;

fn true_value(truth: &TrueParams, name: &str) -> f64 {
    match name {
        "alpha" => truth.alpha,
        other => {
            let i: usize = other.trim_start_matches("beta").parse().expect("beta index");
            truth.betas[i - 1]
        }
    }
}

/// Estimates on generated data must sit within 5 standard errors of the
/// truth; LiNGAM must recover the exact graph when the noise makes it
/// identifiable.
fn check_baseline(est: &DatasetEstimates, truth: &TrueParams, non_gaussian: bool) -> BaselineCheck {
    let mut failures = Vec::new();
    for (name, p) in &est.parameters {
        let t = true_value(truth, name);
        if (p.estimate - t).abs() > BASELINE_SE * p.std_error {
            failures.push(format!("{name}: {:.4} vs true {t} (se {:.2e})", p.estimate, p.std_error));
        }
    }
    if non_gaussian {
        if let Some(g) = &est.lingam {
            if !g.comparison.is_exact() {
                failures.push("lingam: generated-data graph differs from truth".into());
            }
        }
    }
    BaselineCheck { valid: failures.is_empty(), failures }
}

/// One repetition. Failures at any stage are recorded on the returned record
/// rather than propagated.
pub fn run_one(cfg: &ExperimentConfig, run: usize) -> RunRecord {
    let seeds = RunSeeds::derive(cfg.master_seed, run);
    let started = Instant::now();
    let mut record = RunRecord {
        run,
        seeds,
        generated: DatasetEstimates::default(),
        synthetic: None,
        baseline: BaselineCheck::default(),
        artifacts: BTreeMap::new(),
        wall_time_secs: 0.0,
        error: None,
    };
    if let Err(e) = run_stages(cfg, &mut record) {
        log::warn!("run {run} failed: {e}");
        record.error = Some(e.to_string());
    }
    record.wall_time_secs = started.elapsed().as_secs_f64();
    record.artifacts.insert("record".into(), format!("{}/record.json", run_dir(run)));
    let dir = cfg.output_dir.join(run_dir(run));
    if let Err(e) = fs::write(dir.join("record.json"), serde_json::to_string_pretty(&record).unwrap_or_default()) {
        log::warn!("run {run}: could not write record: {e}");
    }
    record
}

fn run_dir(run: usize) -> String {
    format!("run_{run}")
}

fn run_stages(cfg: &ExperimentConfig, record: &mut RunRecord) -> Result<()> {
    let rel = run_dir(record.run);
    let dir = cfg.output_dir.join(&rel);
    fs::create_dir_all(&dir)?;
    let seeds = record.seeds;
    let spec = cfg.spec()?;
    let truth = ground_truth(&spec)?;
    let truth_graph = WeightedDag::from_scm(&spec)?;
    let art = |name: &str| format!("{rel}/{name}");

    let generated = sample(&spec, cfg.n_samples, seeds.data)?;
    generated.write_csv(dir.join("generated.csv"))?;
    record.artifacts.insert("generated".into(), art("generated.csv"));

    record.generated = estimate_all(&generated, cfg, &truth_graph, seeds.discovery)?;
    let non_gaussian = !matches!(cfg.noise_dist(), crate::scm::NoiseDist::Gaussian { .. });
    record.baseline = check_baseline(&record.generated, &truth, non_gaussian);
    if !record.baseline.valid {
        log::warn!("run {}: baseline check failed: {:?}", record.run, record.baseline.failures);
    }

    let checkpoint = match cfg.generator {
        GeneratorKind::None => None,
        GeneratorKind::Gan => Some(Checkpoint::Gan(train_gan(&generated, &crate::gan::GanConfig { seed: seeds.generator, ..cfg.gan.clone() })?)),
        GeneratorKind::Timegan => Some(Checkpoint::Timegan(train_timegan(
            &generated,
            &crate::timegan::TimeGanConfig { seed: seeds.generator, ..cfg.timegan.clone() },
        )?)),
        GeneratorKind::Causalgan => {
            let graph = match cfg.graph_source.unwrap_or(GraphSource::Discovered) {
                GraphSource::Truth => truth_graph.clone(),
                GraphSource::Discovered => {
                    let lcfg = LingamConfig { seed: seeds.discovery, ..cfg.lingam };
                    lingam_fit(&generated, lcfg)?.pruned_graph
                }
            };
            graph.write_json(dir.join("causalgan_graph.json"))?;
            record.artifacts.insert("causalgan_graph".into(), art("causalgan_graph.json"));
            let ccfg = crate::causalgan::CausalGanConfig { seed: seeds.generator, ..cfg.causalgan.clone() };
            Some(Checkpoint::Causalgan(train_causal_gan(&generated, &graph, &ccfg)?))
        }
    };
    let Some(checkpoint) = checkpoint else {
        return Ok(());
    };
    checkpoint.write_json(dir.join("checkpoint.json"))?;
    record.artifacts.insert("checkpoint".into(), art("checkpoint.json"));
    fs::write(dir.join("training_log.json"), checkpoint.log_json()?)?;
    record.artifacts.insert("training_log".into(), art("training_log.json"));

    let synthetic = checkpoint.sample(cfg.n_synthetic, seeds.synthetic)?;
    synthetic.write_csv(dir.join("synthetic.csv"))?;
    record.artifacts.insert("synthetic".into(), art("synthetic.csv"));
    let est = estimate_all(&synthetic, cfg, &truth_graph, seeds.discovery)?;
    record.synthetic = Some(est);
    Ok(())
}

/// Repetitions spread over worker threads; results come back in run order.
fn run_all(cfg: &ExperimentConfig) -> Vec<RunRecord> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.repetitions);
    let next = AtomicUsize::new(0);
    let mut records: Vec<RunRecord> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let run = next.fetch_add(1, Ordering::Relaxed);
                        if run >= cfg.repetitions {
                            break done;
                        }
                        log::info!("run {}/{}", run + 1, cfg.repetitions);
                        done.push(run_one(cfg, run));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("run worker panicked")).collect()
    });
    records.sort_by_key(|r| r.run);
    records
}

/// Runs every repetition, writes per-run artifacts, the manifest, the report
/// and rendered tables under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let records = run_all(cfg);
    let manifest = Manifest {
        schema_version: super::SCHEMA_VERSION,
        config: cfg.clone(),
        runs: records
            .iter()
            .map(|r| ManifestEntry {
                run: r.run,
                dir: run_dir(r.run),
                complete: r.is_complete(),
                baseline_valid: r.baseline.valid,
                files: r.artifacts.clone(),
            })
            .collect(),
    };
    fs::write(cfg.output_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    let report = Report::new(cfg, &records, aggregate(&records)?);
    let rendered = render_tables(&report)?;
    fs::write(cfg.output_dir.join("report.json"), &rendered.json)?;
    fs::write(cfg.output_dir.join("tables.txt"), &rendered.text)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    config: ExperimentConfig,
    runs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    run: usize,
    dir: String,
    complete: bool,
    baseline_valid: bool,
    files: BTreeMap<String, String>,
}

/// Path of the file a run artifact key points to.
pub fn artifact_path(output_dir: &Path, record: &RunRecord, key: &str) -> Option<PathBuf> {
    record.artifacts.get(key).map(|rel| output_dir.join(rel))
}
