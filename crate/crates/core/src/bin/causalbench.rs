use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use causalbench::causalgan::{train_causal_gan, CausalGanConfig};
use causalbench::discovery::{compare_graphs, lingam_fit, var_lingam_fit, LingamConfig};
use causalbench::gan::{train_gan, GanConfig};
use causalbench::graph::WeightedDag;
use causalbench::harness::{
    estimate_table_parameters, render_tables, run_experiment, Checkpoint, EstimatorKind, ExperimentConfig, ModelKind, Report,
};
use causalbench::inference::{ar_fit, ols_fit, FitOptions, RegressionSpec};
use causalbench::scm::{model_a_with, model_b_with, sample, ModelParams, NoiseDist};
use causalbench::timegan::{train_timegan, TimeGanConfig};
use causalbench::{Error, PanelDataset, Result};

#[derive(Parser)]
#[command(name = "causalbench", version, about = "Causal-structure benchmark for GAN-family generators")]
struct Cli {
    /// JSON config (experiment config for run-experiment, hyperparameters for train).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    A,
    B,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::A => ModelKind::A,
            Model::B => ModelKind::B,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Gan,
    Timegan,
    Causalgan,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a benchmark SCM to CSV.
    Generate {
        #[arg(long, value_enum)]
        model: Model,
        /// `gaussian` (sd 0.5), `uniform` (-1, 1) or a JSON noise descriptor.
        #[arg(long, default_value = "gaussian", value_parser = parse_noise)]
        noise: NoiseDist,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Train a generator on a dataset and write a checkpoint.
    Train {
        #[arg(long, value_enum)]
        generator: Generator,
        #[arg(long)]
        data: PathBuf,
        /// Graph JSON for causalgan; discovered with LiNGAM when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Draw synthetic rows from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Fit regressions. Without --target, fits the benchmark OLS and AR set.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: Option<String>,
        /// Comma-separated regressors, `name` or `name:lag`.
        #[arg(long, value_delimiter = ',')]
        regressors: Vec<String>,
        #[arg(long)]
        no_intercept: bool,
        /// Treat row order as time order even when the data says otherwise.
        #[arg(long)]
        force_order: bool,
    },
    /// LiNGAM (or VAR-LiNGAM) causal discovery.
    Discover {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        var: bool,
        #[arg(long, default_value_t = causalbench::discovery::DEFAULT_PRUNE_THRESHOLD)]
        threshold: f64,
        /// Compare against the true graph of a benchmark model.
        #[arg(long, value_enum)]
        truth: Option<Model>,
    },
    /// Run a full experiment from --config.
    RunExperiment,
    /// Render a saved report.
    Render {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn parse_noise(s: &str) -> std::result::Result<NoiseDist, String> {
    match s {
        "gaussian" => Ok(NoiseDist::gaussian(0.0, 0.5)),
        "uniform" => Ok(NoiseDist::uniform(-1.0, 1.0)),
        other => serde_json::from_str(other).map_err(|e| format!("bad noise descriptor: {e}")),
    }
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

fn parse_regressor(s: &str) -> Result<(String, u8)> {
    match s.split_once(':') {
        None => Ok((s.to_string(), 0)),
        Some((name, lag)) => {
            let lag = lag.parse().map_err(|_| Error::Config(format!("bad lag in {s:?}")))?;
            Ok((name.to_string(), lag))
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Generate { model, noise, n } => {
            let params = ModelParams::with_noise(*noise);
            let spec = match model {
                Model::A => model_a_with(&params)?,
                Model::B => model_b_with(&params)?,
            };
            let data = sample(&spec, *n, seed)?;
            let out = out_path(cli, "generated.csv");
            data.write_csv(&out)?;
            eprintln!("wrote {} rows to {}", data.nrows(), out.display());
        }
        Command::Train { generator, data, graph } => {
            let data = PanelDataset::read_csv(data)?;
            let cfg_path = cli.config.as_deref();
            let ckpt = match generator {
                Generator::Gan => {
                    let cfg = GanConfig { seed, ..read_config(cfg_path)? };
                    Checkpoint::Gan(train_gan(&data, &cfg)?)
                }
                Generator::Timegan => {
                    let cfg = TimeGanConfig { seed, ..read_config(cfg_path)? };
                    Checkpoint::Timegan(train_timegan(&data, &cfg)?)
                }
                Generator::Causalgan => {
                    let cfg = CausalGanConfig { seed, ..read_config(cfg_path)? };
                    let graph = match graph {
                        Some(p) => WeightedDag::read_json(p)?,
                        None => lingam_fit(&data, LingamConfig { seed, ..Default::default() })?.pruned_graph,
                    };
                    Checkpoint::Causalgan(train_causal_gan(&data, &graph, &cfg)?)
                }
            };
            let out = out_path(cli, "checkpoint.json");
            ckpt.write_json(&out)?;
            eprintln!("wrote checkpoint to {}", out.display());
        }
        Command::Sample { checkpoint, n } => {
            let data = Checkpoint::read_json(checkpoint)?.sample(*n, seed)?;
            let out = out_path(cli, "synthetic.csv");
            data.write_csv(&out)?;
            eprintln!("wrote {} rows to {}", data.nrows(), out.display());
        }
        Command::Estimate { data, target, regressors, no_intercept, force_order } => {
            let data = PanelDataset::read_csv(data)?;
            match target {
                None => {
                    let est = estimate_table_parameters(&data, &[EstimatorKind::Ols, EstimatorKind::Ar])?;
                    print_json(&est, cli.out.as_deref())?;
                }
                Some(target) => {
                    let regs = regressors.iter().map(|r| parse_regressor(r)).collect::<Result<Vec<_>>>()?;
                    let pairs: Vec<(&str, u8)> = regs.iter().map(|(n, l)| (n.as_str(), *l)).collect();
                    let mut spec = RegressionSpec::new(target, &pairs);
                    if *no_intercept {
                        spec = spec.without_intercept();
                    }
                    let lagged = regs.iter().any(|(_, l)| *l > 0);
                    let opts = if *force_order { FitOptions::forced() } else { FitOptions::default() };
                    let report = if lagged { ar_fit(&data, &spec, opts)? } else { ols_fit(&data, &spec)? };
                    print_json(&report, cli.out.as_deref())?;
                }
            }
        }
        Command::Discover { data, var, threshold, truth } => {
            let data = PanelDataset::read_csv(data)?;
            let cfg = LingamConfig { seed, prune_threshold: *threshold, ..Default::default() };
            let (graph, lagged) = if *var {
                let fit = var_lingam_fit(&data, cfg)?;
                (fit.contemporaneous.pruned_graph, fit.lagged_edges)
            } else {
                (lingam_fit(&data, cfg)?.pruned_graph, Vec::new())
            };
            match &cli.out {
                Some(p) => graph.write_json(p)?,
                None => println!("{}", serde_json::to_string_pretty(&graph)?),
            }
            for e in &lagged {
                eprintln!("lagged: {}[t-1] -> {}[t] {:.3}", e.from, e.to, e.weight);
            }
            if let Some(m) = truth {
                let params = ModelParams::with_noise(NoiseDist::uniform(-1.0, 1.0));
                let spec = match m {
                    Model::A => model_a_with(&params)?,
                    Model::B => model_b_with(&params)?,
                };
                eprint!("{}", compare_graphs(&graph, &WeightedDag::from_scm(&spec)?)?.to_text());
            }
        }
        Command::RunExperiment => {
            let path = cli.config.as_ref().ok_or_else(|| Error::Config("run-experiment needs --config".into()))?;
            let mut cfg = ExperimentConfig::from_path(path)?;
            if let Some(s) = cli.seed {
                cfg.master_seed = s;
            }
            if let Some(o) = &cli.out {
                cfg.output_dir = o.clone();
            }
            let report = run_experiment(&cfg)?;
            print!("{}", render_tables(&report)?.text);
            return Ok(ExitCode::from(report.exit_code() as u8));
        }
        Command::Render { report, json } => {
            let report = Report::from_json(&std::fs::read_to_string(report)?)?;
            let r = render_tables(&report)?;
            print!("{}", if *json { r.json } else { r.text });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
