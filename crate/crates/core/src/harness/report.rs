use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GeneratorKind, ModelKind, SCHEMA_VERSION};
use super::run::{DatasetEstimates, RunRecord};
use crate::discovery::GraphComparison;
use crate::error::{Error, Result};
use crate::scm::ground_truth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1); absent for a single value.
    pub sd: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Some(Summary { mean, sd, n })
    }

    fn cell(&self) -> String {
        match self.sd {
            Some(sd) => format!("{:.4} ± {:.4}", self.mean, sd),
            None => format!("{:.4}", self.mean),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub parameters: BTreeMap<String, Summary>,
    /// LiNGAM edge weights keyed `"from -> to"`, 0 in runs where the edge is absent.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub edges: BTreeMap<String, Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Runs that completed and passed the baseline check.
    pub runs_used: Vec<usize>,
    pub generated: DatasetSummary,
    pub synthetic: Option<DatasetSummary>,
}

fn summarize(sets: &[&DatasetEstimates]) -> DatasetSummary {
    let names: BTreeSet<&String> = sets.iter().flat_map(|d| d.parameters.keys()).collect();
    let parameters = names
        .into_iter()
        .filter_map(|name| {
            let values: Vec<f64> = sets.iter().filter_map(|d| d.parameters.get(name)).map(|p| p.estimate).collect();
            Summary::of(&values).map(|s| (name.clone(), s))
        })
        .collect();
    let graphs: Vec<_> = sets.iter().filter_map(|d| d.lingam.as_ref()).collect();
    let mut keys: BTreeSet<String> = BTreeSet::new();
    for g in &graphs {
        keys.extend(g.edges.iter().map(|e| format!("{} -> {}", e.from, e.to)));
    }
    let edges = keys
        .into_iter()
        .filter_map(|key| {
            let values: Vec<f64> = graphs
                .iter()
                .map(|g| g.edges.iter().find(|e| format!("{} -> {}", e.from, e.to) == key).map_or(0.0, |e| e.weight))
                .collect();
            Summary::of(&values).map(|s| (key, s))
        })
        .collect();
    DatasetSummary { parameters, edges }
}

/// Mean and sample sd per parameter per dataset over the runs that completed
/// and passed the baseline check.
pub fn aggregate(records: &[RunRecord]) -> Result<Aggregate> {
    let used: Vec<&RunRecord> = records.iter().filter(|r| r.is_complete() && r.baseline.valid).collect();
    if used.is_empty() {
        return Err(Error::NoCompleteRuns);
    }
    let generated = summarize(&used.iter().map(|r| &r.generated).collect::<Vec<_>>());
    let synth: Vec<&DatasetEstimates> = used.iter().filter_map(|r| r.synthetic.as_ref()).collect();
    let synthetic = (!synth.is_empty()).then(|| summarize(&synth));
    Ok(Aggregate { runs_used: used.iter().map(|r| r.run).collect(), generated, synthetic })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeGraphs {
    pub run: usize,
    pub generated: GraphComparison,
    pub synthetic: Option<GraphComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub model: ModelKind,
    pub generator: GeneratorKind,
    pub repetitions: usize,
    pub incomplete_runs: Vec<usize>,
    pub baseline_flagged: Vec<usize>,
    pub truth: BTreeMap<String, f64>,
    pub aggregate: Aggregate,
    pub representative: Option<RepresentativeGraphs>,
}

impl Report {
    pub fn new(cfg: &ExperimentConfig, records: &[RunRecord], aggregate: Aggregate) -> Self {
        let mut truth = BTreeMap::new();
        if let Ok(t) = cfg.spec().and_then(|s| ground_truth(&s)) {
            truth.insert("alpha".to_string(), t.alpha);
            for (i, b) in t.betas.iter().enumerate() {
                truth.insert(format!("beta{}", i + 1), *b);
            }
        }
        let representative = aggregate.runs_used.first().and_then(|&run| {
            let r = records.iter().find(|r| r.run == run)?;
            let pick = |d: &DatasetEstimates| d.lingam.as_ref().or(d.var_lingam.as_ref()).map(|g| g.comparison.clone());
            Some(RepresentativeGraphs {
                run,
                generated: pick(&r.generated)?,
                synthetic: r.synthetic.as_ref().and_then(pick),
            })
        });
        Report {
            schema_version: SCHEMA_VERSION,
            model: cfg.model,
            generator: cfg.generator,
            repetitions: cfg.repetitions,
            incomplete_runs: records.iter().filter(|r| !r.is_complete()).map(|r| r.run).collect(),
            baseline_flagged: records.iter().filter(|r| r.is_complete() && !r.baseline.valid).map(|r| r.run).collect(),
            truth,
            aggregate,
            representative,
        }
    }

    /// 0 when every run completed and passed baseline, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.incomplete_runs.is_empty() && self.baseline_flagged.is_empty() {
            0
        } else {
            1
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("report schema_version {} unsupported", r.schema_version)));
        }
        Ok(r)
    }
}

const TABLE_ROWS: [(&str, &str, &str); 6] = [
    ("OLS", "beta3", "β3"),
    ("", "beta4", "β4"),
    ("", "beta5", "β5"),
    ("AR", "alpha", "α"),
    ("", "beta1", "β1"),
    ("", "beta2", "β2"),
];

const EMPTY: &str = "—";

fn pad(s: &str, width: usize) -> String {
    let len = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(len)))
}

/// Aligned text tables: estimates (mean ± sd, 4 decimals) and, when
/// discovery ran, the edges of a representative run.
pub fn render_text(report: &Report) -> String {
    let agg = &report.aggregate;
    let synth_label = match report.generator {
        GeneratorKind::None => "Synthetic",
        g => g.label(),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Model {:?}, generator {}: {}/{} runs aggregated",
        report.model,
        report.generator.label(),
        agg.runs_used.len(),
        report.repetitions
    );
    if !report.incomplete_runs.is_empty() {
        let _ = writeln!(out, "incomplete runs: {:?}", report.incomplete_runs);
    }
    if !report.baseline_flagged.is_empty() {
        let _ = writeln!(out, "runs failing baseline validation (excluded): {:?}", report.baseline_flagged);
    }
    let rows: Vec<_> = TABLE_ROWS.iter().filter(|(_, key, _)| agg.generated.parameters.contains_key(*key)).collect();
    if !rows.is_empty() {
        let w = 20;
        let _ = writeln!(out);
        let _ = writeln!(out, "{}{}{}{}", pad("", 6), pad("", 5), pad("Real", w), synth_label);
        for (group, key, label) in rows {
            let real = agg.generated.parameters.get(*key).map_or(EMPTY.to_string(), Summary::cell);
            let synth = agg
                .synthetic
                .as_ref()
                .and_then(|s| s.parameters.get(*key))
                .map_or(EMPTY.to_string(), Summary::cell);
            let _ = writeln!(out, "{}{}{}{}", pad(group, 6), pad(label, 5), pad(&real, w), synth);
        }
    }
    if let Some(rep) = &report.representative {
        let _ = writeln!(out);
        let _ = writeln!(out, "Causal effects, run {} (* reversed, ! spurious)", rep.run);
        let _ = writeln!(out, "{}{}{}{}", pad("Effect", 14), pad("True", 8), pad("Real", 10), synth_label);
        let found = |c: &GraphComparison, from: &str, to: &str| -> String {
            if let Some(e) = c.true_edges.iter().find(|e| e.from == from && e.to == to) {
                if e.missing {
                    EMPTY.to_string()
                } else {
                    format!("{:.2}{}", e.found_weight, if e.reversed { "*" } else { "" })
                }
            } else {
                c.spurious
                    .iter()
                    .find(|e| e.from == from && e.to == to)
                    .map_or(EMPTY.to_string(), |e| format!("{:.2}!", e.weight))
            }
        };
        let mut effects: Vec<(String, String, f64)> =
            rep.generated.true_edges.iter().map(|e| (e.from.clone(), e.to.clone(), e.true_weight)).collect();
        let spurious = rep.generated.spurious.iter().chain(rep.synthetic.iter().flat_map(|c| c.spurious.iter()));
        for e in spurious {
            if !effects.iter().any(|(f, t, _)| f == &e.from && t == &e.to) {
                effects.push((e.from.clone(), e.to.clone(), 0.0));
            }
        }
        for (from, to, w) in effects {
            let real = found(&rep.generated, &from, &to);
            let synth = rep.synthetic.as_ref().map_or(EMPTY.to_string(), |c| found(c, &from, &to));
            let _ = writeln!(out, "{}{}{}{}", pad(&format!("{from} -> {to}"), 14), pad(&format!("{w:.2}"), 8), pad(&real, 10), synth);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub text: String,
    pub json: String,
}

pub fn render_tables(report: &Report) -> Result<Rendered> {
    Ok(Rendered { text: render_text(report), json: serde_json::to_string_pretty(report)? })
}

#[cfg(test)]
mod tests {
    use super::super::config::EstimatorKind;
    use super::super::run::{BaselineCheck, ParamEstimate};
    use super::super::seeds::RunSeeds;
    use super::*;

    fn record(run: usize, alpha: f64, synth: Option<f64>) -> RunRecord {
        let est = |a: f64| {
            let mut d = DatasetEstimates::default();
            d.parameters.insert("alpha".into(), ParamEstimate { estimate: a, std_error: 0.01 });
            d
        };
        RunRecord {
            run,
            seeds: RunSeeds::derive(0, run),
            generated: est(alpha),
            synthetic: synth.map(est),
            baseline: BaselineCheck { valid: true, failures: vec![] },
            artifacts: BTreeMap::new(),
            wall_time_secs: 0.0,
            error: None,
        }
    }

    #[test]
    fn summary_hand_computation() {
        let s = Summary::of(&[0.4, 0.6]).unwrap();
        assert!((s.mean - 0.5).abs() < 1e-15);
        assert!((s.sd.unwrap() - 0.1414213562373095).abs() < 1e-12);
        assert_eq!(Summary::of(&[0.3, 0.3, 0.3]).unwrap().sd, Some(0.0));
        assert_eq!(Summary::of(&[0.3]).unwrap().sd, None);
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn aggregate_skips_failed_and_flagged_runs() {
        let mut recs = vec![record(0, 0.4, Some(0.0)), record(1, 0.6, Some(0.1)), record(2, 9.0, None), record(3, 9.0, None)];
        recs[2].error = Some("boom".into());
        recs[3].baseline.valid = false;
        let agg = aggregate(&recs).unwrap();
        assert_eq!(agg.runs_used, vec![0, 1]);
        assert!((agg.generated.parameters["alpha"].mean - 0.5).abs() < 1e-15);
        assert!((agg.synthetic.unwrap().parameters["alpha"].mean - 0.05).abs() < 1e-15);
        recs.clear();
        assert!(matches!(aggregate(&recs), Err(Error::NoCompleteRuns)));
        assert!(matches!(aggregate(&[record(0, 0.5, None)].map(|mut r| { r.error = Some("x".into()); r })), Err(Error::NoCompleteRuns)));
    }

    #[test]
    fn render_rows_dashes_and_json_round_trip() {
        let cfg = ExperimentConfig::new(ModelKind::A, GeneratorKind::None, vec![EstimatorKind::Ar]);
        let recs = vec![record(0, 0.4, None), record(1, 0.6, None)];
        let report = Report::new(&cfg, &recs, aggregate(&recs).unwrap());
        let rendered = render_tables(&report).unwrap();
        assert!(rendered.text.contains("0.5000 ± 0.1414"));
        assert!(rendered.text.lines().any(|l| l.contains('α') && l.trim_end().ends_with(EMPTY)));
        let back = Report::from_json(&rendered.json).unwrap();
        assert_eq!(render_text(&back), rendered.text);
        assert_eq!(report.exit_code(), 0);
    }
}
