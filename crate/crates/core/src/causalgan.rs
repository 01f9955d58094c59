//! CausalGAN-style generator: one small network per variable, wired along a
//! supplied DAG and trained jointly against a single discriminator.

use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::PanelDataset;
use crate::error::{Error, Result};
use crate::gan::{adversarial_loop, gaussian_matrix, mlp, AdversarialGenerator, EpochLog, LoopSettings, Standardizer};
use crate::graph::WeightedDag;
use crate::nn::{Activation, AdamConfig, Gradients, NetworkParams, Tensor, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CausalGanConfig {
    /// Noise inputs per node.
    pub noise_dim: usize,
    pub sub_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub non_saturating: bool,
    pub seed: u64,
}

impl Default for CausalGanConfig {
    fn default() -> Self {
        CausalGanConfig {
            noise_dim: 4,
            sub_hidden: vec![32, 32],
            discriminator_hidden: vec![64, 64],
            hidden_activation: Activation::Relu,
            epochs: 300,
            batch_size: 128,
            optimizer: AdamConfig { learning_rate: 2e-4, beta1: 0.5, ..AdamConfig::default() },
            non_saturating: false,
            seed: 0,
        }
    }
}

/// Sub-generator `G_v(parents(v), Z_v)` per node, evaluated in topological
/// order. Values live in standardized units; `scaler` maps them back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalGeneratorNet {
    pub graph: WeightedDag,
    pub noise_dim: usize,
    pub sub_generators: Vec<NetworkParams>,
    pub order: Vec<usize>,
    pub scaler: Standardizer,
}

pub struct CausalTrace {
    inputs: Vec<Trace>,
}

/// One sub-generator per node of `graph`, with input arity
/// `|parents| + noise_dim`. Edge weights are ignored.
pub fn build_causal_generator(graph: &WeightedDag, cfg: &CausalGanConfig) -> Result<CausalGeneratorNet> {
    if cfg.noise_dim == 0 {
        return Err(Error::Config("noise_dim must be at least 1".into()));
    }
    let order = graph.topological_order()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = graph.nodes().len();
    let sub_generators = (0..k)
        .map(|v| {
            let arity = graph.parents(v).len() + cfg.noise_dim;
            mlp(arity, &cfg.sub_hidden, 1, cfg.hidden_activation, Activation::Identity, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CausalGeneratorNet {
        graph: graph.unweighted(),
        noise_dim: cfg.noise_dim,
        sub_generators,
        order,
        scaler: Standardizer { mean: vec![0.0; k], sd: vec![1.0; k] },
    })
}

impl CausalGeneratorNet {
    pub fn columns(&self) -> &[String] {
        self.graph.nodes()
    }

    pub fn arity(&self, v: usize) -> usize {
        self.sub_generators[v].input_dim()
    }

    fn input_for(&self, v: usize, values: &Array2<f64>, noise: &Array2<f64>) -> Array2<f64> {
        let d = self.noise_dim;
        let z = noise.slice(s![.., v * d..(v + 1) * d]);
        let parents = self.graph.parents(v);
        let pa = values.select(Axis(1), &parents);
        concatenate(Axis(1), &[pa.view(), z]).expect("row counts agree")
    }

    /// Ancestral evaluation with optional clamped (standardized) node values.
    fn evaluate(&self, noise: &Array2<f64>, clamp: &BTreeMap<usize, f64>) -> Result<(Array2<f64>, Vec<Option<Trace>>)> {
        let n = noise.nrows();
        let k = self.sub_generators.len();
        let mut values = Array2::zeros((n, k));
        let mut traces: Vec<Option<Trace>> = (0..k).map(|_| None).collect();
        for &v in &self.order {
            if let Some(&c) = clamp.get(&v) {
                values.column_mut(v).fill(c);
                continue;
            }
            let input = Tensor::from_matrix(self.input_for(v, &values, noise));
            let (out, trace) = self.sub_generators[v].forward(&input)?;
            values.column_mut(v).assign(&out.data().column(0));
            traces[v] = Some(trace);
        }
        Ok((values, traces))
    }

    fn node_noise(&self, rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64> {
        gaussian_matrix(rng, rows, self.sub_generators.len() * self.noise_dim)
    }
}

impl AdversarialGenerator for CausalGeneratorNet {
    type Trace = CausalTrace;

    fn draw_noise(&self, rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64> {
        self.node_noise(rng, rows)
    }

    fn forward(&self, noise: &Array2<f64>) -> Result<(Array2<f64>, CausalTrace)> {
        let (values, traces) = self.evaluate(noise, &BTreeMap::new())?;
        let inputs = traces.into_iter().map(|t| t.expect("every node evaluated")).collect();
        Ok((values, CausalTrace { inputs }))
    }

    /// Reverse topological sweep: each node's value gradient is its direct
    /// gradient plus what its children pass back through their parent inputs.
    fn backward(&self, trace: &CausalTrace, d_rows: &Array2<f64>) -> Result<Vec<Gradients>> {
        let k = self.sub_generators.len();
        let mut d_values = d_rows.clone();
        let mut grads: Vec<Option<Gradients>> = (0..k).map(|_| None).collect();
        for &v in self.order.iter().rev() {
            let d_out = d_values.slice(s![.., v..v + 1]).to_owned();
            let (d_in, g) = self.sub_generators[v].backward(&trace.inputs[v], &Tensor::from_matrix(d_out))?;
            for (j, p) in self.graph.parents(v).into_iter().enumerate() {
                let col = d_in.data().column(j).to_owned();
                let mut target = d_values.column_mut(p);
                target += &col;
            }
            grads[v] = Some(g);
        }
        Ok(grads.into_iter().map(|g| g.expect("every node visited")).collect())
    }

    fn networks(&self) -> Vec<&NetworkParams> {
        self.sub_generators.iter().collect()
    }

    fn networks_mut(&mut self) -> Vec<&mut NetworkParams> {
        self.sub_generators.iter_mut().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedCausalGan {
    pub generator: CausalGeneratorNet,
    pub discriminator: NetworkParams,
    pub seed: u64,
    pub log: Vec<EpochLog>,
}

/// Trains all sub-generators jointly against one discriminator over full
/// rows. Row order is ignored.
pub fn train_causal_gan(data: &PanelDataset, graph: &WeightedDag, cfg: &CausalGanConfig) -> Result<TrainedCausalGan> {
    if graph.nodes() != data.columns() {
        return Err(Error::InvalidDataset(format!(
            "graph nodes {:?} do not match columns {:?}",
            graph.nodes(),
            data.columns()
        )));
    }
    let mut gen = build_causal_generator(graph, cfg)?;
    let scaler = Standardizer::fit(data.rows());
    let x = scaler.transform(data.rows());
    gen.scaler = scaler;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let k = data.ncols();
    let mut disc = mlp(k, &cfg.discriminator_hidden, 1, cfg.hidden_activation, Activation::Sigmoid, &mut rng)?;
    let settings = LoopSettings {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer,
        non_saturating: cfg.non_saturating,
    };
    let log = adversarial_loop(&x, &mut gen, &mut disc, &settings, &mut rng)?;
    Ok(TrainedCausalGan { generator: gen, discriminator: disc, seed: cfg.seed, log })
}

/// Ancestral sampling of `n` i.i.d. rows in data units.
pub fn sample_causal(net: &CausalGeneratorNet, n: usize, seed: u64) -> Result<PanelDataset> {
    sample_causal_clamped(net, n, seed, &BTreeMap::new())
}

/// [`sample_causal`] with some nodes held at fixed values (data units).
/// Noise is drawn for every node regardless, so a clamped and an unclamped
/// run with the same seed share all noise.
pub fn sample_causal_clamped(
    net: &CausalGeneratorNet,
    n: usize,
    seed: u64,
    clamp: &BTreeMap<String, f64>,
) -> Result<PanelDataset> {
    let mut fixed = BTreeMap::new();
    for (name, &value) in clamp {
        let v = net.graph.index_of(name).ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        fixed.insert(v, (value - net.scaler.mean[v]) / net.scaler.sd[v]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = net.node_noise(&mut rng, n);
    let (values, _) = net.evaluate(&noise, &fixed)?;
    PanelDataset::new(net.columns().to_vec(), net.scaler.inverse(&values), false)
}
