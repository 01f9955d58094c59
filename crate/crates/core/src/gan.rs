//! The original adversarial game: a generator mapping Gaussian latent noise
//! to data rows and a discriminator scoring rows as real or fake.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::PanelDataset;
use crate::error::{Error, Result};
use crate::nn::{bce_loss, Activation, AdamConfig, Gradients, LayerSpec, NetworkParams, OptimizerState, Tensor, Trace};

/// Per-column affine map to zero mean and unit standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let sd = x.std_axis(Axis(0), 1.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        Standardizer { mean: mean.to_vec(), sd: sd.to_vec() }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &Array1::from_vec(self.mean.clone())) / &Array1::from_vec(self.sd.clone())
    }

    pub fn inverse(&self, z: &Array2<f64>) -> Array2<f64> {
        z * &Array1::from_vec(self.sd.clone()) + &Array1::from_vec(self.mean.clone())
    }
}

/// Dense stack `input -> hidden... -> output`.
pub fn mlp<R: Rng>(
    input: usize,
    hidden: &[usize],
    output: usize,
    hidden_activation: Activation,
    output_activation: Activation,
    rng: &mut R,
) -> Result<NetworkParams> {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    let mut layers: Vec<LayerSpec> = dims
        .windows(2)
        .map(|w| LayerSpec::Dense { input: w[0], output: w[1], activation: hidden_activation })
        .collect();
    layers.push(LayerSpec::Dense { input: *dims.last().unwrap(), output, activation: output_activation });
    NetworkParams::new(layers, rng)
}

pub(crate) fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

pub(crate) fn constant(rows: usize, value: f64) -> Array2<f64> {
    Array2::from_elem((rows, 1), value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Train the generator on `-log D(G(z))` instead of `log(1 - D(G(z)))`.
    pub non_saturating: bool,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            latent_dim: 16,
            generator_hidden: vec![64, 64],
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

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

/// A trained generator with what it needs to emit rows in data units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorModel {
    pub network: NetworkParams,
    pub latent_dim: usize,
    pub columns: Vec<String>,
    pub scaler: Standardizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedGan {
    pub generator: GeneratorModel,
    pub discriminator: NetworkParams,
    pub seed: u64,
    pub log: Vec<EpochLog>,
}

/// A generator the shared adversarial loop can drive: it draws its own
/// noise, maps it to standardized rows and backpropagates a row gradient
/// into one gradient set per owned network.
pub(crate) trait AdversarialGenerator {
    type Trace;
    fn draw_noise(&self, rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64>;
    fn forward(&self, noise: &Array2<f64>) -> Result<(Array2<f64>, Self::Trace)>;
    fn backward(&self, trace: &Self::Trace, d_rows: &Array2<f64>) -> Result<Vec<Gradients>>;
    fn networks(&self) -> Vec<&NetworkParams>;
    fn networks_mut(&mut self) -> Vec<&mut NetworkParams>;
}

pub(crate) struct LoopSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub non_saturating: bool,
}

/// Alternating 1:1 discriminator/generator updates over shuffled mini-batches
/// of standardized rows. The generator only ever sees the discriminator's
/// input gradient.
pub(crate) fn adversarial_loop<G: AdversarialGenerator>(
    x: &Array2<f64>,
    gen: &mut G,
    disc: &mut NetworkParams,
    settings: &LoopSettings,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EpochLog>> {
    let n = x.nrows();
    let b = settings.batch_size;
    if n < 2 * b {
        return Err(Error::InvalidDataset(format!("{n} rows is fewer than two batches of {b}")));
    }
    let mut g_opts: Vec<OptimizerState> =
        gen.networks().into_iter().map(|net| OptimizerState::new(net, settings.optimizer)).collect();
    let mut d_opt = OptimizerState::new(disc, settings.optimizer);
    let ones = constant(b, 1.0);
    let zeros = constant(b, 0.0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(settings.epochs);
    for epoch in 0..settings.epochs {
        order.shuffle(rng);
        let (mut d_sum, mut g_sum, mut batches) = (0.0, 0.0, 0usize);
        for chunk in order.chunks_exact(b) {
            let real = Tensor::from_matrix(x.select(Axis(0), chunk));
            let fake = Tensor::from_matrix(gen.forward(&gen.draw_noise(rng, b))?.0);

            let (p_real, tr_real) = disc.forward(&real)?;
            let (l_real, g_real) = bce_loss(p_real.data(), &ones)?;
            let (_, mut d_grads) = disc.backward(&tr_real, &p_real.with_data(g_real)?)?;
            let (p_fake, tr_fake) = disc.forward(&fake)?;
            let (l_fake, g_fake) = bce_loss(p_fake.data(), &zeros)?;
            let (_, grads_fake) = disc.backward(&tr_fake, &p_fake.with_data(g_fake)?)?;
            d_grads.accumulate(&grads_fake);
            d_opt.step(disc, &d_grads).map_err(|e| diverged(epoch, e))?;

            let (fake, tr_gen) = gen.forward(&gen.draw_noise(rng, b))?;
            let (p, tr_disc) = disc.forward(&Tensor::from_matrix(fake))?;
            let (g_loss, g_grad) = generator_objective(p.data(), settings.non_saturating)?;
            let (d_input, _) = disc.backward(&tr_disc, &p.with_data(g_grad)?)?;
            let g_grads = gen.backward(&tr_gen, d_input.data())?;
            for ((opt, net), grads) in g_opts.iter_mut().zip(gen.networks_mut()).zip(&g_grads) {
                opt.step(net, grads).map_err(|e| diverged(epoch, e))?;
            }

            d_sum += l_real + l_fake;
            g_sum += g_loss;
            batches += 1;
        }
        let entry = EpochLog { epoch, d_loss: d_sum / batches as f64, g_loss: g_sum / batches as f64 };
        if !entry.d_loss.is_finite() || !entry.g_loss.is_finite() {
            return Err(Error::Diverged { epoch, reason: format!("non-finite loss {entry:?}") });
        }
        log::debug!("epoch {epoch}: d={:.4} g={:.4}", entry.d_loss, entry.g_loss);
        log.push(entry);
    }
    Ok(log)
}

struct MlpGenerator {
    net: NetworkParams,
    latent_dim: usize,
}

impl AdversarialGenerator for MlpGenerator {
    type Trace = Trace;

    fn draw_noise(&self, rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64> {
        gaussian_matrix(rng, rows, self.latent_dim)
    }

    fn forward(&self, noise: &Array2<f64>) -> Result<(Array2<f64>, Trace)> {
        let (out, trace) = self.net.forward(&Tensor::from_matrix(noise.clone()))?;
        Ok((out.into_data(), trace))
    }

    fn backward(&self, trace: &Trace, d_rows: &Array2<f64>) -> Result<Vec<Gradients>> {
        Ok(vec![self.net.backward(trace, &Tensor::from_matrix(d_rows.clone()))?.1])
    }

    fn networks(&self) -> Vec<&NetworkParams> {
        vec![&self.net]
    }

    fn networks_mut(&mut self) -> Vec<&mut NetworkParams> {
        vec![&mut self.net]
    }
}

/// Trains the generator/discriminator pair on standardized rows.
pub fn train_gan(data: &PanelDataset, cfg: &GanConfig) -> Result<TrainedGan> {
    cfg.validate()?;
    let k = data.ncols();
    let scaler = Standardizer::fit(data.rows());
    let x = scaler.transform(data.rows());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = mlp(cfg.latent_dim, &cfg.generator_hidden, k, cfg.hidden_activation, Activation::Identity, &mut rng)?;
    let mut disc = mlp(k, &cfg.discriminator_hidden, 1, cfg.hidden_activation, Activation::Sigmoid, &mut rng)?;
    let mut gen = MlpGenerator { net, latent_dim: cfg.latent_dim };
    let settings = LoopSettings {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer,
        non_saturating: cfg.non_saturating,
    };
    let log = adversarial_loop(&x, &mut gen, &mut disc, &settings, &mut rng)?;
    Ok(TrainedGan {
        generator: GeneratorModel {
            network: gen.net,
            latent_dim: cfg.latent_dim,
            columns: data.columns().to_vec(),
            scaler,
        },
        discriminator: disc,
        seed: cfg.seed,
        log,
    })
}

fn diverged(epoch: usize, e: Error) -> Error {
    Error::Diverged { epoch, reason: e.to_string() }
}

/// Generator loss on discriminator outputs for fake rows, and its gradient.
/// Literal form: `mean log(1 - D)`; non-saturating: `-mean log D`.
pub(crate) fn generator_objective(p_fake: &Array2<f64>, non_saturating: bool) -> Result<(f64, Array2<f64>)> {
    let rows = p_fake.nrows();
    if non_saturating {
        bce_loss(p_fake, &constant(rows, 1.0))
    } else {
        let (l, g) = bce_loss(p_fake, &constant(rows, 0.0))?;
        Ok((-l, -g))
    }
}

/// Draws `n` i.i.d. rows in data units.
pub fn sample_gan(gen: &GeneratorModel, n: usize, seed: u64) -> Result<PanelDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Tensor::from_matrix(gaussian_matrix(&mut rng, n, gen.latent_dim));
    let out = gen.network.predict(&z)?;
    PanelDataset::new(gen.columns.clone(), gen.scaler.inverse(out.data()), false)
}

/// Probability the discriminator assigns to each row being real.
pub fn discriminator_score(gan: &TrainedGan, rows: &PanelDataset) -> Result<Vec<f64>> {
    if rows.columns() != gan.generator.columns.as_slice() {
        return Err(Error::InvalidDataset(format!(
            "columns {:?} do not match training schema {:?}",
            rows.columns(),
            gan.generator.columns
        )));
    }
    let x = gan.generator.scaler.transform(rows.rows());
    let p = gan.discriminator.predict(&Tensor::from_matrix(x))?;
    Ok(p.data().column(0).to_vec())
}
