//! TimeGAN: an autoencoder into a latent space plus an adversarial,
//! autoregressive generator over latent sequences, trained with
//! reconstruction, supervised and unsupervised losses.

use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::PanelDataset;
use crate::error::{Error, Result};
use crate::gan::Standardizer;
use crate::nn::{bce_loss, mean_l2_distance, Activation, AdamConfig, Gradients, LayerSpec, NetworkParams, OptimizerState, Tensor};

/// Overlapping windows cut from a time-indexed series.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub windows: Vec<Array2<f64>>,
    pub len: usize,
    pub stride: usize,
}

impl SequenceBatch {
    /// Windows of `len` rows starting every `stride` rows. Windows never
    /// straddle a segment boundary.
    pub fn slice(rows: &Array2<f64>, segment_starts: &[usize], len: usize, stride: usize) -> Result<Self> {
        if len < 2 || stride == 0 {
            return Err(Error::Config(format!("window length {len} / stride {stride} invalid")));
        }
        let n = rows.nrows();
        let mut bounds: Vec<usize> = segment_starts.iter().copied().filter(|&s| s < n).collect();
        if bounds.first() != Some(&0) {
            bounds.insert(0, 0);
        }
        bounds.push(n);
        let mut windows = Vec::new();
        for seg in bounds.windows(2) {
            let mut start = seg[0];
            while start + len <= seg[1] {
                windows.push(rows.slice(s![start..start + len, ..]).to_owned());
                start += stride;
            }
        }
        if windows.is_empty() {
            return Err(Error::InvalidDataset(format!("no segment holds a full window of {len} rows")));
        }
        Ok(SequenceBatch { windows, len, stride })
    }

    /// Reassembles the series covered by the windows: the first window in
    /// full, then the last `stride` rows of each later window.
    pub fn unslice(&self) -> Array2<f64> {
        let k = self.windows[0].ncols();
        let tail = self.stride.min(self.len);
        let total = self.len + (self.windows.len() - 1) * tail;
        let mut out = Array2::zeros((total, k));
        out.slice_mut(s![..self.len, ..]).assign(&self.windows[0]);
        for (i, w) in self.windows.iter().enumerate().skip(1) {
            let at = self.len + (i - 1) * tail;
            out.slice_mut(s![at..at + tail, ..]).assign(&w.slice(s![self.len - tail.., ..]));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn tensor(&self, indices: &[usize]) -> Result<Tensor> {
        let views: Vec<ArrayView2<f64>> = indices.iter().map(|&i| self.windows[i].view()).collect();
        Tensor::from_windows(&views)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeGanConfig {
    pub seq_len: usize,
    pub stride: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    /// Per-step noise width; defaults to the number of features.
    pub noise_dim: Option<usize>,
    pub batch_size: usize,
    pub autoencoder_epochs: usize,
    pub supervisor_epochs: usize,
    pub joint_epochs: usize,
    /// Mini-batches per epoch.
    pub iterations_per_epoch: usize,
    /// Generator/autoencoder updates per discriminator update in the joint phase.
    pub generator_steps: usize,
    /// Weight of L_S in the generator objective.
    pub lambda: f64,
    /// Weight of L_S in the autoencoder objective.
    pub kappa: f64,
    /// Weight of the adversarial term on raw generator output.
    pub gamma: f64,
    /// Discriminator is only updated while its loss exceeds this.
    pub discriminator_threshold: f64,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for TimeGanConfig {
    fn default() -> Self {
        TimeGanConfig {
            seq_len: 24,
            stride: 1,
            latent_dim: 2,
            hidden_dim: 12,
            num_layers: 1,
            noise_dim: None,
            batch_size: 128,
            autoencoder_epochs: 100,
            supervisor_epochs: 100,
            joint_epochs: 300,
            iterations_per_epoch: 10,
            generator_steps: 2,
            lambda: 1.0,
            kappa: 10.0,
            gamma: 1.0,
            discriminator_threshold: 0.15,
            optimizer: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TimeGanConfig {
    pub fn validate(&self, features: usize) -> Result<()> {
        if self.seq_len < 2 {
            return Err(Error::Config("seq_len must be at least 2".into()));
        }
        if self.latent_dim == 0 || self.latent_dim >= features.max(2) * self.seq_len {
            return Err(Error::Config(format!("latent_dim {} is not a bottleneck", self.latent_dim)));
        }
        if self.hidden_dim == 0 || self.num_layers == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden_dim, num_layers and batch_size must be positive".into()));
        }
        if self.iterations_per_epoch == 0 || self.generator_steps == 0 {
            return Err(Error::Config("iterations_per_epoch and generator_steps must be positive".into()));
        }
        Ok(())
    }
}

/// The five TimeGAN networks plus the data schema they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGanNets {
    pub embedder: NetworkParams,
    pub recovery: NetworkParams,
    pub generator: NetworkParams,
    pub supervisor: NetworkParams,
    pub discriminator: NetworkParams,
    /// Width of the static feature vector `s`; always 0 for panel data.
    pub static_dim: usize,
    pub noise_dim: usize,
    pub seq_len: usize,
    pub columns: Vec<String>,
    pub scaler: Standardizer,
}

fn recurrent<R: Rng>(
    input: usize,
    hidden: usize,
    layers: usize,
    output: usize,
    activation: Activation,
    rng: &mut R,
) -> Result<NetworkParams> {
    let mut arch = vec![LayerSpec::Gru { input, hidden }];
    for _ in 1..layers {
        arch.push(LayerSpec::Gru { input: hidden, hidden });
    }
    arch.push(LayerSpec::Dense { input: hidden, output, activation });
    NetworkParams::new(arch, rng)
}

impl TimeGanNets {
    pub fn new<R: Rng>(columns: Vec<String>, scaler: Standardizer, cfg: &TimeGanConfig, rng: &mut R) -> Result<Self> {
        let k = columns.len();
        cfg.validate(k)?;
        let (h, l, d) = (cfg.hidden_dim, cfg.num_layers, cfg.latent_dim);
        let noise_dim = cfg.noise_dim.unwrap_or(k);
        Ok(TimeGanNets {
            embedder: recurrent(k, h, l, d, Activation::Sigmoid, rng)?,
            recovery: recurrent(d, h, l, k, Activation::Identity, rng)?,
            generator: recurrent(noise_dim, h, l, d, Activation::Sigmoid, rng)?,
            supervisor: recurrent(d, h, l.saturating_sub(1).max(1), d, Activation::Sigmoid, rng)?,
            discriminator: recurrent(d, h, l, 1, Activation::Sigmoid, rng)?,
            static_dim: 0,
            noise_dim,
            seq_len: cfg.seq_len,
            columns,
            scaler,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.embedder.output_dim()
    }

    /// Latent codes of real windows.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        self.embedder.predict(x)
    }

    /// Supervised synthetic latents `ĥ` for a noise sequence.
    pub fn generate_latent(&self, z: &Tensor) -> Result<Tensor> {
        self.supervisor.predict(&self.generator.predict(z)?)
    }
}

fn uniform_noise<R: Rng>(rng: &mut R, steps: usize, batch: usize, dim: usize) -> Result<Tensor> {
    let data = Array2::from_shape_simple_fn((steps * batch, dim), || rng.random::<f64>());
    Tensor::from_sequence(steps, data)
}

/// One-step-ahead pairing: predictions at steps `0..L-1` against targets at
/// `1..L`. Returns the loss, the gradient on the predictions tensor and the
/// gradient on the targets tensor.
fn shifted_l2(pred: &Tensor, target: &Tensor) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let b = target.batch();
    let n = target.data().nrows();
    let a = pred.data().slice(s![..n - b, ..]).to_owned();
    let t = target.data().slice(s![b.., ..]).to_owned();
    let (loss, ga) = mean_l2_distance(&a, &t)?;
    let mut g_pred = Array2::zeros(pred.data().raw_dim());
    g_pred.slice_mut(s![..n - b, ..]).assign(&ga);
    let mut g_target = Array2::zeros(target.data().raw_dim());
    g_target.slice_mut(s![b.., ..]).assign(&(-&ga));
    Ok((loss, g_pred, g_target))
}

/// Mean per-step L2 distance between standardized windows and their
/// reconstruction through embedder and recovery. The static term is empty.
pub fn reconstruction_loss(nets: &TimeGanNets, batch: &Tensor) -> Result<f64> {
    let recon = nets.recovery.predict(&nets.embedder.predict(batch)?)?;
    Ok(mean_l2_distance(recon.data(), batch.data())?.0)
}

/// Mean L2 distance between each real latent `h_t` and the supervisor's
/// prediction from the real `h_{t-1}`.
pub fn supervised_loss(nets: &TimeGanNets, batch: &Tensor) -> Result<f64> {
    let h = nets.embedder.predict(batch)?;
    latent_supervised_loss(&nets.supervisor, &h)
}

/// [`supervised_loss`] on a given latent sequence.
pub fn latent_supervised_loss(supervisor: &NetworkParams, h: &Tensor) -> Result<f64> {
    let pred = supervisor.predict(h)?;
    Ok(shifted_l2(&pred, h)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Discriminator,
    Generator,
}

/// Binary cross entropy of the discriminator's per-step outputs on real and
/// fake latent sequences. The discriminator labels real 1 and fake 0; the
/// generator's loss uses the flipped labels.
pub fn unsupervised_loss(disc: &NetworkParams, real: &Tensor, fake: &Tensor, role: Role) -> Result<f64> {
    let p_real = disc.predict(real)?;
    let p_fake = disc.predict(fake)?;
    let (r, f) = match role {
        Role::Discriminator => (1.0, 0.0),
        Role::Generator => (0.0, 1.0),
    };
    let lr = bce_loss(p_real.data(), &Array2::from_elem(p_real.data().raw_dim(), r))?.0;
    let lf = bce_loss(p_fake.data(), &Array2::from_elem(p_fake.data().raw_dim(), f))?.0;
    Ok(lr + lf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Autoencoder,
    Supervisor,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGanLog {
    pub phase: Phase,
    pub epoch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supervised: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedTimeGan {
    pub nets: TimeGanNets,
    pub seed: u64,
    pub log: Vec<TimeGanLog>,
}

struct Optimizers {
    embedder: OptimizerState,
    recovery: OptimizerState,
    generator: OptimizerState,
    supervisor: OptimizerState,
    discriminator: OptimizerState,
}

#[derive(Default)]
struct Running {
    sums: [f64; 4],
    counts: [usize; 4],
}

impl Running {
    fn add(&mut self, slot: usize, v: f64) {
        self.sums[slot] += v;
        self.counts[slot] += 1;
    }

    fn mean(&self, slot: usize) -> Option<f64> {
        (self.counts[slot] > 0).then(|| self.sums[slot] / self.counts[slot] as f64)
    }

    fn entry(&self, phase: Phase, epoch: usize) -> Result<TimeGanLog> {
        let e = TimeGanLog {
            phase,
            epoch,
            reconstruction: self.mean(0),
            supervised: self.mean(1),
            d_loss: self.mean(2),
            g_loss: self.mean(3),
        };
        if [e.reconstruction, e.supervised, e.d_loss, e.g_loss].iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, reason: format!("non-finite loss in {phase:?} phase") });
        }
        Ok(e)
    }
}

fn adam(state: &mut OptimizerState, net: &mut NetworkParams, grads: &Gradients, epoch: usize) -> Result<()> {
    state.step(net, grads).map_err(|e| Error::Diverged { epoch, reason: e.to_string() })
}

struct Trainer<'a> {
    nets: TimeGanNets,
    opt: Optimizers,
    cfg: &'a TimeGanConfig,
    windows: SequenceBatch,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer<'_> {
    fn batch(&mut self) -> Result<Tensor> {
        let n = self.windows.len();
        let b = self.cfg.batch_size.min(n);
        let idx = rand::seq::index::sample(&mut self.rng, n, b).into_vec();
        self.windows.tensor(&idx)
    }

    fn noise(&mut self, batch: usize) -> Result<Tensor> {
        uniform_noise(&mut self.rng, self.cfg.seq_len, batch, self.nets.noise_dim)
    }


    fn autoencoder_step(&mut self, x: &Tensor, kappa: Option<f64>) -> Result<(f64, Option<f64>)> {
        let (e, tr_e) = self.nets.embedder.forward(x)?;
        let (recon, tr_r) = self.nets.recovery.forward(&e)?;
        let (lr, g_r) = mean_l2_distance(recon.data(), x.data())?;
        let (mut d_e, rec_grads) = self.nets.recovery.backward(&tr_r, &recon.with_data(g_r)?)?;
        let mut ls = None;
        if let Some(kappa) = kappa {
            let (pred, tr_s) = self.nets.supervisor.forward(&e)?;
            let (l, g_pred, g_target) = shifted_l2(&pred, &e)?;
            let (d_e_sup, _) = self.nets.supervisor.backward(&tr_s, &pred.with_data(g_pred * kappa)?)?;
            *d_e.data_mut() += &(d_e_sup.into_data() + g_target * kappa);
            ls = Some(l);
        }
        let (_, emb_grads) = self.nets.embedder.backward(&tr_e, &d_e)?;
        adam(&mut self.opt.embedder, &mut self.nets.embedder, &emb_grads, self.epoch)?;
        adam(&mut self.opt.recovery, &mut self.nets.recovery, &rec_grads, self.epoch)?;
        Ok((lr, ls))
    }

    fn supervisor_step(&mut self, x: &Tensor) -> Result<f64> {
        let h = self.nets.embedder.predict(x)?;
        let (pred, tr) = self.nets.supervisor.forward(&h)?;
        let (l, g_pred, _) = shifted_l2(&pred, &h)?;
        let (_, grads) = self.nets.supervisor.backward(&tr, &pred.with_data(g_pred)?)?;
        adam(&mut self.opt.supervisor, &mut self.nets.supervisor, &grads, self.epoch)?;
        Ok(l)
    }

    fn generator_step(&mut self, x: &Tensor) -> Result<(f64, f64)> {
        let z = self.noise(x.batch())?;
        let nets = &self.nets;
        let (e_hat, tr_g) = nets.generator.forward(&z)?;
        let (h_hat, tr_s) = nets.supervisor.forward(&e_hat)?;
        let (p_h, tr_dh) = nets.discriminator.forward(&h_hat)?;
        let ones = Array2::from_elem(p_h.data().raw_dim(), 1.0);
        let (lu, g_u) = bce_loss(p_h.data(), &ones)?;
        let (p_e, tr_de) = nets.discriminator.forward(&e_hat)?;
        let (lue, g_ue) = bce_loss(p_e.data(), &ones)?;

        let (d_h_hat, _) = nets.discriminator.backward(&tr_dh, &p_h.with_data(g_u)?)?;
        let (mut d_e_hat, mut sup_grads) = nets.supervisor.backward(&tr_s, &d_h_hat)?;
        let (d_e_direct, _) = nets.discriminator.backward(&tr_de, &p_e.with_data(g_ue * self.cfg.gamma)?)?;
        *d_e_hat.data_mut() += d_e_direct.data();
        let (_, gen_grads) = nets.generator.backward(&tr_g, &d_e_hat)?;

        let h = nets.embedder.predict(x)?;
        let (pred, tr_sr) = nets.supervisor.forward(&h)?;
        let (ls, g_pred, _) = shifted_l2(&pred, &h)?;
        let (_, sup_real) = nets.supervisor.backward(&tr_sr, &pred.with_data(g_pred * self.cfg.lambda)?)?;
        sup_grads.accumulate(&sup_real);

        adam(&mut self.opt.generator, &mut self.nets.generator, &gen_grads, self.epoch)?;
        adam(&mut self.opt.supervisor, &mut self.nets.supervisor, &sup_grads, self.epoch)?;
        Ok((lu + self.cfg.gamma * lue, ls))
    }

    fn discriminator_step(&mut self, x: &Tensor) -> Result<f64> {
        let z = self.noise(x.batch())?;
        let nets = &self.nets;
        let h = nets.embedder.predict(x)?;
        let e_hat = nets.generator.predict(&z)?;
        let h_hat = nets.supervisor.predict(&e_hat)?;
        let mut total = 0.0;
        let mut grads = Gradients::zeros_like(&nets.discriminator);
        for (input, label, weight) in [(&h, 1.0, 1.0), (&h_hat, 0.0, 1.0), (&e_hat, 0.0, self.cfg.gamma)] {
            let (p, tr) = nets.discriminator.forward(input)?;
            let (l, g) = bce_loss(p.data(), &Array2::from_elem(p.data().raw_dim(), label))?;
            let (_, gr) = nets.discriminator.backward(&tr, &p.with_data(g * weight)?)?;
            grads.accumulate(&gr);
            total += weight * l;
        }
        if total > self.cfg.discriminator_threshold {
            adam(&mut self.opt.discriminator, &mut self.nets.discriminator, &grads, self.epoch)?;
        }
        Ok(total)
    }
}

/// Three-phase schedule: autoencoder on L_R, supervisor on L_S, then joint
/// adversarial training (generator on L_U + λ·L_S, autoencoder on
/// L_R + κ·L_S, discriminator on L_U).
pub fn train_timegan(data: &PanelDataset, cfg: &TimeGanConfig) -> Result<TrainedTimeGan> {
    if !data.is_time_indexed() {
        return Err(Error::NotTimeIndexed);
    }
    cfg.validate(data.ncols())?;
    let scaler = Standardizer::fit(data.rows());
    let windows = SequenceBatch::slice(&scaler.transform(data.rows()), data.segment_starts(), cfg.seq_len, cfg.stride)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nets = TimeGanNets::new(data.columns().to_vec(), scaler, cfg, &mut rng)?;
    let opt = Optimizers {
        embedder: OptimizerState::new(&nets.embedder, cfg.optimizer),
        recovery: OptimizerState::new(&nets.recovery, cfg.optimizer),
        generator: OptimizerState::new(&nets.generator, cfg.optimizer),
        supervisor: OptimizerState::new(&nets.supervisor, cfg.optimizer),
        discriminator: OptimizerState::new(&nets.discriminator, cfg.optimizer),
    };
    let mut tr = Trainer { nets, opt, cfg, windows, rng, epoch: 0 };
    let mut log = Vec::new();

    for epoch in 0..cfg.autoencoder_epochs {
        tr.epoch = epoch;
        let mut run = Running::default();
        for _ in 0..cfg.iterations_per_epoch {
            let x = tr.batch()?;
            run.add(0, tr.autoencoder_step(&x, None)?.0);
        }
        log.push(run.entry(Phase::Autoencoder, epoch)?);
    }
    for epoch in 0..cfg.supervisor_epochs {
        tr.epoch = epoch;
        let mut run = Running::default();
        for _ in 0..cfg.iterations_per_epoch {
            let x = tr.batch()?;
            run.add(1, tr.supervisor_step(&x)?);
        }
        log.push(run.entry(Phase::Supervisor, epoch)?);
    }
    for epoch in 0..cfg.joint_epochs {
        tr.epoch = epoch;
        let mut run = Running::default();
        for _ in 0..cfg.iterations_per_epoch {
            for _ in 0..cfg.generator_steps {
                let x = tr.batch()?;
                let (g, ls) = tr.generator_step(&x)?;
                run.add(3, g);
                run.add(1, ls);
                let (lr, _) = tr.autoencoder_step(&x, Some(cfg.kappa))?;
                run.add(0, lr);
            }
            let x = tr.batch()?;
            run.add(2, tr.discriminator_step(&x)?);
        }
        let entry = run.entry(Phase::Joint, epoch)?;
        log::debug!("timegan joint epoch {epoch}: {entry:?}");
        log.push(entry);
    }
    Ok(TrainedTimeGan { nets: tr.nets, seed: cfg.seed, log })
}

/// Rolls `n_windows` independent latent sequences from noise, maps them to
/// feature space and concatenates them. Window boundaries are recorded as
/// segment starts.
pub fn sample_timegan(nets: &TimeGanNets, n_windows: usize, seed: u64) -> Result<PanelDataset> {
    if n_windows == 0 {
        return Err(Error::Config("n_windows must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = nets.seq_len;
    let z = uniform_noise(&mut rng, l, n_windows, nets.noise_dim)?;
    let x = nets.recovery.predict(&nets.generate_latent(&z)?)?;
    let batch = SequenceBatch { windows: x.to_windows(), len: l, stride: l };
    let rows = nets.scaler.inverse(&batch.unslice());
    let starts = (1..n_windows).map(|w| w * l).collect();
    PanelDataset::new(nets.columns.clone(), rows, true)?.with_segments(starts)
}

/// [`sample_timegan`] truncated to exactly `n_rows` rows.
pub fn sample_timegan_rows(nets: &TimeGanNets, n_rows: usize, seed: u64) -> Result<PanelDataset> {
    let l = nets.seq_len;
    let full = sample_timegan(nets, n_rows.div_ceil(l), seed)?;
    let rows = full.rows().slice(s![..n_rows, ..]).to_owned();
    let starts = full.segment_starts().iter().copied().filter(|&s| s < n_rows).collect();
    PanelDataset::new(nets.columns.clone(), rows, true)?.with_segments(starts)
}
