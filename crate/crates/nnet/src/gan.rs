//! DCGAN generator/discriminator stacks and the adversarial training loop.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationKind;
use crate::checkpoint::Checkpoint;
use crate::error::{shape_err, NnError, Result};
use crate::layer::{LayerSpec, Mode};
use crate::loss::{disc_loss_grads, gan_losses, gen_loss_grad};
use crate::network::Sequential;
use crate::optim::{adam_step, ema_update, AdamConfig, AdamState};
use crate::tensor::Tensor;

/// Training hyperparameters. Defaults follow the published DCGAN setup for
/// gridded block maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub disc_steps_per_gen_step: usize,
    pub ema_alpha: f64,
    pub latent_dim: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 50,
            epochs: 30_000,
            disc_steps_per_gen_step: 2,
            ema_alpha: 0.9,
            latent_dim: 100,
            seed: 0,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::Spec(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.disc_steps_per_gen_step == 0 {
            return bad("batch size, epochs and discriminator steps must be positive");
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be positive");
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return bad("EMA alpha must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Layer-stack geometry for an `height x width` grid.
///
/// Generator: dense to `C0 x h0 x w0`, two stride-2 transposed convolutions
/// (F=4) and a stride-1 refinement (F=3) to one channel, each hidden stage
/// followed by batch-norm and leaky-relu, sigmoid output, then a centred crop
/// back to the grid. `h0 = ceil((height+2)/4)`, so an 18x22 grid is generated
/// at 20x24. Discriminator: one layer of zero padding, three stride-2
/// convolutions (F=4) with leaky-relu and dropout, then dense to a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct GanArch {
    pub height: usize,
    pub width: usize,
    pub latent_dim: usize,
    pub gen_channels: [usize; 3],
    pub disc_channels: [usize; 3],
    pub slope: f64,
    pub dropout: f64,
}

pub const STANDARD_GEN_CHANNELS: [usize; 3] = [256, 128, 64];
pub const STANDARD_DISC_CHANNELS: [usize; 3] = [64, 128, 256];
pub const PAD: usize = 1;
const KERNEL: usize = 4;

impl GanArch {
    pub fn standard(height: usize, width: usize, latent_dim: usize) -> Self {
        Self::with_channels(height, width, latent_dim, STANDARD_GEN_CHANNELS, STANDARD_DISC_CHANNELS)
    }

    pub fn with_channels(
        height: usize,
        width: usize,
        latent_dim: usize,
        gen_channels: [usize; 3],
        disc_channels: [usize; 3],
    ) -> Self {
        Self {
            height,
            width,
            latent_dim,
            gen_channels,
            disc_channels,
            slope: 0.2,
            dropout: 0.3,
        }
    }

    /// Same topology with every channel count divided by `factor`.
    pub fn narrowed(height: usize, width: usize, latent_dim: usize, factor: usize) -> Self {
        let f = factor.max(1);
        let div = |c: [usize; 3]| c.map(|v| (v / f).max(1));
        Self::with_channels(height, width, latent_dim, div(STANDARD_GEN_CHANNELS), div(STANDARD_DISC_CHANNELS))
    }

    /// Discriminator input extent after zero padding.
    pub fn padded(&self) -> (usize, usize) {
        (self.height + 2 * PAD, self.width + 2 * PAD)
    }

    /// Spatial extent of the generator's first feature map.
    pub fn seed_extent(&self) -> (usize, usize) {
        let (ph, pw) = self.padded();
        (ph.div_ceil(4), pw.div_ceil(4))
    }

    /// Uncropped generator output extent.
    pub fn generated_extent(&self) -> (usize, usize) {
        let (h0, w0) = self.seed_extent();
        (4 * h0, 4 * w0)
    }

    fn lrelu(&self) -> LayerSpec {
        LayerSpec::Activation(ActivationKind::LeakyRelu { slope: self.slope })
    }

    pub fn generator_specs(&self) -> Vec<LayerSpec> {
        let [c0, c1, c2] = self.gen_channels;
        let (h0, w0) = self.seed_extent();
        let (gh, gw) = self.generated_extent();
        vec![
            LayerSpec::Dense {
                inputs: self.latent_dim,
                outputs: c0 * h0 * w0,
            },
            LayerSpec::Reshape {
                shape: vec![c0, h0, w0],
            },
            LayerSpec::BatchNorm { channels: c0 },
            self.lrelu(),
            LayerSpec::ConvTranspose {
                in_channels: c0,
                out_channels: c1,
                kernel: KERNEL,
                stride: 2,
                padding: 1,
            },
            LayerSpec::BatchNorm { channels: c1 },
            self.lrelu(),
            LayerSpec::ConvTranspose {
                in_channels: c1,
                out_channels: c2,
                kernel: KERNEL,
                stride: 2,
                padding: 1,
            },
            LayerSpec::BatchNorm { channels: c2 },
            self.lrelu(),
            LayerSpec::ConvTranspose {
                in_channels: c2,
                out_channels: 1,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
            LayerSpec::Activation(ActivationKind::Sigmoid),
            LayerSpec::Crop {
                top: (gh - self.height) / 2,
                left: (gw - self.width) / 2,
                height: self.height,
                width: self.width,
            },
        ]
    }

    pub fn discriminator_specs(&self) -> Result<Vec<LayerSpec>> {
        let (mut h, mut w) = self.padded();
        let mut specs = vec![LayerSpec::ZeroPad { pad: PAD }];
        let mut cin = 1;
        for &cout in &self.disc_channels {
            if h + 2 < KERNEL || w + 2 < KERNEL {
                return shape_err(format!(
                    "grid {}x{} too small for the discriminator",
                    self.height, self.width
                ));
            }
            h = (h + 2 - KERNEL) / 2 + 1;
            w = (w + 2 - KERNEL) / 2 + 1;
            specs.push(LayerSpec::Conv {
                in_channels: cin,
                out_channels: cout,
                kernel: KERNEL,
                stride: 2,
                padding: 1,
            });
            specs.push(self.lrelu());
            specs.push(LayerSpec::Dropout { p: self.dropout });
            cin = cout;
        }
        specs.push(LayerSpec::Flatten);
        specs.push(LayerSpec::Dense {
            inputs: cin * h * w,
            outputs: 1,
        });
        specs.push(LayerSpec::Activation(ActivationKind::Sigmoid));
        Ok(specs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.latent_dim == 0 {
            return Err(NnError::Spec("empty grid or latent space".into()));
        }
        for s in self.generator_specs() {
            s.validate()?;
        }
        for s in self.discriminator_specs()? {
            s.validate()?;
        }
        Ok(())
    }

    /// Numeric encoding stored alongside checkpoints.
    pub fn to_tensor(&self) -> Tensor {
        let mut v = vec![self.height as f64, self.width as f64, self.latent_dim as f64];
        v.extend(self.gen_channels.iter().map(|&c| c as f64));
        v.extend(self.disc_channels.iter().map(|&c| c as f64));
        v.push(self.slope);
        v.push(self.dropout);
        Tensor::from_vec(&[11], v).expect("11 values")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let d = t.data();
        if d.len() != 11 {
            return Err(NnError::Format(format!("architecture record has {} values", d.len())));
        }
        let u = |x: f64| x as usize;
        Ok(Self {
            height: u(d[0]),
            width: u(d[1]),
            latent_dim: u(d[2]),
            gen_channels: [u(d[3]), u(d[4]), u(d[5])],
            disc_channels: [u(d[6]), u(d[7]), u(d[8])],
            slope: d[9],
            dropout: d[10],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses {
    pub epoch: usize,
    pub disc: f64,
    pub gen: f64,
}

const SNAPSHOT_EVERY: usize = 100;

// Independent ChaCha streams derived from the configured seed.
const STREAM_GEN_INIT: u64 = 1;
const STREAM_DISC_INIT: u64 = 2;
const STREAM_TRAIN: u64 = 3;

fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.gen()
}

/// Draw `n` latent vectors uniformly from `[-1, 1]^latent_dim`.
pub fn latent_batch(rng: &mut ChaCha8Rng, n: usize, latent_dim: usize) -> Tensor {
    let data = (0..n * latent_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(&[n, latent_dim], data).expect("consistent extents")
}

/// Generator, discriminator and the exponential moving average of the
/// generator weights, together with optimizer state.
#[derive(Clone)]
pub struct Gan {
    arch: GanArch,
    config: GanConfig,
    generator: Sequential,
    discriminator: Sequential,
    ema: Sequential,
    gen_opt: AdamState,
    disc_opt: AdamState,
    rng: ChaCha8Rng,
    epochs_done: usize,
    last_finite: Option<Checkpoint>,
}

impl Gan {
    pub fn new(arch: GanArch, config: GanConfig) -> Result<Self> {
        config.validate()?;
        if arch.latent_dim != config.latent_dim {
            return Err(NnError::Spec(format!(
                "architecture latent dimension {} != config {}",
                arch.latent_dim, config.latent_dim
            )));
        }
        arch.validate()?;
        let generator = Sequential::build(&arch.generator_specs(), stream_seed(config.seed, STREAM_GEN_INIT))?;
        let discriminator =
            Sequential::build(&arch.discriminator_specs()?, stream_seed(config.seed, STREAM_DISC_INIT))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(STREAM_TRAIN);
        Ok(Self {
            ema: generator.clone(),
            arch,
            config,
            generator,
            discriminator,
            gen_opt: AdamState::new(),
            disc_opt: AdamState::new(),
            rng,
            epochs_done: 0,
            last_finite: None,
        })
    }

    pub fn arch(&self) -> &GanArch {
        &self.arch
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn generator(&self) -> &Sequential {
        &self.generator
    }

    pub fn discriminator(&self) -> &Sequential {
        &self.discriminator
    }

    pub fn ema_generator(&self) -> &Sequential {
        &self.ema
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    fn check_data(&self, data: &Tensor) -> Result<()> {
        let want = [1, self.arch.height, self.arch.width];
        if data.rank() != 4 || data.shape()[1..] != want || data.batch() == 0 {
            return shape_err(format!(
                "training data must be [n, 1, {}, {}], got {:?}",
                self.arch.height,
                self.arch.width,
                data.shape()
            ));
        }
        Ok(())
    }

    fn disc_step(&mut self, real: &Tensor) -> Result<f64> {
        let z = latent_batch(&mut self.rng, real.batch(), self.config.latent_dim);
        let fake = self.generator.forward(&z, Mode::Train)?;
        let both = Tensor::concat_batch(&[real, &fake])?;
        self.discriminator.zero_grad();
        let p = self.discriminator.forward(&both, Mode::Train)?;
        let n = real.batch();
        let p_real = p.slice_batch(0, n)?;
        let p_fake = p.slice_batch(n, 2 * n)?;
        let losses = gan_losses(&p_real, &p_fake)?;
        let (g_real, g_fake) = disc_loss_grads(&p_real, &p_fake);
        let g = Tensor::concat_batch(&[&g_real, &g_fake])?;
        self.discriminator.backward(&g)?;
        adam_step(&mut self.discriminator.params_mut(), &mut self.disc_opt, &self.config.adam())?;
        Ok(losses.disc)
    }

    fn gen_step(&mut self, n: usize) -> Result<f64> {
        let z = latent_batch(&mut self.rng, n, self.config.latent_dim);
        self.generator.zero_grad();
        let fake = self.generator.forward(&z, Mode::Train)?;
        let p = self.discriminator.forward(&fake, Mode::Train)?;
        let loss = gan_losses(&p, &p)?.gen;
        let g = self.discriminator.backward(&gen_loss_grad(&p))?;
        self.generator.backward(&g)?;
        self.discriminator.zero_grad();
        adam_step(&mut self.generator.params_mut(), &mut self.gen_opt, &self.config.adam())?;
        self.update_ema()?;
        Ok(loss)
    }

    fn update_ema(&mut self) -> Result<()> {
        let current: Vec<Tensor> = self.generator.named_params().into_iter().map(|(_, t)| t.clone()).collect();
        let refs: Vec<&Tensor> = current.iter().collect();
        ema_update(&mut self.ema.params_mut(), &refs, self.config.ema_alpha)?;
        let buffers: Vec<Tensor> = self.generator.named_buffers().into_iter().map(|(_, t)| t.clone()).collect();
        for (dst, src) in self.ema.buffers_mut().into_iter().zip(&buffers) {
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    /// One pass over `data` (`[n, 1, H, W]`): `ceil(n / batch)` batches, each
    /// with `disc_steps_per_gen_step` discriminator updates then one
    /// generator update.
    pub fn train_epoch(&mut self, data: &Tensor) -> Result<EpochLosses> {
        self.check_data(data)?;
        let n = data.batch();
        let batch = self.config.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let mut disc = f64::NAN;
        let mut gen = f64::NAN;
        for chunk in order.chunks(batch) {
            let real = data.select_batch(chunk)?;
            for _ in 0..self.config.disc_steps_per_gen_step {
                disc = self.disc_step(&real)?;
            }
            gen = self.gen_step(chunk.len())?;
        }
        self.epochs_done += 1;
        let losses = EpochLosses {
            epoch: self.epochs_done,
            disc,
            gen,
        };
        if !(disc.is_finite() && gen.is_finite()) {
            return Err(NnError::Divergence {
                epoch: self.epochs_done,
                reason: format!("non-finite losses disc={disc} gen={gen}"),
                last_finite: self.last_finite.clone().map(Box::new),
            });
        }
        if self.epochs_done % SNAPSHOT_EVERY == 0 {
            self.last_finite = Some(self.to_checkpoint());
        }
        Ok(losses)
    }

    /// Run the configured number of epochs, calling `on_epoch` after each.
    pub fn train<F>(&mut self, data: &Tensor, mut on_epoch: F) -> Result<Vec<EpochLosses>>
    where
        F: FnMut(&Gan, &EpochLosses) -> Result<()>,
    {
        self.check_data(data)?;
        self.last_finite = Some(self.to_checkpoint());
        let mut history = Vec::with_capacity(self.config.epochs);
        while self.epochs_done < self.config.epochs {
            let losses = self.train_epoch(data).map_err(|e| match e {
                NnError::Divergence { epoch, reason, .. } => NnError::Divergence {
                    epoch,
                    reason,
                    last_finite: self.last_finite.clone().map(Box::new),
                },
                other => other,
            })?;
            on_epoch(self, &losses)?;
            history.push(losses);
        }
        Ok(history)
    }

    /// `n` fields `[n, 1, H, W]` from the EMA generator in eval mode. The
    /// result depends only on the weights, `n` and `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Tensor> {
        sample_generator(&self.ema, self.config.latent_dim, n, seed)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push("arch", self.arch.to_tensor());
        for (prefix, net) in [("gen/", &self.generator), ("ema/", &self.ema), ("disc/", &self.discriminator)] {
            for (name, t) in net.named_params().into_iter().chain(net.named_buffers()) {
                let mut t = t.clone();
                t.clear_grad();
                ck.push(format!("{prefix}{name}"), t);
            }
        }
        ck
    }

    /// Rebuild from a checkpoint written by [`Gan::to_checkpoint`]. Optimizer
    /// state is not stored, so the result is meant for sampling.
    pub fn from_checkpoint(ck: &Checkpoint, config: GanConfig) -> Result<Self> {
        let arch = GanArch::from_tensor(
            ck.get("arch").ok_or_else(|| NnError::Format("checkpoint lacks architecture".into()))?,
        )?;
        let mut gan = Gan::new(arch, config)?;
        gan.generator.load_named(&ck.with_prefix("gen/"))?;
        gan.ema.load_named(&ck.with_prefix("ema/"))?;
        gan.discriminator.load_named(&ck.with_prefix("disc/"))?;
        gan.epochs_done = gan.config.epochs;
        Ok(gan)
    }
}

const SAMPLE_CHUNK: usize = 256;

pub fn sample_generator(net: &Sequential, latent_dim: usize, n: usize, seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = net.clone();
    let mut parts = Vec::new();
    let mut left = n;
    while left > 0 {
        let m = left.min(SAMPLE_CHUNK);
        let z = latent_batch(&mut rng, m, latent_dim);
        parts.push(net.forward(&z, Mode::Eval)?);
        left -= m;
    }
    if parts.is_empty() {
        return shape_err("sample count must be positive");
    }
    let refs: Vec<&Tensor> = parts.iter().collect();
    Tensor::concat_batch(&refs)
}
