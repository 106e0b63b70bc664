//! Alternating minimax training of a generator against kernel-discrepancy
//! losses, with trainable witness points.
//!
//! The core loop interleaves, per outer iteration, `n_v` witness ascent steps
//! (`v ← v + γ∇_v L`, fresh minibatches each step) with `n_g` generator
//! descent steps (`θ ← θ − γ∇_θ L`), where
//!
//! ```text
//!     L = MMD²(X, Y) + λ·UME²(X, Y; V)
//! ```
//!
//! and `λ = ∞` is a mode flag that drops the MMD term. The autoencoded
//! variant moves the witness points into the latent space of a jointly
//! trained encoder/decoder pair, applies the kernel as k(E(x), E(y)), and
//! adds `λ₂` times the autoencoder reconstruction error to the objective.
//!
//! Reproducibility is structural: every consumer of randomness (witness-loop
//! batches, generator-loop batches, autoencoder loops, initialization,
//! evaluation) draws from its own counter-based stream of one seeded
//! generator. That makes the λ = 0 run bit-identical to a plain MMD run, and
//! an identity-autoencoder run bit-identical to the data-space algorithm,
//! because the shared code paths consume exactly the same random numbers.

use crate::analytic::Lambda;
use crate::error::{Error, Result};
use crate::estimators::{
    grad_mmd2_wrt_y, grad_ume2_wrt_witness, grad_ume2_wrt_y, mmd2, ume2_hat, MmdVariant,
    WitnessSet,
};
use crate::kernel::KernelSpec;
use crate::mixtures::GaussianMixture;
use crate::nn::{adam_update, sgd_update, AdamState, MlpParams};
use crate::samples::Samples;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// ───────────────────────── RNG streams ─────────────────────────

/// Stream ids for the per-consumer random streams. Every logical consumer of
/// randomness in a run owns one stream of the seeded generator, so adding or
/// removing one consumer never perturbs the draws seen by another.
pub const STREAM_INIT: u64 = 0;
pub const STREAM_WITNESS_REAL: u64 = 1;
pub const STREAM_WITNESS_NOISE: u64 = 2;
pub const STREAM_GEN_REAL: u64 = 3;
pub const STREAM_GEN_NOISE: u64 = 4;
pub const STREAM_AE_REAL: u64 = 5;
pub const STREAM_AE_NOISE: u64 = 6;
pub const STREAM_ENC_REAL: u64 = 7;
pub const STREAM_ENC_NOISE: u64 = 8;
pub const STREAM_EVAL: u64 = 9;

/// One stream of the deterministic generator for `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct RoleRngs {
    witness_real: ChaCha8Rng,
    witness_noise: ChaCha8Rng,
    gen_real: ChaCha8Rng,
    gen_noise: ChaCha8Rng,
    ae_real: ChaCha8Rng,
    ae_noise: ChaCha8Rng,
    enc_real: ChaCha8Rng,
    enc_noise: ChaCha8Rng,
    eval: ChaCha8Rng,
}

impl RoleRngs {
    fn new(seed: u64) -> Self {
        RoleRngs {
            witness_real: stream_rng(seed, STREAM_WITNESS_REAL),
            witness_noise: stream_rng(seed, STREAM_WITNESS_NOISE),
            gen_real: stream_rng(seed, STREAM_GEN_REAL),
            gen_noise: stream_rng(seed, STREAM_GEN_NOISE),
            ae_real: stream_rng(seed, STREAM_AE_REAL),
            ae_noise: stream_rng(seed, STREAM_AE_NOISE),
            enc_real: stream_rng(seed, STREAM_ENC_REAL),
            enc_noise: stream_rng(seed, STREAM_ENC_NOISE),
            eval: stream_rng(seed, STREAM_EVAL),
        }
    }
}

/// `n × d` matrix of independent standard-normal draws.
pub fn sample_standard_normal(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Samples {
    let mut s = Samples::zeros(n, d);
    for v in s.data_mut() {
        *v = rng.sample(StandardNormal);
    }
    s
}

// ───────────────────────── data sources ─────────────────────────

/// Anything the trainer can draw real-data minibatches from.
pub trait DataSource {
    fn dim(&self) -> usize;
    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Samples;
}

impl DataSource for GaussianMixture {
    fn dim(&self) -> usize {
        GaussianMixture::dim(self)
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Samples {
        self.sample(n, rng)
    }
}

/// A finite dataset. Requesting exactly the full dataset size returns the
/// rows in storage order (full-batch mode, no randomness consumed); any
/// other size draws rows uniformly with replacement.
#[derive(Debug, Clone)]
pub struct FixedDataset {
    data: Samples,
}

impl FixedDataset {
    pub fn new(data: Samples) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptySamples("fixed dataset"));
        }
        Ok(FixedDataset { data })
    }

    pub fn data(&self) -> &Samples {
        &self.data
    }
}

impl DataSource for FixedDataset {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Samples {
        if n == self.data.n() {
            return self.data.clone();
        }
        let mut out = Samples::zeros(n, self.data.dim());
        for i in 0..n {
            let pick = rng.random_range(0..self.data.n());
            out.row_mut(i).copy_from_slice(self.data.row(pick));
        }
        out
    }
}

/// Where the generator's latent inputs come from. The default is standard
/// normal noise; a data source can be substituted so that full-batch runs
/// replay a fixed latent pool (used to place a run exactly at a realizable
/// optimum).
enum NoiseKind<'a> {
    StandardNormal,
    Source(&'a dyn DataSource),
}

// ───────────────────────── generators ─────────────────────────

/// The trainable sampler `z ↦ y`. Parameters are exposed as one flat slice
/// so a single optimizer update path serves every implementation.
pub trait Generator {
    fn noise_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn generate(&self, z: &Samples) -> Result<Samples>;
    /// Gradient of a scalar loss over the flat parameters, given ∂loss/∂y
    /// per generated row (summed over the batch).
    fn param_grad(&self, z: &Samples, out_grad: &Samples) -> Result<Vec<f64>>;
    /// Generate from `z`, let `make_ograd` turn the batch into ∂loss/∂y, and
    /// return the parameter gradient — in one pass where the implementation
    /// can reuse its forward state instead of recomputing it.
    fn generate_and_param_grad(
        &self,
        z: &Samples,
        make_ograd: &mut dyn FnMut(&Samples) -> Result<Samples>,
    ) -> Result<(Samples, Vec<f64>)> {
        let y = self.generate(z)?;
        let ograd = make_ograd(&y)?;
        let pg = self.param_grad(z, &ograd)?;
        Ok((y, pg))
    }
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
}

/// Feedforward-network generator.
#[derive(Debug, Clone)]
pub struct MlpGenerator {
    pub net: MlpParams,
}

impl MlpGenerator {
    pub fn new(net: MlpParams) -> Self {
        MlpGenerator { net }
    }

    /// Default 2D generator: 10-dimensional noise through two 64-unit tanh
    /// layers into a linear 2D output.
    pub fn default_2d<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        use crate::nn::Activation::{Identity, Tanh};
        Ok(MlpGenerator::new(MlpParams::glorot_init(
            &[10, 64, 64, 2],
            &[Tanh, Tanh, Identity],
            rng,
        )?))
    }
}

impl Generator for MlpGenerator {
    fn noise_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn data_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn generate(&self, z: &Samples) -> Result<Samples> {
        Ok(self.net.forward(z)?.0)
    }

    fn param_grad(&self, z: &Samples, out_grad: &Samples) -> Result<Vec<f64>> {
        let (_, cache) = self.net.forward(z)?;
        self.net.backward(&cache, out_grad)
    }

    fn generate_and_param_grad(
        &self,
        z: &Samples,
        make_ograd: &mut dyn FnMut(&Samples) -> Result<Samples>,
    ) -> Result<(Samples, Vec<f64>)> {
        let (y, cache) = self.net.forward(z)?;
        let ograd = make_ograd(&y)?;
        let pg = self.net.backward(&cache, &ograd)?;
        Ok((y, pg))
    }

    fn params(&self) -> &[f64] {
        self.net.theta()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.net.theta_mut()
    }
}

/// Location-family generator `y = z + θ`. With a latent pool z and data
/// built as `z + θ*`, the parameter θ* is a realizable optimum: at θ = θ*
/// generated and real full batches coincide bitwise and every gradient is
/// exactly zero.
#[derive(Debug, Clone)]
pub struct LocationGenerator {
    theta: Vec<f64>,
}

impl LocationGenerator {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid("location generator needs at least one coordinate"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite { context: "location generator parameters" });
        }
        Ok(LocationGenerator { theta })
    }
}

impl Generator for LocationGenerator {
    fn noise_dim(&self) -> usize {
        self.theta.len()
    }

    fn data_dim(&self) -> usize {
        self.theta.len()
    }

    fn generate(&self, z: &Samples) -> Result<Samples> {
        if z.dim() != self.theta.len() {
            return Err(Error::DimensionMismatch { expected: self.theta.len(), got: z.dim() });
        }
        let mut y = z.clone();
        for r in 0..y.n() {
            for (c, t) in y.row_mut(r).iter_mut().zip(&self.theta) {
                *c += t;
            }
        }
        Ok(y)
    }

    fn param_grad(&self, z: &Samples, out_grad: &Samples) -> Result<Vec<f64>> {
        if out_grad.dim() != self.theta.len() || out_grad.n() != z.n() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                got: out_grad.dim(),
            });
        }
        let mut g = vec![0.0; self.theta.len()];
        for r in 0..out_grad.n() {
            for (gc, oc) in g.iter_mut().zip(out_grad.row(r)) {
                *gc += oc;
            }
        }
        Ok(g)
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }
}

// ───────────────────────── configuration ─────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Plain gradient steps θ ← θ − γ·g, exactly as the update rules read.
    Sgd,
    /// Adam with the γ from the config as its learning rate.
    Adam,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Witness count J ≥ 1.
    pub j: usize,
    /// Trade-off weight between the global and local terms (∞ = local only).
    pub lambda: Lambda,
    /// Reconstruction weight (autoencoded variant only).
    pub lambda2: f64,
    /// Learning rate, shared by every player.
    pub gamma: f64,
    /// Minibatch size B ≥ 2.
    pub batch: usize,
    /// Generator descent steps per outer iteration (≥ 1).
    pub n_g: usize,
    /// Witness ascent steps per outer iteration (≥ 1).
    pub n_v: usize,
    /// Encoder ascent steps per outer iteration (0 freezes the encoder).
    pub n_e: usize,
    /// Autoencoder descent steps per outer iteration (0 freezes it).
    pub n_d: usize,
    /// Convergence tolerance on the witness-gradient max-norm.
    pub grad_threshold: f64,
    /// Epoch budget; an epoch is `epoch_iters` outer iterations.
    pub max_epochs: usize,
    pub epoch_iters: usize,
    pub seed: u64,
    pub mmd_variant: MmdVariant,
    pub optimizer: OptimizerKind,
    /// Record a snapshot every N iterations (0 = off) …
    pub snapshot_every: usize,
    /// … and additionally at these exact iterations.
    pub snapshot_at: Vec<usize>,
    /// Generated-sample count per snapshot, drawn from a fixed noise batch.
    pub snapshot_samples: usize,
    /// Evaluate and keep a loss record every N outer iterations (≥ 1). The
    /// record costs an extra forward pass plus both loss estimates, so long
    /// runs thin it; the final iteration is always recorded. Does not touch
    /// the training arithmetic or the random streams.
    pub record_every: usize,
}

impl TrainConfig {
    /// Defaults for the 2D experiments: J=20, λ=0.1, γ=1e-3, B=64,
    /// n_g=n_v=1, convergence threshold 1e-5, at most 20 epochs.
    pub fn defaults_2d(seed: u64) -> Self {
        TrainConfig {
            j: 20,
            lambda: Lambda::Finite(0.1),
            lambda2: 1.0,
            gamma: 1e-3,
            batch: 64,
            n_g: 1,
            n_v: 1,
            n_e: 1,
            n_d: 1,
            grad_threshold: 1e-5,
            max_epochs: 20,
            epoch_iters: 100,
            seed,
            mmd_variant: MmdVariant::Biased,
            optimizer: OptimizerKind::Adam,
            snapshot_every: 0,
            snapshot_at: Vec::new(),
            snapshot_samples: 512,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < 1 {
            return Err(Error::invalid("witness count must be >= 1"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.gamma)));
        }
        if self.batch < 2 {
            return Err(Error::invalid("batch size must be >= 2"));
        }
        if self.n_g < 1 || self.n_v < 1 {
            return Err(Error::invalid("n_g and n_v must be >= 1"));
        }
        if !(self.grad_threshold > 0.0) || !self.grad_threshold.is_finite() {
            return Err(Error::invalid("convergence threshold must be positive"));
        }
        if self.max_epochs < 1 || self.epoch_iters < 1 {
            return Err(Error::invalid("epoch budget must be >= 1 epoch of >= 1 iterations"));
        }
        if let Lambda::Finite(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!("lambda must be >= 0, got {l}")));
            }
        }
        if !(self.lambda2 >= 0.0) || !self.lambda2.is_finite() {
            return Err(Error::invalid(format!("lambda2 must be >= 0, got {}", self.lambda2)));
        }
        if self.snapshot_samples < 1 {
            return Err(Error::invalid("snapshot sample count must be >= 1"));
        }
        if self.record_every < 1 {
            return Err(Error::invalid("record cadence must be >= 1"));
        }
        Ok(())
    }

    fn iteration_budget(&self) -> usize {
        self.max_epochs * self.epoch_iters
    }
}

// ───────────────────────── run records ─────────────────────────

/// Per-iteration log line.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    /// 1-based outer-iteration index.
    pub iter: usize,
    pub loss_total: f64,
    pub loss_mmd: f64,
    pub loss_ume: f64,
    /// Reconstruction term (autoencoded runs only).
    pub loss_rec: Option<f64>,
    /// Max-norm of the witness gradient ∂L/∂V at the last ascent step of
    /// this iteration (0 for runs without witness feedback).
    pub witness_grad_maxnorm: f64,
}

/// Periodic capture of the run state.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub iter: usize,
    pub gen_params: Vec<f64>,
    pub witnesses: Option<Samples>,
    /// Generated samples from the fixed evaluation noise batch.
    pub samples: Samples,
}

/// Everything a finished (or interrupted) run recorded.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub records: Vec<IterRecord>,
    /// Witness positions per iteration, starting with the initial set at
    /// iteration 0.
    pub witness_trace: Vec<(usize, Samples)>,
    pub snapshots: Vec<Snapshot>,
    /// First iteration at which the witness-gradient criterion fired.
    pub converged_at: Option<usize>,
    pub iterations: usize,
}

/// Read-only observation points into a running training loop.
pub trait TrainHooks {
    fn on_iteration(&mut self, _rec: &IterRecord, _gen_params: &[f64], _witnesses: Option<&WitnessSet>) {}
}

/// The do-nothing hook set.
pub struct NoHooks;

impl TrainHooks for NoHooks {}

// ───────────────────────── the data-space trainer ─────────────────────────

/// Alternating witness/generator training. With witnesses present this is
/// the full minimax loop; constructed without witnesses it degenerates to a
/// plain MMD-descent run sharing the same code paths and random streams.
pub struct GlocadTrainer<'a, G: Generator> {
    cfg: TrainConfig,
    kernel: KernelSpec,
    source: &'a dyn DataSource,
    noise: NoiseKind<'a>,
    gen: G,
    witnesses: Option<WitnessSet>,
    adam: Option<AdamState>,
    rngs: RoleRngs,
    eval_z: Samples,
    iter: usize,
    converged_at: Option<usize>,
    records: Vec<IterRecord>,
    witness_trace: Vec<(usize, Samples)>,
    snapshots: Vec<Snapshot>,
}

impl<'a, G: Generator> GlocadTrainer<'a, G> {
    pub fn new(
        source: &'a dyn DataSource,
        gen: G,
        witnesses: Option<WitnessSet>,
        kernel: KernelSpec,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if gen.data_dim() != source.dim() {
            return Err(Error::DimensionMismatch { expected: source.dim(), got: gen.data_dim() });
        }
        if let Some(v) = &witnesses {
            if v.dim() != source.dim() {
                return Err(Error::DimensionMismatch { expected: source.dim(), got: v.dim() });
            }
            if v.n() != cfg.j {
                return Err(Error::invalid(format!(
                    "config declares {} witness points but {} were provided",
                    cfg.j,
                    v.n()
                )));
            }
        }
        let mut rngs = RoleRngs::new(cfg.seed);
        let eval_z = sample_standard_normal(cfg.snapshot_samples, gen.noise_dim(), &mut rngs.eval);
        let adam = match cfg.optimizer {
            OptimizerKind::Adam => Some(AdamState::new(gen.params().len())),
            OptimizerKind::Sgd => None,
        };
        let witness_trace = match &witnesses {
            Some(v) => vec![(0, v.points().clone())],
            None => Vec::new(),
        };
        Ok(GlocadTrainer {
            cfg,
            kernel,
            source,
            noise: NoiseKind::StandardNormal,
            gen,
            witnesses,
            adam,
            rngs,
            eval_z,
            iter: 0,
            converged_at: None,
            records: Vec::new(),
            witness_trace,
            snapshots: Vec::new(),
        })
    }

    /// Replace the standard-normal latent noise with draws from `noise`
    /// (dimension must equal the generator's noise dimension).
    pub fn with_noise_source(mut self, noise: &'a dyn DataSource) -> Result<Self> {
        if noise.dim() != self.gen.noise_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.gen.noise_dim(),
                got: noise.dim(),
            });
        }
        self.noise = NoiseKind::Source(noise);
        Ok(self)
    }

    pub fn gen(&self) -> &G {
        &self.gen
    }

    pub fn witnesses(&self) -> Option<&WitnessSet> {
        self.witnesses.as_ref()
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    pub fn converged_at(&self) -> Option<usize> {
        self.converged_at
    }

    /// Per-iteration loss records accumulated so far in this run segment.
    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn gen_mut(&mut self) -> &mut G {
        &mut self.gen
    }

    pub fn witnesses_mut(&mut self) -> Option<&mut WitnessSet> {
        self.witnesses.as_mut()
    }

    pub fn adam_state(&self) -> Option<&AdamState> {
        self.adam.as_ref()
    }

    pub fn adam_state_mut(&mut self) -> Option<&mut AdamState> {
        self.adam.as_mut()
    }

    /// Advance the random streams and the iteration counter past `iters`
    /// outer iterations without training: exactly the minibatches those
    /// iterations would draw are drawn and discarded, so the streams end up
    /// in the same position as after really running them. Restoring the
    /// saved generator parameters, witness points, and optimizer state on
    /// top continues a checkpointed run bit for bit. Clears the local
    /// records (the skipped prefix was recorded by the run being resumed).
    pub fn fast_forward(&mut self, iters: usize) {
        let b = self.cfg.batch;
        let nd = self.gen.noise_dim();
        for _ in 0..iters {
            if self.witnesses.is_some() {
                for _ in 0..self.cfg.n_v {
                    let _ = self.source.draw(b, &mut self.rngs.witness_real);
                    let _ = Self::draw_noise(&mut self.rngs.witness_noise, &self.noise, b, nd);
                }
            }
            for _ in 0..self.cfg.n_g {
                let _ = self.source.draw(b, &mut self.rngs.gen_real);
                let _ = Self::draw_noise(&mut self.rngs.gen_noise, &self.noise, b, nd);
            }
        }
        self.iter += iters;
        self.records.clear();
        self.witness_trace.clear();
        self.snapshots.clear();
    }

    fn draw_noise(rng: &mut ChaCha8Rng, noise: &NoiseKind<'a>, n: usize, d: usize) -> Samples {
        match noise {
            NoiseKind::StandardNormal => sample_standard_normal(n, d, rng),
            NoiseKind::Source(s) => s.draw(n, rng),
        }
    }

    /// One outer iteration: `n_v` witness ascent steps, then `n_g` generator
    /// descent steps, then — on record iterations (see
    /// [`TrainConfig::record_every`]) — a loss record on the last generator
    /// minibatch. Returns `None` when no record was due this iteration.
    pub fn step(&mut self) -> Result<Option<IterRecord>> {
        let it = self.iter + 1;
        let b = self.cfg.batch;
        let nd = self.gen.noise_dim();
        let mut wgrad_maxnorm = 0.0f64;

        // witness ascent: v ← v + γ·∂L/∂v, fresh minibatches per step
        if let Some(v) = &mut self.witnesses {
            for _ in 0..self.cfg.n_v {
                let x = self.source.draw(b, &mut self.rngs.witness_real);
                let z = Self::draw_noise(&mut self.rngs.witness_noise, &self.noise, b, nd);
                let y = self.gen.generate(&z)?;
                let lam_scale = match self.cfg.lambda {
                    // λ = 0: the loss is witness-free; the update is exactly
                    // zero, so skip the arithmetic but keep the sampling
                    // structure of the loop.
                    Lambda::Finite(l) if l == 0.0 => {
                        wgrad_maxnorm = 0.0;
                        continue;
                    }
                    Lambda::Finite(l) => l,
                    Lambda::Infinite => 1.0,
                };
                let g = grad_ume2_wrt_witness(&x, &y, v, &self.kernel)?;
                let step_scale = self.cfg.gamma * lam_scale;
                let mut mx = 0.0f64;
                for (vc, gc) in v.points_mut().data_mut().iter_mut().zip(g.data()) {
                    mx = mx.max((lam_scale * gc).abs());
                    *vc += step_scale * gc;
                }
                wgrad_maxnorm = mx;
            }
        }

        // generator descent on the assembled loss gradient
        let mut last_batch: Option<(Samples, Samples)> = None;
        for _ in 0..self.cfg.n_g {
            let x = self.source.draw(b, &mut self.rngs.gen_real);
            let z = Self::draw_noise(&mut self.rngs.gen_noise, &self.noise, b, nd);
            let (witnesses, kernel, cfg) = (&self.witnesses, &self.kernel, &self.cfg);
            let (_, pg) = self.gen.generate_and_param_grad(&z, &mut |y| {
                Ok(if let Some(v) = witnesses.as_ref() {
                    match cfg.lambda {
                        // λ = 0 must follow the exact arithmetic of the plain
                        // MMD run (adding a scaled-by-zero term could flip
                        // signed zeros), so the local term is skipped entirely.
                        Lambda::Finite(l) if l == 0.0 => {
                            grad_mmd2_wrt_y(&x, y, kernel, cfg.mmd_variant)?
                        }
                        Lambda::Finite(l) => {
                            let mut g = grad_mmd2_wrt_y(&x, y, kernel, cfg.mmd_variant)?;
                            let gu = grad_ume2_wrt_y(&x, y, v, kernel)?;
                            for (a, u) in g.data_mut().iter_mut().zip(gu.data()) {
                                *a += l * u;
                            }
                            g
                        }
                        Lambda::Infinite => grad_ume2_wrt_y(&x, y, v, kernel)?,
                    }
                } else {
                    grad_mmd2_wrt_y(&x, y, kernel, cfg.mmd_variant)?
                })
            })?;
            let update = match self.cfg.optimizer {
                OptimizerKind::Sgd => sgd_update(self.gen.params_mut(), &pg, self.cfg.gamma),
                OptimizerKind::Adam => adam_update(
                    self.gen.params_mut(),
                    &pg,
                    self.adam.as_mut().expect("adam state exists in adam mode"),
                    self.cfg.gamma,
                ),
            };
            update.map_err(|e| {
                Error::TrainingAborted(format!("generator update rejected at iteration {it}: {e}"))
            })?;
            last_batch = Some((x, z));
        }

        // loss record on the last generator minibatch, post-update; it costs
        // an extra forward pass and both loss estimates, so long runs thin it
        // to every `record_every` iterations (training arithmetic and random
        // streams are identical either way)
        let record_due =
            it % self.cfg.record_every == 0 || it == self.cfg.iteration_budget();
        let rec = if record_due {
            let (x, z) = last_batch.expect("n_g >= 1 guarantees a generator minibatch");
            let y = self.gen.generate(&z)?;
            let loss_mmd = mmd2(&x, &y, &self.kernel, self.cfg.mmd_variant)?;
            let loss_ume = match self.witnesses.as_ref() {
                Some(v) => ume2_hat(&x, &y, v, &self.kernel)?,
                None => 0.0,
            };
            let loss_total = match (self.witnesses.is_some(), self.cfg.lambda) {
                (false, _) => loss_mmd,
                (true, Lambda::Finite(l)) => loss_mmd + l * loss_ume,
                (true, Lambda::Infinite) => loss_ume,
            };
            if !loss_total.is_finite() || !loss_mmd.is_finite() || !loss_ume.is_finite() {
                let max_theta = self.gen.params().iter().fold(0.0f64, |m, t| m.max(t.abs()));
                return Err(Error::TrainingAborted(format!(
                    "non-finite loss at iteration {it}: mmd={loss_mmd:e}, ume={loss_ume:e}, \
                     max|theta|={max_theta:e}"
                )));
            }
            Some(IterRecord {
                iter: it,
                loss_total,
                loss_mmd,
                loss_ume,
                loss_rec: None,
                witness_grad_maxnorm: wgrad_maxnorm,
            })
        } else {
            None
        };
        self.iter = it;
        self.bookkeep(rec.as_ref(), it);

        // convergence: the witness-gradient criterion is meaningful only
        // when witness feedback is live (present, and not silenced by λ = 0)
        let lambda_zero = matches!(self.cfg.lambda, Lambda::Finite(l) if l == 0.0);
        if self.witnesses.is_some()
            && !lambda_zero
            && self.converged_at.is_none()
            && wgrad_maxnorm < self.cfg.grad_threshold
        {
            self.converged_at = Some(it);
        }
        Ok(rec)
    }

    fn bookkeep(&mut self, rec: Option<&IterRecord>, it: usize) {
        if let Some(rec) = rec {
            self.records.push(rec.clone());
            if let Some(v) = &self.witnesses {
                self.witness_trace.push((rec.iter, v.points().clone()));
            }
        }
        let due = (self.cfg.snapshot_every > 0 && it % self.cfg.snapshot_every == 0)
            || self.cfg.snapshot_at.contains(&it);
        if due {
            if let Ok(samples) = self.gen.generate(&self.eval_z) {
                self.snapshots.push(Snapshot {
                    iter: it,
                    gen_params: self.gen.params().to_vec(),
                    witnesses: self.witnesses.as_ref().map(|v| v.points().clone()),
                    samples,
                });
            }
        }
    }

    /// Run until the convergence criterion fires or the epoch budget is
    /// exhausted.
    pub fn run(&mut self, hooks: &mut dyn TrainHooks) -> Result<()> {
        let budget = self.cfg.iteration_budget();
        while self.iter < budget && self.converged_at.is_none() {
            if let Some(rec) = self.step()? {
                hooks.on_iteration(&rec, self.gen.params(), self.witnesses.as_ref());
            }
        }
        Ok(())
    }

    pub fn finish(self) -> (G, Option<WitnessSet>, TrainResult) {
        let result = TrainResult {
            records: self.records,
            witness_trace: self.witness_trace,
            snapshots: self.snapshots,
            converged_at: self.converged_at,
            iterations: self.iter,
        };
        (self.gen, self.witnesses, result)
    }
}

/// Full alternating run; returns the trained generator, final witness set,
/// and the run log.
pub fn glocad_train<G: Generator>(
    source: &dyn DataSource,
    gen: G,
    witnesses: WitnessSet,
    kernel: KernelSpec,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<(G, WitnessSet, TrainResult)> {
    let mut t = GlocadTrainer::new(source, gen, Some(witnesses), kernel, cfg.clone())?;
    t.run(hooks)?;
    let (gen, v, result) = t.finish();
    Ok((gen, v.expect("witnesses were provided"), result))
}

/// Plain MMD-descent baseline: the same loop, streams, and update path with
/// no witness players.
pub fn mmd_gan_train<G: Generator>(
    source: &dyn DataSource,
    gen: G,
    kernel: KernelSpec,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<(G, TrainResult)> {
    let mut t = GlocadTrainer::new(source, gen, None, kernel, cfg.clone())?;
    t.run(hooks)?;
    let (gen, _, result) = t.finish();
    Ok((gen, result))
}

// ───────────────────────── witness initialization ─────────────────────────

/// Witness points drawn from the data source (the default initialization).
pub fn init_witnesses_from_data(
    source: &dyn DataSource,
    j: usize,
    rng: &mut ChaCha8Rng,
) -> Result<WitnessSet> {
    if j == 0 {
        return Err(Error::invalid("witness count must be >= 1"));
    }
    WitnessSet::new(source.draw(j, rng))
}

/// Witness points seeded half from data, half from current generator
/// output (the other documented initialization).
pub fn init_witnesses_mixed<G: Generator>(
    source: &dyn DataSource,
    gen: &G,
    j: usize,
    rng: &mut ChaCha8Rng,
) -> Result<WitnessSet> {
    if j == 0 {
        return Err(Error::invalid("witness count must be >= 1"));
    }
    let from_data = j.div_ceil(2);
    let mut pts = source.draw(from_data, rng);
    if j > from_data {
        let z = sample_standard_normal(j - from_data, gen.noise_dim(), rng);
        let y = gen.generate(&z)?;
        for r in 0..y.n() {
            pts.push_row(y.row(r));
        }
    }
    WitnessSet::new(pts)
}

// ───────────────────────── autoencoded variant ─────────────────────────

/// The three networks of the autoencoded algorithm.
#[derive(Debug, Clone)]
pub struct AutoGlocadNets {
    pub gen: MlpParams,
    pub enc: MlpParams,
    pub dec: MlpParams,
}

struct AeApplied {
    enc_cache: crate::nn::ForwardCache,
    dec_cache: crate::nn::ForwardCache,
    /// reconstruction − input, row for row.
    resid: Samples,
    /// Σ‖reconstruction − input‖².
    sq_sum: f64,
}

fn apply_ae(enc: &MlpParams, dec: &MlpParams, t: &Samples) -> Result<AeApplied> {
    let (encoded, enc_cache) = enc.forward(t)?;
    let (recon, dec_cache) = dec.forward(&encoded)?;
    let mut resid = recon;
    let mut sq_sum = 0.0;
    for r in 0..t.n() {
        for (rc, tc) in resid.row_mut(r).iter_mut().zip(t.row(r)) {
            *rc -= tc;
            sq_sum += *rc * *rc;
        }
    }
    Ok(AeApplied { enc_cache, dec_cache, resid, sq_sum })
}

/// Reconstruction-gradient contributions of one batch: returns
/// (encoder-param grad, decoder-param grad) of `(1/B)Σ‖t − D(E(t))‖²`.
fn ae_param_grads(
    enc: &MlpParams,
    dec: &MlpParams,
    ae: &AeApplied,
    batch: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let scale = 2.0 / batch as f64;
    let mut ograd = ae.resid.clone();
    for v in ograd.data_mut() {
        *v *= scale;
    }
    let (gd, upstream) = dec.backward_with_input_grad(&ae.dec_cache, &ograd)?;
    let ge = enc.backward(&ae.enc_cache, &upstream)?;
    Ok((ge, gd))
}

fn add_scaled(acc: &mut [f64], v: &[f64], s: f64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += s * x;
    }
}

/// Gradient of `MMD² + λ·UME²` with respect to the second sample set's rows;
/// pass the sets swapped to get the first set's gradient.
fn latent_loss_grad_wrt_second(
    first: &Samples,
    second: &Samples,
    v: &WitnessSet,
    kernel: &KernelSpec,
    lambda: Lambda,
    variant: MmdVariant,
) -> Result<Samples> {
    match lambda {
        Lambda::Finite(l) if l == 0.0 => grad_mmd2_wrt_y(first, second, kernel, variant),
        Lambda::Finite(l) => {
            let mut g = grad_mmd2_wrt_y(first, second, kernel, variant)?;
            let gu = grad_ume2_wrt_y(first, second, v, kernel)?;
            for (a, u) in g.data_mut().iter_mut().zip(gu.data()) {
                *a += l * u;
            }
            Ok(g)
        }
        Lambda::Infinite => grad_ume2_wrt_y(first, second, v, kernel),
    }
}

/// Alternating training with the witness points in the latent space of a
/// jointly trained autoencoder. Per outer iteration: `n_d` autoencoder
/// descent steps on the reconstruction error, `n_e` encoder ascent steps on
/// the total loss, then the witness/generator pair exactly as in the
/// data-space loop (witness ascent before generator descent, so that an
/// identity autoencoder reduces to it bit for bit).
pub fn autoglocad_train(
    source: &dyn DataSource,
    nets: AutoGlocadNets,
    witnesses: WitnessSet,
    kernel: KernelSpec,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<(AutoGlocadNets, WitnessSet, TrainResult)> {
    cfg.validate()?;
    let AutoGlocadNets { gen, enc, dec } = nets;
    let data_dim = source.dim();
    let latent = enc.output_dim();
    if gen.output_dim() != data_dim || enc.input_dim() != data_dim || dec.output_dim() != data_dim
    {
        return Err(Error::invalid(format!(
            "data-space dimensions disagree: source {data_dim}, generator out {}, encoder in {}, \
             decoder out {}",
            gen.output_dim(),
            enc.input_dim(),
            dec.output_dim()
        )));
    }
    if dec.input_dim() != latent || witnesses.dim() != latent {
        return Err(Error::invalid(format!(
            "latent dimensions disagree: encoder out {latent}, decoder in {}, witnesses {}",
            dec.input_dim(),
            witnesses.dim()
        )));
    }
    if witnesses.n() != cfg.j {
        return Err(Error::invalid(format!(
            "config declares {} witness points but {} were provided",
            cfg.j,
            witnesses.n()
        )));
    }

    let mut st = AutoState {
        cfg: cfg.clone(),
        kernel,
        gen,
        enc,
        dec,
        v: witnesses,
        adam_gen: AdamState::new(0),
        adam_enc: AdamState::new(0),
        adam_dec: AdamState::new(0),
        rngs: RoleRngs::new(cfg.seed),
        eval_z: Samples::zeros(0, 0),
        iter: 0,
        converged_at: None,
        records: Vec::new(),
        witness_trace: Vec::new(),
        snapshots: Vec::new(),
    };
    st.adam_gen = AdamState::new(st.gen.n_params());
    st.adam_enc = AdamState::new(st.enc.n_params());
    st.adam_dec = AdamState::new(st.dec.n_params());
    st.eval_z = sample_standard_normal(cfg.snapshot_samples, st.gen.input_dim(), &mut st.rngs.eval);
    st.witness_trace.push((0, st.v.points().clone()));

    let budget = cfg.iteration_budget();
    while st.iter < budget && st.converged_at.is_none() {
        let rec = st.step(source)?;
        hooks.on_iteration(&rec, st.gen.theta(), Some(&st.v));
    }
    let result = TrainResult {
        records: st.records,
        witness_trace: st.witness_trace,
        snapshots: st.snapshots,
        converged_at: st.converged_at,
        iterations: st.iter,
    };
    Ok((AutoGlocadNets { gen: st.gen, enc: st.enc, dec: st.dec }, st.v, result))
}

struct AutoState {
    cfg: TrainConfig,
    kernel: KernelSpec,
    gen: MlpParams,
    enc: MlpParams,
    dec: MlpParams,
    v: WitnessSet,
    adam_gen: AdamState,
    adam_enc: AdamState,
    adam_dec: AdamState,
    rngs: RoleRngs,
    eval_z: Samples,
    iter: usize,
    converged_at: Option<usize>,
    records: Vec<IterRecord>,
    witness_trace: Vec<(usize, Samples)>,
    snapshots: Vec<Snapshot>,
}

impl AutoState {
    fn update(
        theta: &mut [f64],
        grad: &[f64],
        adam: &mut AdamState,
        kind: OptimizerKind,
        lr: f64,
        what: &str,
        it: usize,
    ) -> Result<()> {
        let r = match kind {
            OptimizerKind::Sgd => sgd_update(theta, grad, lr),
            OptimizerKind::Adam => adam_update(theta, grad, adam, lr),
        };
        r.map_err(|e| {
            Error::TrainingAborted(format!("{what} update rejected at iteration {it}: {e}"))
        })
    }

    fn step(&mut self, source: &dyn DataSource) -> Result<IterRecord> {
        let it = self.iter + 1;
        let b = self.cfg.batch;
        let nd = self.gen.input_dim();
        let (gamma, opt) = (self.cfg.gamma, self.cfg.optimizer);
        let bf = b as f64;

        // autoencoder descent on the reconstruction error over real and
        // generated batches
        for _ in 0..self.cfg.n_d {
            let x = source.draw(b, &mut self.rngs.ae_real);
            let z = sample_standard_normal(b, nd, &mut self.rngs.ae_noise);
            let y = self.gen.forward(&z)?.0;
            let mut ge = vec![0.0; self.enc.n_params()];
            let mut gd = vec![0.0; self.dec.n_params()];
            for t in [&x, &y] {
                let ae = apply_ae(&self.enc, &self.dec, t)?;
                let (ge_t, gd_t) = ae_param_grads(&self.enc, &self.dec, &ae, b)?;
                add_scaled(&mut ge, &ge_t, 1.0);
                add_scaled(&mut gd, &gd_t, 1.0);
            }
            Self::update(self.enc.theta_mut(), &ge, &mut self.adam_enc, opt, gamma, "encoder", it)?;
            Self::update(self.dec.theta_mut(), &gd, &mut self.adam_dec, opt, gamma, "decoder", it)?;
        }

        // encoder ascent on the total loss (discrepancy on encoded points
        // plus λ₂ times the reconstruction error)
        for _ in 0..self.cfg.n_e {
            let x = source.draw(b, &mut self.rngs.enc_real);
            let z = sample_standard_normal(b, nd, &mut self.rngs.enc_noise);
            let y = self.gen.forward(&z)?.0;
            let (ex, cx) = self.enc.forward(&x)?;
            let (ey, cy) = self.enc.forward(&y)?;
            let d_ex = latent_loss_grad_wrt_second(
                &ey,
                &ex,
                &self.v,
                &self.kernel,
                self.cfg.lambda,
                self.cfg.mmd_variant,
            )?;
            let d_ey = latent_loss_grad_wrt_second(
                &ex,
                &ey,
                &self.v,
                &self.kernel,
                self.cfg.lambda,
                self.cfg.mmd_variant,
            )?;
            let mut ge = self.enc.backward(&cx, &d_ex)?;
            let ge_y = self.enc.backward(&cy, &d_ey)?;
            add_scaled(&mut ge, &ge_y, 1.0);
            if self.cfg.lambda2 > 0.0 {
                for t in [&x, &y] {
                    let ae = apply_ae(&self.enc, &self.dec, t)?;
                    let (ge_t, _) = ae_param_grads(&self.enc, &self.dec, &ae, b)?;
                    add_scaled(&mut ge, &ge_t, self.cfg.lambda2);
                }
            }
            // ascent = descent on the negated gradient
            for g in &mut ge {
                *g = -*g;
            }
            Self::update(self.enc.theta_mut(), &ge, &mut self.adam_enc, opt, gamma, "encoder", it)?;
        }

        // witness ascent in the latent space
        let mut wgrad_maxnorm = 0.0f64;
        for _ in 0..self.cfg.n_v {
            let x = source.draw(b, &mut self.rngs.witness_real);
            let z = sample_standard_normal(b, nd, &mut self.rngs.witness_noise);
            let y = self.gen.forward(&z)?.0;
            let ex = self.enc.forward(&x)?.0;
            let ey = self.enc.forward(&y)?.0;
            let lam_scale = match self.cfg.lambda {
                Lambda::Finite(l) if l == 0.0 => {
                    wgrad_maxnorm = 0.0;
                    continue;
                }
                Lambda::Finite(l) => l,
                Lambda::Infinite => 1.0,
            };
            let g = grad_ume2_wrt_witness(&ex, &ey, &self.v, &self.kernel)?;
            let step_scale = gamma * lam_scale;
            let mut mx = 0.0f64;
            for (vc, gc) in self.v.points_mut().data_mut().iter_mut().zip(g.data()) {
                mx = mx.max((lam_scale * gc).abs());
                *vc += step_scale * gc;
            }
            wgrad_maxnorm = mx;
        }

        // generator descent on the total loss
        let mut last_batch: Option<(Samples, Samples)> = None;
        for _ in 0..self.cfg.n_g {
            let x = source.draw(b, &mut self.rngs.gen_real);
            let z = sample_standard_normal(b, nd, &mut self.rngs.gen_noise);
            let (y, gen_cache) = self.gen.forward(&z)?;
            let ex = self.enc.forward(&x)?.0;
            let (ey, ey_cache) = self.enc.forward(&y)?;
            let d_ey = latent_loss_grad_wrt_second(
                &ex,
                &ey,
                &self.v,
                &self.kernel,
                self.cfg.lambda,
                self.cfg.mmd_variant,
            )?;
            let (_, mut d_y) = self.enc.backward_with_input_grad(&ey_cache, &d_ey)?;
            if self.cfg.lambda2 > 0.0 {
                // λ₂·(1/B)Σ‖y − D(E(y))‖² seen from y: a direct term and a
                // term pulled back through the autoencoder
                let ae = apply_ae(&self.enc, &self.dec, &y)?;
                let scale = 2.0 * self.cfg.lambda2 / bf;
                let mut ograd_recon = ae.resid.clone();
                for vv in ograd_recon.data_mut() {
                    *vv *= scale;
                }
                let (_, up_latent) = self.dec.backward_with_input_grad(&ae.dec_cache, &ograd_recon)?;
                let (_, through_ae) = self.enc.backward_with_input_grad(&ae.enc_cache, &up_latent)?;
                for ((dyc, rc), tc) in
                    d_y.data_mut().iter_mut().zip(ae.resid.data()).zip(through_ae.data())
                {
                    *dyc += -scale * rc + tc;
                }
            }
            let pg = self.gen.backward(&gen_cache, &d_y)?;
            Self::update(self.gen.theta_mut(), &pg, &mut self.adam_gen, opt, gamma, "generator", it)?;
            last_batch = Some((x, z));
        }

        // loss record on the last generator minibatch, post-update
        let (x, z) = last_batch.expect("n_g >= 1 guarantees a generator minibatch");
        let y = self.gen.forward(&z)?.0;
        let ex = self.enc.forward(&x)?.0;
        let ey = self.enc.forward(&y)?.0;
        let loss_mmd = mmd2(&ex, &ey, &self.kernel, self.cfg.mmd_variant)?;
        let loss_ume = ume2_hat(&ex, &ey, &self.v, &self.kernel)?;
        let rec_x = apply_ae(&self.enc, &self.dec, &x)?.sq_sum / bf;
        let rec_y = apply_ae(&self.enc, &self.dec, &y)?.sq_sum / bf;
        let loss_rec = rec_x + rec_y;
        let loss_total = match self.cfg.lambda {
            Lambda::Finite(l) => loss_mmd + l * loss_ume + self.cfg.lambda2 * loss_rec,
            Lambda::Infinite => loss_ume + self.cfg.lambda2 * loss_rec,
        };
        if !loss_total.is_finite() {
            return Err(Error::TrainingAborted(format!(
                "non-finite loss at iteration {it}: mmd={loss_mmd:e}, ume={loss_ume:e}, \
                 rec={loss_rec:e}"
            )));
        }
        let rec = IterRecord {
            iter: it,
            loss_total,
            loss_mmd,
            loss_ume,
            loss_rec: Some(loss_rec),
            witness_grad_maxnorm: wgrad_maxnorm,
        };
        self.iter = it;
        self.records.push(rec.clone());
        self.witness_trace.push((it, self.v.points().clone()));
        let due = (self.cfg.snapshot_every > 0 && it % self.cfg.snapshot_every == 0)
            || self.cfg.snapshot_at.contains(&it);
        if due {
            let samples = self.gen.forward(&self.eval_z)?.0;
            self.snapshots.push(Snapshot {
                iter: it,
                gen_params: self.gen.theta().to_vec(),
                witnesses: Some(self.v.points().clone()),
                samples,
            });
        }
        let lambda_zero = matches!(self.cfg.lambda, Lambda::Finite(l) if l == 0.0);
        if !lambda_zero
            && self.converged_at.is_none()
            && wgrad_maxnorm < self.cfg.grad_threshold
        {
            self.converged_at = Some(it);
        }
        Ok(rec)
    }
}

// ───────────────────────── evaluation metrics ─────────────────────────

/// Per-component occupation of a target mixture by a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoverage {
    /// Fraction of all samples that landed within `radius` of component j's
    /// mean, among samples assigned to j by nearest mean (ties to the lowest
    /// index).
    pub hit_fractions: Vec<f64>,
    /// Components whose hit fraction reached `coverage_min`.
    pub covered: usize,
    pub coverage_min: f64,
}

/// Counts samples near each component mean. A component is covered when its
/// hit fraction reaches `coverage_min` (default: a third of the uniform
/// share, 1/(3·components)).
pub fn mode_coverage(
    samples: &Samples,
    target: &GaussianMixture,
    radius: f64,
    coverage_min: Option<f64>,
) -> Result<ModeCoverage> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("coverage radius must be positive, got {radius}")));
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples("mode coverage input"));
    }
    if samples.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got: samples.dim() });
    }
    let k = target.n_components();
    let coverage_min = coverage_min.unwrap_or(1.0 / (3.0 * k as f64));
    let mut hits = vec![0usize; k];
    let r2 = radius * radius;
    for row in samples.rows() {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for j in 0..k {
            let d2 = crate::kernel::sq_dist(row, target.mean(j));
            if d2 < best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        if best_d2 <= r2 {
            hits[best] += 1;
        }
    }
    let n = samples.n() as f64;
    let hit_fractions: Vec<f64> = hits.iter().map(|&h| h as f64 / n).collect();
    let covered = hit_fractions.iter().filter(|&&f| f >= coverage_min).count();
    Ok(ModeCoverage { hit_fractions, covered, coverage_min })
}

/// Fraction of sample rows lying within `radius` of at least one of the
/// given mean rows.
pub fn hit_fraction_near_means(samples: &Samples, means: &Samples, radius: f64) -> Result<f64> {
    if samples.dim() != means.dim() {
        return Err(Error::DimensionMismatch { expected: means.dim(), got: samples.dim() });
    }
    if samples.is_empty() || means.is_empty() {
        return Err(Error::EmptySamples("hit-fraction input"));
    }
    let r2 = radius * radius;
    let mut hits = 0usize;
    for row in samples.rows() {
        if means.rows().any(|m| crate::kernel::sq_dist(row, m) <= r2) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.n() as f64)
}

// ───────────────────────── phase schedules ─────────────────────────

/// How witness points are re-initialized when a run crosses into a new
/// phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessSeeding {
    /// Carry the current witness set across the boundary.
    Keep,
    /// Reseed from the incoming phase's data (for a mixture source: its
    /// component means).
    ReseedFromNewData,
    /// Reseed with standard-normal draws.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    /// Index into the caller's list of data sources.
    pub source: usize,
    pub start_iteration: usize,
    pub seeding: WitnessSeeding,
}

/// An ordered list of phases; the first starts at iteration 0 and start
/// iterations strictly increase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    phases: Vec<Phase>,
}

impl PhaseSchedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("a phase schedule needs at least one phase"));
        }
        if phases[0].start_iteration != 0 {
            return Err(Error::invalid("the first phase must start at iteration 0"));
        }
        for w in phases.windows(2) {
            if w[1].start_iteration <= w[0].start_iteration {
                return Err(Error::invalid(format!(
                    "phase start iterations must strictly increase ({} then {})",
                    w[0].start_iteration, w[1].start_iteration
                )));
            }
        }
        Ok(PhaseSchedule { phases })
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// The phase governing the given iteration.
    pub fn phase_at(&self, iteration: usize) -> &Phase {
        self.phases
            .iter()
            .rev()
            .find(|p| p.start_iteration <= iteration)
            .expect("first phase starts at 0")
    }
}

// ───────────────────────── continual scenario ─────────────────────────

/// Mixture whose components are the union of two mixtures' components, with
/// total mass `weight_a` on the first.
pub fn mixture_union(
    a: &GaussianMixture,
    b: &GaussianMixture,
    weight_a: f64,
) -> Result<GaussianMixture> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if !(weight_a > 0.0 && weight_a < 1.0) {
        return Err(Error::invalid(format!("union weight must be in (0,1), got {weight_a}")));
    }
    let mut weights = Vec::new();
    let mut means = Vec::new();
    let mut variances = Vec::new();
    for (m, w) in [(a, weight_a), (b, 1.0 - weight_a)] {
        for j in 0..m.n_components() {
            weights.push(w * m.weights()[j]);
            means.extend_from_slice(m.mean(j));
            variances.push(m.variance(j));
        }
    }
    GaussianMixture::new(a.dim(), weights, means, variances)
}

/// Inputs of the two-branch continual-learning comparison.
#[derive(Debug, Clone)]
pub struct ContinualConfig {
    pub train: TrainConfig,
    pub kernel: KernelSpec,
    /// The already-learned data distribution.
    pub d1: GaussianMixture,
    /// The newly arriving distribution.
    pub d2: GaussianMixture,
    /// Iteration budget after the fork.
    pub phase2_max_iters: usize,
    /// A branch "captures" the new content when the fraction of generated
    /// samples near the new components first exceeds this.
    pub capture_threshold: f64,
    pub eval_samples: usize,
    pub eval_radius: f64,
}

#[derive(Debug, Clone)]
pub struct BranchOutcome {
    /// Completed phase-2 iterations before the threshold was first exceeded
    /// (0 = already exceeded at the fork); None if never within the budget.
    pub capture_iteration: Option<usize>,
    /// Hit fraction at phase-2 iterations 0, 1, 2, …
    pub hit_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ContinualReport {
    pub fork_iteration: usize,
    /// Branch that continues on plain MMD descent.
    pub mmd_only: BranchOutcome,
    /// Branch that adds the local term with witness points seeded on the new
    /// content.
    pub witness_seeded: BranchOutcome,
}

/// Trains on D1 until the fork, then runs two branches on the D1∪D2 union —
/// plain MMD descent versus the witness-regularized loss with witnesses
/// seeded per the schedule's second-phase rule — and reports when each
/// branch first places more than `capture_threshold` of its samples on D2.
///
/// The schedule must have exactly two phases: source 0 (D1) from iteration
/// 0, and source 1 (the union) from the fork iteration.
pub fn continual_scenario<G: Generator + Clone>(
    cfg: &ContinualConfig,
    schedule: &PhaseSchedule,
    gen: G,
) -> Result<ContinualReport> {
    cfg.train.validate()?;
    if schedule.phases().len() != 2 {
        return Err(Error::invalid(format!(
            "the continual scenario needs exactly 2 phases, got {}",
            schedule.phases().len()
        )));
    }
    if schedule.phases()[0].source != 0 || schedule.phases()[1].source != 1 {
        return Err(Error::invalid(
            "continual phases must reference source 0 (first data) then source 1 (the union)",
        ));
    }
    if !(cfg.capture_threshold > 0.0 && cfg.capture_threshold < 1.0) {
        return Err(Error::invalid("capture threshold must be in (0,1)"));
    }
    if !(cfg.eval_radius > 0.0) || cfg.eval_samples == 0 {
        return Err(Error::invalid("evaluation radius and sample count must be positive"));
    }
    let fork = schedule.phases()[1].start_iteration;

    // phase 1: plain MMD descent on D1 (no witness players yet)
    let mut phase1 =
        GlocadTrainer::new(&cfg.d1, gen, None, cfg.kernel, cfg.train.clone())?;
    for _ in 0..fork {
        phase1.step()?;
    }
    let (gen_fork, _, _) = phase1.finish();

    // phase 2 setup: both branches see the same union source and the same
    // fresh stream seed, so their data draws are directly comparable
    let union = mixture_union(&cfg.d1, &cfg.d2, 0.5)?;
    let seed2 = cfg.train.seed ^ 0x9E37_79B9_7F4A_7C15;
    let mut cfg_a = cfg.train.clone();
    cfg_a.seed = seed2;
    let mut cfg_b = cfg_a.clone();

    let witnesses = match schedule.phases()[1].seeding {
        WitnessSeeding::ReseedFromNewData => WitnessSet::new(cfg.d2.means().clone())?,
        WitnessSeeding::Random => {
            let mut rng = stream_rng(seed2, STREAM_INIT);
            WitnessSet::new(sample_standard_normal(cfg.train.j, cfg.d1.dim(), &mut rng))?
        }
        WitnessSeeding::Keep => {
            return Err(Error::invalid(
                "the first phase trains without witness points, so there is nothing to keep; \
                 use reseed-from-new-data or random",
            ))
        }
    };
    cfg_b.j = witnesses.n();

    let mut branch_a = GlocadTrainer::new(&union, gen_fork.clone(), None, cfg.kernel, cfg_a)?;
    let mut branch_b =
        GlocadTrainer::new(&union, gen_fork, Some(witnesses), cfg.kernel, cfg_b)?;

    // fixed evaluation noise shared by both branches and all iterations
    let mut eval_rng = stream_rng(seed2, STREAM_EVAL);
    let eval_z = sample_standard_normal(cfg.eval_samples, branch_a.gen().noise_dim(), &mut eval_rng);

    let mut out_a = BranchOutcome { capture_iteration: None, hit_trace: Vec::new() };
    let mut out_b = BranchOutcome { capture_iteration: None, hit_trace: Vec::new() };
    for k in 0..=cfg.phase2_max_iters {
        for (branch, out) in
            [(&mut branch_a, &mut out_a), (&mut branch_b, &mut out_b)]
        {
            let y = branch.gen().generate(&eval_z)?;
            let frac = hit_fraction_near_means(&y, cfg.d2.means(), cfg.eval_radius)?;
            out.hit_trace.push(frac);
            if out.capture_iteration.is_none() && frac > cfg.capture_threshold {
                out.capture_iteration = Some(k);
            }
        }
        if out_a.capture_iteration.is_some() && out_b.capture_iteration.is_some() {
            break;
        }
        if k < cfg.phase2_max_iters {
            branch_a.step()?;
            branch_b.step()?;
        }
    }
    Ok(ContinualReport { fork_iteration: fork, mmd_only: out_a, witness_seeded: out_b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation::{Identity, Tanh};

    fn two_blob_source() -> GaussianMixture {
        GaussianMixture::new(
            2,
            vec![0.5, 0.5],
            vec![-1.0, 0.0, 1.0, 0.0],
            vec![0.04, 0.04],
        )
        .unwrap()
    }

    fn small_gen(seed: u64) -> MlpGenerator {
        let mut rng = stream_rng(seed, STREAM_INIT);
        MlpGenerator::new(
            MlpParams::glorot_init(&[4, 16, 2], &[Tanh, Identity], &mut rng).unwrap(),
        )
    }

    fn small_cfg(seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::defaults_2d(seed);
        cfg.j = 3;
        cfg.batch = 16;
        cfg.max_epochs = 1;
        cfg.epoch_iters = 25;
        cfg.optimizer = OptimizerKind::Sgd;
        cfg.grad_threshold = 1e-12;
        cfg
    }

    fn witness_points(seed: u64, j: usize, d: usize) -> WitnessSet {
        let mut rng = stream_rng(seed, STREAM_INIT);
        WitnessSet::new(sample_standard_normal(j, d, &mut rng)).unwrap()
    }

    struct ParamTrace(Vec<Vec<f64>>);

    impl TrainHooks for ParamTrace {
        fn on_iteration(&mut self, _r: &IterRecord, p: &[f64], _v: Option<&WitnessSet>) {
            self.0.push(p.to_vec());
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let run = || {
            let mut hooks = ParamTrace(Vec::new());
            let (_, _, res) = glocad_train(
                &source,
                small_gen(7),
                witness_points(7, 3, 2),
                kernel,
                &small_cfg(7),
                &mut hooks,
            )
            .unwrap();
            (res, hooks.0)
        };
        let (res1, p1) = run();
        let (res2, p2) = run();
        assert_eq!(res1.records.len(), res2.records.len());
        for (a, b) in res1.records.iter().zip(&res2.records) {
            assert_eq!(a.loss_total.to_bits(), b.loss_total.to_bits());
            assert_eq!(a.witness_grad_maxnorm.to_bits(), b.witness_grad_maxnorm.to_bits());
        }
        assert_eq!(p1, p2);
    }

    #[test]
    fn fast_forward_resume_is_bitwise_identical_to_straight_run() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let cfg = {
            let mut c = small_cfg(23);
            c.optimizer = OptimizerKind::Adam;
            c.snapshot_at = vec![5, 20];
            c
        };

        // straight 25-iteration run
        let mut straight =
            GlocadTrainer::new(&source, small_gen(23), Some(witness_points(23, 3, 2)), kernel, cfg.clone())
                .unwrap();
        for _ in 0..25 {
            straight.step().unwrap();
        }
        let (gen_s, wit_s, res_s) = straight.finish();

        // the same run interrupted after 12 iterations …
        let mut first =
            GlocadTrainer::new(&source, small_gen(23), Some(witness_points(23, 3, 2)), kernel, cfg.clone())
                .unwrap();
        for _ in 0..12 {
            first.step().unwrap();
        }
        let saved_params = first.gen().params().to_vec();
        let saved_wit = first.witnesses().unwrap().points().clone();
        let saved_adam = first.adam_state().unwrap().clone();

        // … and resumed from the saved state
        let mut resumed =
            GlocadTrainer::new(&source, small_gen(23), Some(witness_points(23, 3, 2)), kernel, cfg)
                .unwrap();
        resumed.fast_forward(12);
        assert_eq!(resumed.iterations(), 12);
        resumed.gen_mut().params_mut().copy_from_slice(&saved_params);
        *resumed.witnesses_mut().unwrap().points_mut() = saved_wit;
        *resumed.adam_state_mut().unwrap() = saved_adam;
        for _ in 0..13 {
            resumed.step().unwrap();
        }
        let (gen_r, wit_r, res_r) = resumed.finish();

        assert_eq!(gen_s.params(), gen_r.params());
        assert_eq!(wit_s.unwrap().points().data(), wit_r.unwrap().points().data());
        assert_eq!(res_r.records.len(), 13);
        for (a, b) in res_s.records[12..].iter().zip(&res_r.records) {
            assert_eq!(a.iter, b.iter);
            assert_eq!(a.loss_total.to_bits(), b.loss_total.to_bits());
            assert_eq!(a.witness_grad_maxnorm.to_bits(), b.witness_grad_maxnorm.to_bits());
        }
        // the after-the-interrupt snapshot matches the straight run's
        let snap_s = res_s.snapshots.iter().find(|s| s.iter == 20).unwrap();
        let snap_r = res_r.snapshots.iter().find(|s| s.iter == 20).unwrap();
        assert_eq!(snap_s.samples.data(), snap_r.samples.data());
    }

    #[test]
    fn lambda_zero_is_bitwise_identical_to_plain_mmd_run() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = small_cfg(11);
        cfg.lambda = Lambda::Finite(0.0);

        let mut glocad_params = ParamTrace(Vec::new());
        let (_, _, res_g) = glocad_train(
            &source,
            small_gen(11),
            witness_points(11, 3, 2),
            kernel,
            &cfg,
            &mut glocad_params,
        )
        .unwrap();

        let mut mmd_params = ParamTrace(Vec::new());
        let (_, res_m) =
            mmd_gan_train(&source, small_gen(11), kernel, &cfg, &mut mmd_params).unwrap();

        assert_eq!(res_g.iterations, res_m.iterations);
        assert_eq!(glocad_params.0.len(), mmd_params.0.len());
        for (a, b) in glocad_params.0.iter().zip(&mmd_params.0) {
            let bits_a: Vec<u64> = a.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        for (ra, rb) in res_g.records.iter().zip(&res_m.records) {
            assert_eq!(ra.loss_mmd.to_bits(), rb.loss_mmd.to_bits());
        }
        // witness positions never move when λ = 0
        let first = &res_g.witness_trace[0].1;
        let last = &res_g.witness_trace.last().unwrap().1;
        assert_eq!(first.data(), last.data());
    }

    #[test]
    fn single_outer_iteration_witness_update_replays_exactly() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(0.8).unwrap();
        let mut cfg = small_cfg(13);
        let lam = 0.7;
        cfg.lambda = Lambda::Finite(lam);
        let gen0 = small_gen(13);
        let v0 = witness_points(13, 3, 2);

        let mut trainer =
            GlocadTrainer::new(&source, gen0.clone(), Some(v0.clone()), kernel, cfg.clone())
                .unwrap();
        trainer.step().unwrap();

        // replay the witness minibatch draw by hand from the same streams
        let mut r_real = stream_rng(cfg.seed, STREAM_WITNESS_REAL);
        let mut r_noise = stream_rng(cfg.seed, STREAM_WITNESS_NOISE);
        let x = source.draw(cfg.batch, &mut r_real);
        let z = sample_standard_normal(cfg.batch, gen0.noise_dim(), &mut r_noise);
        let y = gen0.generate(&z).unwrap();
        let g = grad_ume2_wrt_witness(&x, &y, &v0, &kernel).unwrap();
        let step_scale = cfg.gamma * lam;
        for j in 0..v0.n() {
            for c in 0..v0.dim() {
                let expect = v0.point(j)[c] + step_scale * g.row(j)[c];
                let got = trainer.witnesses().unwrap().point(j)[c];
                assert_eq!(got.to_bits(), expect.to_bits());
            }
        }
    }

    #[test]
    fn witness_ascent_is_monotone_on_frozen_players() {
        let mut rng = stream_rng(21, STREAM_INIT);
        let p = two_blob_source();
        let q = GaussianMixture::new(2, vec![1.0], vec![0.0, 0.6], vec![0.09]).unwrap();
        let x = p.sample(256, &mut rng);
        let y = q.sample(256, &mut rng);
        let kernel = KernelSpec::gaussian(0.5).unwrap();
        let mut v = witness_points(21, 3, 2);
        let mut prev = ume2_hat(&x, &y, &v, &kernel).unwrap();
        for _ in 0..50 {
            let g = grad_ume2_wrt_witness(&x, &y, &v, &kernel).unwrap();
            for (vc, gc) in v.points_mut().data_mut().iter_mut().zip(g.data()) {
                *vc += 1e-3 * gc;
            }
            let cur = ume2_hat(&x, &y, &v, &kernel).unwrap();
            assert!(
                cur >= prev - 1e-15,
                "ascent step decreased the objective: {prev} -> {cur}"
            );
            prev = cur;
        }
    }

    #[test]
    fn realizable_optimum_is_an_exact_fixed_point() {
        for opt in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut rng = stream_rng(31, STREAM_INIT);
            let z_pool = sample_standard_normal(48, 2, &mut rng);
            let theta_star = vec![0.7, -0.3];
            let mut data = z_pool.clone();
            for r in 0..data.n() {
                for (c, t) in data.row_mut(r).iter_mut().zip(&theta_star) {
                    *c += t;
                }
            }
            let source = FixedDataset::new(data).unwrap();
            let noise = FixedDataset::new(z_pool).unwrap();
            let mut cfg = small_cfg(31);
            cfg.batch = 48; // full batch
            cfg.lambda = Lambda::Finite(1.0);
            cfg.optimizer = opt;
            cfg.grad_threshold = 1e-5;
            let gen = LocationGenerator::new(theta_star.clone()).unwrap();
            let v0 = witness_points(31, 3, 2);
            let mut trainer = GlocadTrainer::new(&source, gen, Some(v0.clone()),
                KernelSpec::gaussian(1.0).unwrap(), cfg)
                .unwrap()
                .with_noise_source(&noise)
                .unwrap();
            for _ in 0..100 {
                let rec = trainer.step().unwrap().expect("records every iteration");
                assert_eq!(rec.witness_grad_maxnorm, 0.0);
                assert_eq!(rec.loss_mmd, 0.0);
                assert_eq!(rec.loss_ume, 0.0);
            }
            // parameters have not drifted at all
            assert_eq!(trainer.gen().params(), &theta_star[..]);
            assert_eq!(trainer.witnesses().unwrap().points().data(), v0.points().data());
            // the convergence criterion fired on the very first iteration
            assert_eq!(trainer.converged_at(), Some(1));
        }
    }

    #[test]
    fn recorded_total_loss_assembles_from_its_terms() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = small_cfg(17);
        cfg.lambda = Lambda::Finite(0.7);
        cfg.max_epochs = 1;
        cfg.epoch_iters = 20;
        let (_, _, res) = glocad_train(
            &source,
            small_gen(17),
            witness_points(17, 3, 2),
            kernel,
            &cfg,
            &mut NoHooks,
        )
        .unwrap();
        assert!(!res.records.is_empty());
        for r in &res.records {
            assert!((r.loss_total - (r.loss_mmd + 0.7 * r.loss_ume)).abs() <= 1e-12);
        }

        let mut cfg_inf = cfg.clone();
        cfg_inf.lambda = Lambda::Infinite;
        let (_, _, res_inf) = glocad_train(
            &source,
            small_gen(17),
            witness_points(17, 3, 2),
            kernel,
            &cfg_inf,
            &mut NoHooks,
        )
        .unwrap();
        for r in &res_inf.records {
            assert_eq!(r.loss_total.to_bits(), r.loss_ume.to_bits());
        }
    }

    #[test]
    fn identity_autoencoder_reduces_to_data_space_run() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = small_cfg(19);
        cfg.lambda = Lambda::Finite(0.5);
        cfg.lambda2 = 2.0; // exercised, but exactly zero through the identity
        cfg.n_d = 0;
        cfg.n_e = 0;
        cfg.max_epochs = 1;
        cfg.epoch_iters = 15;

        let mut rng = stream_rng(19, STREAM_INIT);
        let net = MlpParams::glorot_init(&[4, 16, 2], &[Tanh, Identity], &mut rng).unwrap();

        let mut plain_trace = ParamTrace(Vec::new());
        let (_, _, res_plain) = glocad_train(
            &source,
            MlpGenerator::new(net.clone()),
            witness_points(19, 3, 2),
            kernel,
            &cfg,
            &mut plain_trace,
        )
        .unwrap();

        let nets = AutoGlocadNets {
            gen: net,
            enc: MlpParams::identity(2).unwrap(),
            dec: MlpParams::identity(2).unwrap(),
        };
        let mut auto_trace = ParamTrace(Vec::new());
        let (_, _, res_auto) = autoglocad_train(
            &source,
            nets,
            witness_points(19, 3, 2),
            kernel,
            &cfg,
            &mut auto_trace,
        )
        .unwrap();

        assert_eq!(res_plain.iterations, res_auto.iterations);
        assert_eq!(plain_trace.0.len(), auto_trace.0.len());
        for (a, b) in plain_trace.0.iter().zip(&auto_trace.0) {
            let bits_a: Vec<u64> = a.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        for (ra, rb) in res_plain.records.iter().zip(&res_auto.records) {
            assert_eq!(ra.loss_mmd.to_bits(), rb.loss_mmd.to_bits());
            assert_eq!(ra.loss_ume.to_bits(), rb.loss_ume.to_bits());
            // the reconstruction term vanishes identically
            assert_eq!(rb.loss_rec, Some(0.0));
        }
    }

    #[test]
    fn identity_autoencoder_reconstruction_is_exactly_zero() {
        let enc = MlpParams::identity(2).unwrap();
        let dec = MlpParams::identity(2).unwrap();
        let mut rng = stream_rng(23, STREAM_INIT);
        let x = sample_standard_normal(16, 2, &mut rng);
        let ae = apply_ae(&enc, &dec, &x).unwrap();
        assert_eq!(ae.sq_sum, 0.0);
        assert!(ae.resid.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn latent_witness_gradient_matches_finite_differences_through_encoder() {
        let mut rng = stream_rng(29, STREAM_INIT);
        let enc = MlpParams::glorot_init(&[2, 5, 2], &[Tanh, Identity], &mut rng).unwrap();
        let x = sample_standard_normal(24, 2, &mut rng);
        let y = {
            let mut y = sample_standard_normal(24, 2, &mut rng);
            for v in y.data_mut() {
                *v = 0.5 * *v + 0.4;
            }
            y
        };
        let kernel = KernelSpec::gaussian(0.7).unwrap();
        let ex = enc.forward(&x).unwrap().0;
        let ey = enc.forward(&y).unwrap().0;
        let v = witness_points(29, 2, 2);
        let g = grad_ume2_wrt_witness(&ex, &ey, &v, &kernel).unwrap();
        let h = 1e-6;
        for j in 0..v.n() {
            for c in 0..2 {
                let mut vp = v.clone();
                vp.points_mut().row_mut(j)[c] += h;
                let up = ume2_hat(&ex, &ey, &vp, &kernel).unwrap();
                vp.points_mut().row_mut(j)[c] -= 2.0 * h;
                let down = ume2_hat(&ex, &ey, &vp, &kernel).unwrap();
                let fd = (up - down) / (2.0 * h);
                let rel = (g.row(j)[c] - fd).abs() / fd.abs().max(g.row(j)[c].abs()).max(1e-8);
                assert!(rel < 1e-5, "witness ({j},{c}): analytic {} vs fd {fd}", g.row(j)[c]);
            }
        }
    }

    #[test]
    fn autoencoded_run_trains_and_logs_reconstruction() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = small_cfg(37);
        cfg.lambda = Lambda::Finite(0.3);
        cfg.lambda2 = 0.5;
        cfg.n_d = 1;
        cfg.n_e = 1;
        cfg.max_epochs = 1;
        cfg.epoch_iters = 10;
        let mut rng = stream_rng(37, STREAM_INIT);
        let nets = AutoGlocadNets {
            gen: MlpParams::glorot_init(&[4, 16, 2], &[Tanh, Identity], &mut rng).unwrap(),
            enc: MlpParams::glorot_init(&[2, 8, 2], &[Tanh, Identity], &mut rng).unwrap(),
            dec: MlpParams::glorot_init(&[2, 8, 2], &[Tanh, Identity], &mut rng).unwrap(),
        };
        let (_, _, res) =
            autoglocad_train(&source, nets, witness_points(37, 3, 2), kernel, &cfg, &mut NoHooks)
                .unwrap();
        assert_eq!(res.records.len(), res.iterations);
        for r in &res.records {
            let rec = r.loss_rec.expect("autoencoded runs log the reconstruction term");
            assert!(rec >= 0.0);
            assert!((r.loss_total - (r.loss_mmd + 0.3 * r.loss_ume + 0.5 * rec)).abs() <= 1e-12);
        }
    }

    #[test]
    fn infinite_lambda_runs_and_heads_toward_data() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = small_cfg(41);
        cfg.lambda = Lambda::Infinite;
        cfg.optimizer = OptimizerKind::Adam;
        cfg.max_epochs = 1;
        cfg.epoch_iters = 30;
        let (_, _, res) = glocad_train(
            &source,
            small_gen(41),
            witness_points(41, 3, 2),
            kernel,
            &cfg,
            &mut NoHooks,
        )
        .unwrap();
        assert!(res.iterations > 0);
        for r in &res.records {
            assert_eq!(r.loss_total.to_bits(), r.loss_ume.to_bits());
        }
    }

    #[test]
    fn snapshots_arrive_on_schedule() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let mut cfg = small_cfg(43);
        cfg.max_epochs = 1;
        cfg.epoch_iters = 12;
        cfg.snapshot_every = 5;
        cfg.snapshot_at = vec![3];
        cfg.snapshot_samples = 8;
        let (_, _, res) = glocad_train(
            &source,
            small_gen(43),
            witness_points(43, 3, 2),
            kernel,
            &cfg,
            &mut NoHooks,
        )
        .unwrap();
        let iters: Vec<usize> = res.snapshots.iter().map(|s| s.iter).collect();
        assert_eq!(iters, vec![3, 5, 10]);
        for s in &res.snapshots {
            assert_eq!(s.samples.n(), 8);
            assert_eq!(s.samples.dim(), 2);
        }
        // witness trace covers initial state plus every iteration
        assert_eq!(res.witness_trace.len(), res.iterations + 1);
    }

    #[test]
    fn mode_coverage_hand_cases() {
        let ring = crate::mixtures::build_ring_mogmm(&crate::mixtures::RingMogmmSpec::default())
            .unwrap();
        // samples exactly at the 15 means, equal counts
        let mut at_means = Samples::zeros(0, 2);
        for _ in 0..4 {
            for j in 0..15 {
                at_means.push_row(ring.mean(j));
            }
        }
        let cov = mode_coverage(&at_means, &ring, 0.15, None).unwrap();
        assert_eq!(cov.covered, 15);
        assert!(cov.hit_fractions.iter().all(|&f| (f - 1.0 / 15.0).abs() < 1e-12));

        // all samples at one mean
        let mut one_mean = Samples::zeros(0, 2);
        for _ in 0..60 {
            one_mean.push_row(ring.mean(4));
        }
        let cov1 = mode_coverage(&one_mean, &ring, 0.15, None).unwrap();
        assert_eq!(cov1.covered, 1);
        assert!((cov1.hit_fractions[4] - 1.0).abs() < 1e-12);

        // exact target samples cover nearly everything within 3σ
        let mut rng = stream_rng(47, STREAM_INIT);
        let s = ring.sample(10_000, &mut rng);
        let sigma = ring.variance(0).sqrt();
        let cov2 = mode_coverage(&s, &ring, 3.0 * sigma, None).unwrap();
        assert!(cov2.covered >= 14, "covered only {}/15", cov2.covered);
    }

    #[test]
    fn phase_schedule_validation_and_lookup() {
        assert!(PhaseSchedule::new(vec![]).is_err());
        assert!(PhaseSchedule::new(vec![Phase {
            source: 0,
            start_iteration: 5,
            seeding: WitnessSeeding::Keep
        }])
        .is_err());
        assert!(PhaseSchedule::new(vec![
            Phase { source: 0, start_iteration: 0, seeding: WitnessSeeding::Keep },
            Phase { source: 1, start_iteration: 0, seeding: WitnessSeeding::Keep },
        ])
        .is_err());
        let s = PhaseSchedule::new(vec![
            Phase { source: 0, start_iteration: 0, seeding: WitnessSeeding::Keep },
            Phase { source: 1, start_iteration: 40, seeding: WitnessSeeding::ReseedFromNewData },
        ])
        .unwrap();
        assert_eq!(s.phase_at(0).source, 0);
        assert_eq!(s.phase_at(39).source, 0);
        assert_eq!(s.phase_at(40).source, 1);
        assert_eq!(s.phase_at(1000).source, 1);
    }

    #[test]
    fn mixture_union_halves_the_masses() {
        let a = two_blob_source();
        let b = GaussianMixture::new(2, vec![1.0], vec![0.0, 3.0], vec![0.04]).unwrap();
        let u = mixture_union(&a, &b, 0.5).unwrap();
        assert_eq!(u.n_components(), 3);
        assert!((u.weights()[0] - 0.25).abs() < 1e-15);
        assert!((u.weights()[2] - 0.5).abs() < 1e-15);
        assert!(mixture_union(&a, &b, 0.0).is_err());
    }

    fn continual_cfg(seed: u64) -> ContinualConfig {
        let d1 = GaussianMixture::new(2, vec![1.0], vec![-1.5, 0.0], vec![0.04]).unwrap();
        let d2 = GaussianMixture::new(2, vec![1.0], vec![1.5, 0.0], vec![0.04]).unwrap();
        let mut train = TrainConfig::defaults_2d(seed);
        train.j = 1;
        train.batch = 64;
        train.lambda = Lambda::Finite(5.0);
        train.optimizer = OptimizerKind::Adam;
        ContinualConfig {
            train,
            kernel: KernelSpec::gaussian(2.0).unwrap(),
            d1,
            d2,
            phase2_max_iters: 400,
            capture_threshold: 0.10,
            eval_samples: 512,
            eval_radius: 0.6,
        }
    }

    #[test]
    fn continual_identical_phases_capture_immediately() {
        let mut cfg = continual_cfg(51);
        cfg.d2 = cfg.d1.clone();
        cfg.eval_radius = 3.5; // generator noise is unit-scale around θ
        cfg.phase2_max_iters = 5;
        let schedule = PhaseSchedule::new(vec![
            Phase { source: 0, start_iteration: 0, seeding: WitnessSeeding::Keep },
            Phase { source: 1, start_iteration: 3, seeding: WitnessSeeding::ReseedFromNewData },
        ])
        .unwrap();
        let gen = LocationGenerator::new(vec![-1.5, 0.0]).unwrap();
        let report = continual_scenario(&cfg, &schedule, gen).unwrap();
        assert_eq!(report.mmd_only.capture_iteration, Some(0));
        assert_eq!(report.witness_seeded.capture_iteration, Some(0));
    }

    #[test]
    fn fork_step_moves_generated_mass_toward_new_content() {
        // at the fork, with witnesses parked on the new component, one outer
        // iteration must push the generated mean toward it
        let cfg = continual_cfg(53);
        let union = mixture_union(&cfg.d1, &cfg.d2, 0.5).unwrap();
        let mut train = cfg.train.clone();
        train.batch = 256;
        train.optimizer = OptimizerKind::Sgd;
        let gen = LocationGenerator::new(vec![-1.5, 0.0]).unwrap();
        let witnesses = WitnessSet::new(cfg.d2.means().clone()).unwrap();
        let mut trainer =
            GlocadTrainer::new(&union, gen, Some(witnesses), cfg.kernel, train).unwrap();
        let before = trainer.gen().params().to_vec();
        trainer.step().unwrap();
        let after = trainer.gen().params().to_vec();
        let toward_d2 = [1.5 - before[0], 0.0 - before[1]];
        let displacement = [after[0] - before[0], after[1] - before[1]];
        let dot = toward_d2[0] * displacement[0] + toward_d2[1] * displacement[1];
        assert!(dot > 0.0, "first step moved away from the new component: {displacement:?}");
    }

    #[test]
    fn witness_initializers_produce_requested_shapes() {
        let source = two_blob_source();
        let mut rng = stream_rng(57, STREAM_INIT);
        let v = init_witnesses_from_data(&source, 5, &mut rng).unwrap();
        assert_eq!((v.n(), v.dim()), (5, 2));
        let gen = small_gen(57);
        let m = init_witnesses_mixed(&source, &gen, 5, &mut rng).unwrap();
        assert_eq!((m.n(), m.dim()), (5, 2));
        assert!(init_witnesses_from_data(&source, 0, &mut rng).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_settings() {
        let ok = TrainConfig::defaults_2d(1);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.j = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.batch = 1;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.n_v = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.grad_threshold = 0.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.lambda2 = -1.0;
        assert!(c.validate().is_err());
        // freezing the autoencoder players is allowed
        let mut c = ok.clone();
        c.n_d = 0;
        c.n_e = 0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn trainer_rejects_mismatched_shapes() {
        let source = two_blob_source();
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let cfg = small_cfg(61);
        // witness count disagrees with config
        let v = witness_points(61, 2, 2);
        assert!(GlocadTrainer::new(&source, small_gen(61), Some(v), kernel, cfg.clone()).is_err());
        // witness dimension disagrees with data
        let v1 = witness_points(61, 3, 1);
        assert!(GlocadTrainer::new(&source, small_gen(61), Some(v1), kernel, cfg).is_err());
    }

    #[test]
    fn hit_fraction_counts_rows_near_means() {
        let means = Samples::new(vec![0.0, 0.0, 4.0, 0.0], 2).unwrap();
        let pts = Samples::new(vec![0.1, 0.0, 4.2, 0.1, 2.0, 2.0, -0.3, 0.1], 2).unwrap();
        let f = hit_fraction_near_means(&pts, &means, 0.5).unwrap();
        assert!((f - 0.75).abs() < 1e-12);
    }
}
