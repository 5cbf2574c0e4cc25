//! Critic and generator objectives and the alternating training loop.
//!
//! The critic regimes are weight clipping, the gradient penalty
//! `λ E[(‖∇D(x̂)‖ - 1)²]` on random interpolates (or its one-sided variant
//! `λ E[max(0, ‖∇D(x̂)‖ - 1)²]`) and the standard minimax GAN with a
//! non-saturating generator loss.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{NodeRef, Tape};
use crate::data::Sampler;
use crate::error::{invalid, Error, Result};
use crate::nn::{Network, ParamNodes, ParamSet};
use crate::optim::{clip_weights, Optimizer, OptimizerConfig};
use crate::rng::Rng64;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sidedness {
    TwoSided,
    OneSided,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticRegime {
    Clipping { c: f64 },
    GradientPenalty { lambda: f64, sidedness: Sidedness },
    StandardGan,
}

impl CriticRegime {
    pub fn gp(lambda: f64) -> Self {
        CriticRegime::GradientPenalty { lambda, sidedness: Sidedness::TwoSided }
    }

    pub fn gp_one_sided(lambda: f64) -> Self {
        CriticRegime::GradientPenalty { lambda, sidedness: Sidedness::OneSided }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CriticRegime::Clipping { c } if !(c > 0.0 && c.is_finite()) => {
                Err(invalid(format!("clip bound {c} must be positive")))
            }
            CriticRegime::GradientPenalty { lambda, .. } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(invalid(format!("penalty weight {lambda} must be non-negative")))
            }
            _ => Ok(()),
        }
    }

    /// Short name used on the command line and in output headers.
    pub fn name(&self) -> &'static str {
        match self {
            CriticRegime::Clipping { .. } => "clip",
            CriticRegime::GradientPenalty { sidedness: Sidedness::TwoSided, .. } => "gp",
            CriticRegime::GradientPenalty { sidedness: Sidedness::OneSided, .. } => "gp1",
            CriticRegime::StandardGan => "gan",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub regime: CriticRegime,
    pub n_critic: usize,
    pub batch: usize,
    pub critic_opt: OptimizerConfig,
    pub gen_opt: OptimizerConfig,
    /// Generator iterations to run.
    pub iterations: usize,
    pub seed: u64,
    /// Record per-layer gradient norms of the critic in every metrics row.
    pub track_layer_norms: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regime: CriticRegime::gp(10.0),
            n_critic: 5,
            batch: 64,
            critic_opt: OptimizerConfig::adam_default(),
            gen_opt: OptimizerConfig::adam_default(),
            iterations: 1000,
            seed: 0,
            track_layer_norms: false,
        }
    }
}

impl TrainConfig {
    /// Defaults for `regime`: RMSProp at 5e-5 for clipping, Adam otherwise.
    pub fn for_regime(regime: CriticRegime) -> Self {
        let mut c = Self { regime, ..Self::default() };
        if matches!(regime, CriticRegime::Clipping { .. }) {
            c.critic_opt = OptimizerConfig::rmsprop_default();
            c.gen_opt = OptimizerConfig::rmsprop_default();
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.regime.validate()?;
        if self.n_critic == 0 {
            return Err(invalid("n_critic must be positive"));
        }
        if self.batch == 0 {
            return Err(invalid("batch size must be positive"));
        }
        Ok(())
    }
}

/// Independent seeds for every random stream of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seeds {
    pub critic_init: u64,
    pub gen_init: u64,
    pub real: u64,
    pub latent: u64,
    pub interpolation: u64,
    pub noise: u64,
}

impl Seeds {
    pub fn derive(seed: u64) -> Self {
        let mut r = Rng64::new(seed);
        Self {
            critic_init: r.fork(),
            gen_init: r.fork(),
            real: r.fork(),
            latent: r.fork(),
            interpolation: r.fork(),
            noise: r.fork(),
        }
    }
}

/// `x̂ᵢ = εᵢ xᵢ + (1 - εᵢ) x̃ᵢ`, one ε per example (leading axis).
pub fn interpolate_samples(real: &Tensor, fake: &Tensor, eps: &[f64]) -> Result<Tensor> {
    if real.shape() != fake.shape() || real.rank() == 0 || real.shape()[0] != eps.len() {
        return Err(Error::ShapeMismatch {
            op: "interpolate_samples",
            detail: format!("real {:?}, fake {:?}, {} interpolation weights", real.shape(), fake.shape(), eps.len()),
        });
    }
    if eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(invalid("interpolation weights must lie in [0, 1]"));
    }
    let stride = real.row_len();
    let mut data = Vec::with_capacity(real.len());
    for (i, &e) in eps.iter().enumerate() {
        for (a, b) in real.row(i).iter().zip(fake.row(i)) {
            data.push(e * a + (1.0 - e) * b);
        }
    }
    debug_assert_eq!(data.len(), stride * eps.len());
    Tensor::new(real.shape().to_vec(), data)
}

/// Penalty node plus the per-example gradient norms it was built from.
#[derive(Clone, Copy, Debug)]
pub struct Penalty {
    pub value: NodeRef,
    pub norms: NodeRef,
}

/// `‖∇x̂ D(x̂)‖` per example, as differentiable nodes `[m]`.
pub fn input_gradient_norms(
    tape: &mut Tape,
    critic: &dyn Network,
    params: &ParamNodes,
    x_hat: NodeRef,
) -> Result<NodeRef> {
    let d = critic.forward(tape, params, x_hat)?;
    // examples are independent, so the gradient of the sum is the stack of
    // per-example gradients
    let total = tape.sum(d);
    let g = tape.grad(total, &[x_hat])?[0];
    tape.row_l2_norm(g)
}

pub fn gradient_penalty(
    tape: &mut Tape,
    critic: &dyn Network,
    params: &ParamNodes,
    x_hat: NodeRef,
    lambda: f64,
    sidedness: Sidedness,
) -> Result<Penalty> {
    let norms = input_gradient_norms(tape, critic, params, x_hat)?;
    let dev = tape.add_scalar(norms, -1.0);
    let dev = match sidedness {
        Sidedness::TwoSided => dev,
        Sidedness::OneSided => tape.max_const(dev, 0.0),
    };
    let sq = tape.mul(dev, dev)?;
    let mean = tape.mean(sq);
    Ok(Penalty { value: tape.scale(mean, lambda), norms })
}

/// Nodes of a critic objective.
#[derive(Clone, Copy, Debug)]
pub struct CriticLoss {
    pub loss: NodeRef,
    /// `mean D(x) - mean D(x̃)`.
    pub wasserstein: NodeRef,
    pub penalty: Option<Penalty>,
    /// Critic output on `concat(real, fake)`.
    pub scores: NodeRef,
}

fn scores_on_both(
    tape: &mut Tape,
    critic: &dyn Network,
    params: &ParamNodes,
    real: NodeRef,
    fake: NodeRef,
) -> Result<(NodeRef, NodeRef, NodeRef, Vec<NodeRef>)> {
    let m = tape.shape(real).first().copied().unwrap_or(0);
    let n = tape.shape(fake).first().copied().unwrap_or(0);
    let both = tape.concat(&[real, fake], 0)?;
    let (d, layers) = critic.forward_traced(tape, params, both)?;
    let d_real = tape.slice(d, 0, 0, m)?;
    let d_fake = tape.slice(d, 0, m, n)?;
    Ok((d, d_real, d_fake, layers))
}

fn log_prob(tape: &mut Tape, d: NodeRef, positive: bool) -> NodeRef {
    let s = tape.sigmoid(d);
    let p = tape.clamp(s, PROB_CLAMP, 1.0 - PROB_CLAMP);
    let p = if positive {
        p
    } else {
        let q = tape.neg(p);
        tape.add_scalar(q, 1.0)
    };
    tape.log(p)
}

/// Critic objective to minimise. `x_hat` is required by the penalty regimes
/// and ignored otherwise. `fake` should be a constant: the critic step does
/// not differentiate through the generator.
pub fn critic_loss(
    tape: &mut Tape,
    regime: CriticRegime,
    critic: &dyn Network,
    params: &ParamNodes,
    real: NodeRef,
    fake: NodeRef,
    x_hat: Option<NodeRef>,
) -> Result<CriticLoss> {
    Ok(critic_loss_traced(tape, regime, critic, params, real, fake, x_hat)?.0)
}

fn critic_loss_traced(
    tape: &mut Tape,
    regime: CriticRegime,
    critic: &dyn Network,
    params: &ParamNodes,
    real: NodeRef,
    fake: NodeRef,
    x_hat: Option<NodeRef>,
) -> Result<(CriticLoss, Vec<NodeRef>)> {
    regime.validate()?;
    let (scores, d_real, d_fake, layers) = scores_on_both(tape, critic, params, real, fake)?;
    let mr = tape.mean(d_real);
    let mf = tape.mean(d_fake);
    let wasserstein = tape.sub(mr, mf)?;
    let (loss, penalty) = match regime {
        CriticRegime::Clipping { .. } => (tape.neg(wasserstein), None),
        CriticRegime::GradientPenalty { lambda, sidedness } => {
            let x_hat = x_hat.ok_or_else(|| invalid("gradient penalty needs interpolates"))?;
            let p = gradient_penalty(tape, critic, params, x_hat, lambda, sidedness)?;
            let w = tape.neg(wasserstein);
            (tape.add(w, p.value)?, Some(p))
        }
        CriticRegime::StandardGan => {
            let lr = log_prob(tape, d_real, true);
            let lf = log_prob(tape, d_fake, false);
            let a = tape.mean(lr);
            let b = tape.mean(lf);
            let s = tape.add(a, b)?;
            (tape.neg(s), None)
        }
    };
    Ok((CriticLoss { loss, wasserstein, penalty, scores }, layers))
}

/// Generator objective on the critic's scores of generated samples:
/// `-mean D(G(z))`, or `-mean log σ(D(G(z)))` for the standard GAN.
pub fn generator_loss(
    tape: &mut Tape,
    regime: CriticRegime,
    critic: &dyn Network,
    params: &ParamNodes,
    fake: NodeRef,
) -> Result<NodeRef> {
    let d = critic.forward(tape, params, fake)?;
    Ok(match regime {
        CriticRegime::StandardGan => {
            let l = log_prob(tape, d, true);
            let m = tape.mean(l);
            tape.neg(m)
        }
        _ => {
            let m = tape.mean(d);
            tape.neg(m)
        }
    })
}

const EVAL_CHUNK: usize = 4096;

/// Evaluates a network on a batch without recording gradients. Large
/// batches are split into chunks; rows are independent so the result is the
/// same.
pub fn evaluate(net: &dyn Network, params: &ParamSet, x: &Tensor) -> Result<Tensor> {
    if x.rank() == 0 {
        return Err(invalid("evaluate needs a batch axis"));
    }
    let rows = x.shape()[0];
    let mut parts = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + EVAL_CHUNK).min(rows);
        let idx: Vec<usize> = (start..end).collect();
        let mut tape = Tape::new();
        let p = params.bind_constant(&mut tape);
        let xi = tape.constant(x.gather_rows(&idx));
        let out = net.forward(&mut tape, &p, xi)?;
        parts.push(tape.value(out)?.clone());
        start = end;
        if start >= rows {
            break;
        }
    }
    Tensor::stack_rows(&parts)
}

/// `mean D(x) - mean D(x̃)` over `n` draws from each sampler.
pub fn estimate_wasserstein(
    critic: &dyn Network,
    params: &ParamSet,
    real: &mut dyn Sampler,
    fake: &mut dyn Sampler,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(invalid("estimate_wasserstein needs n >= 1"));
    }
    let (mut sr, mut sf) = (0.0, 0.0);
    let mut left = n;
    while left > 0 {
        let k = left.min(EVAL_CHUNK);
        sr += evaluate(critic, params, &real.sample(k))?.data().iter().sum::<f64>();
        sf += evaluate(critic, params, &fake.sample(k))?.data().iter().sum::<f64>();
        left -= k;
    }
    Ok((sr - sf) / n as f64)
}

/// Real samples plus independent `N(0, σ²)` noise per coordinate.
pub struct NoisySampler {
    inner: Box<dyn Sampler>,
    std: f64,
    seed: u64,
    next: u64,
}

impl NoisySampler {
    pub fn new(inner: Box<dyn Sampler>, std: f64, seed: u64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(invalid(format!("noise standard deviation {std} must be positive")));
        }
        Ok(Self { inner, std, seed, next: 0 })
    }
}

impl Sampler for NoisySampler {
    fn sample(&mut self, n: usize) -> Tensor {
        let mut t = self.inner.sample(n);
        if n > 0 {
            let stride = t.row_len();
            for (i, row) in t.data_mut().chunks_mut(stride).enumerate() {
                let mut rng = Rng64::for_draw(self.seed, self.next + i as u64);
                for v in row {
                    *v += self.std * rng.normal();
                }
            }
        }
        self.next += n as u64;
        t
    }
}

/// Source of the seconds column of the metrics.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Clock that always reads zero, keeping metrics reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// One row per generator iteration, describing the last critic step of that
/// iteration and the generator step that followed it.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    /// Completed generator iterations, starting at 1.
    pub iteration: usize,
    pub critic_loss: f64,
    pub gen_loss: f64,
    /// `mean D(x) - mean D(x̃)`, without any penalty.
    pub w_estimate: f64,
    /// Mean of `‖∇D(x̂)‖` over the interpolates.
    pub gp_mean_norm: f64,
    /// Mean of `(‖∇D(x̂)‖ - 1)²` over the interpolates.
    pub gp_msd: f64,
    /// `‖∂L/∂a_l‖` per critic layer, input side first.
    pub layer_norms: Option<Vec<f64>>,
    pub seconds: f64,
}

/// Where the critic's fake samples come from.
pub enum FakeSource {
    Generator {
        net: Box<dyn Network>,
        params: ParamSet,
        opt: Optimizer,
        latent: Box<dyn Sampler>,
    },
    /// A fixed distribution; only the critic trains.
    Fixed(Box<dyn Sampler>),
}

impl FakeSource {
    pub fn generator(
        net: Box<dyn Network>,
        params: ParamSet,
        opt: OptimizerConfig,
        latent: Box<dyn Sampler>,
    ) -> Result<Self> {
        Ok(FakeSource::Generator { net, params, opt: opt.build()?, latent })
    }
}

fn grad_values(tape: &mut Tape, loss: NodeRef, wrt: &[NodeRef]) -> Result<Vec<Tensor>> {
    let g = tape.grad(loss, wrt)?;
    g.iter().map(|&n| tape.value(n).cloned()).collect()
}

fn stats(norms: &[f64]) -> (f64, f64) {
    let n = norms.len().max(1) as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let msd = norms.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / n;
    (mean, msd)
}

/// Mean norm and mean squared deviation from 1 of per-example critic input
/// gradients at `x_hat`.
pub fn penalty_norm_stats(critic: &dyn Network, params: &ParamSet, x_hat: &Tensor) -> Result<(f64, f64)> {
    let mut tape = Tape::new();
    let p = params.bind_constant(&mut tape);
    let x = tape.constant(x_hat.clone());
    let norms = input_gradient_norms(&mut tape, critic, &p, x)?;
    Ok(stats(tape.value(norms)?.data()))
}

/// Runs the alternating critic / generator updates.
pub struct Trainer {
    config: TrainConfig,
    critic: Box<dyn Network>,
    critic_params: ParamSet,
    critic_opt: Optimizer,
    real: Box<dyn Sampler>,
    fake: FakeSource,
    eps_seed: u64,
    eps_next: u64,
    critic_steps: u64,
    gen_steps: u64,
    iteration: usize,
    clock: Box<dyn Clock>,
}

struct CriticStep {
    loss: f64,
    w: f64,
    norms: Vec<f64>,
    layer_norms: Option<Vec<f64>>,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        critic: Box<dyn Network>,
        critic_params: ParamSet,
        real: Box<dyn Sampler>,
        fake: FakeSource,
    ) -> Result<Self> {
        config.validate()?;
        let critic_opt = config.critic_opt.build()?;
        let eps_seed = Seeds::derive(config.seed).interpolation;
        Ok(Self {
            config,
            critic,
            critic_params,
            critic_opt,
            real,
            fake,
            eps_seed,
            eps_next: 0,
            critic_steps: 0,
            gen_steps: 0,
            iteration: 0,
            clock: Box::new(NoClock),
        })
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn critic(&self) -> &dyn Network {
        self.critic.as_ref()
    }

    pub fn critic_params(&self) -> &ParamSet {
        &self.critic_params
    }

    pub fn generator_params(&self) -> Option<&ParamSet> {
        match &self.fake {
            FakeSource::Generator { params, .. } => Some(params),
            FakeSource::Fixed(_) => None,
        }
    }

    pub fn generator(&self) -> Option<&dyn Network> {
        match &self.fake {
            FakeSource::Generator { net, .. } => Some(net.as_ref()),
            FakeSource::Fixed(_) => None,
        }
    }

    pub fn critic_steps(&self) -> u64 {
        self.critic_steps
    }

    pub fn gen_steps(&self) -> u64 {
        self.gen_steps
    }

    /// Completed generator iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// A batch from the current fake distribution, detached.
    pub fn sample_fake(&mut self, n: usize) -> Result<Tensor> {
        match &mut self.fake {
            FakeSource::Generator { net, params, latent, .. } => evaluate(net.as_ref(), params, &latent.sample(n)),
            FakeSource::Fixed(s) => Ok(s.sample(n)),
        }
    }

    fn diverged(&self, what: &'static str) -> Error {
        Error::Diverged { iteration: self.iteration + 1, last_good: self.iteration, what }
    }

    fn critic_step(&mut self, record_layers: bool) -> Result<CriticStep> {
        let m = self.config.batch;
        let real = self.real.sample(m);
        let fake = self.sample_fake(m)?;
        let eps: Vec<f64> =
            (0..m as u64).map(|i| Rng64::for_draw(self.eps_seed, self.eps_next + i).uniform()).collect();
        self.eps_next += m as u64;
        let x_hat = interpolate_samples(&real, &fake, &eps)?;

        let mut tape = Tape::new();
        let p = self.critic_params.bind(&mut tape);
        let xr = tape.constant(real);
        let xf = tape.constant(fake);
        let xh = tape.constant(x_hat);
        let regime = self.config.regime;
        let (cl, layers) = critic_loss_traced(&mut tape, regime, self.critic.as_ref(), &p, xr, xf, Some(xh))?;
        let loss = tape.scalar(cl.loss)?;
        if !loss.is_finite() {
            return Err(self.diverged("critic loss"));
        }
        let w = tape.scalar(cl.wasserstein)?;
        let norms = match cl.penalty {
            Some(pen) => tape.value(pen.norms)?.data().to_vec(),
            None => {
                let n = input_gradient_norms(&mut tape, self.critic.as_ref(), &p, xh)?;
                tape.value(n)?.data().to_vec()
            }
        };
        let layer_norms = if record_layers && !layers.is_empty() {
            let obj = tape.neg(cl.wasserstein);
            Some(crate::diagnostics::gradient_norms_at(&mut tape, obj, &layers)?)
        } else {
            None
        };
        let grads = grad_values(&mut tape, cl.loss, &p.nodes())?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(self.diverged("critic gradient"));
        }
        self.critic_opt.step(&mut self.critic_params, &grads)?;
        if let CriticRegime::Clipping { c } = regime {
            clip_weights(&mut self.critic_params, c)?;
        }
        self.critic_steps += 1;
        Ok(CriticStep { loss, w, norms, layer_norms })
    }

    fn generator_step(&mut self) -> Result<f64> {
        let m = self.config.batch;
        let regime = self.config.regime;
        match &mut self.fake {
            FakeSource::Generator { net, params, opt, latent } => {
                let z = latent.sample(m);
                let mut tape = Tape::new();
                let gp = params.bind(&mut tape);
                let cp = self.critic_params.bind_constant(&mut tape);
                let zn = tape.constant(z);
                let fake = net.forward(&mut tape, &gp, zn)?;
                let loss = generator_loss(&mut tape, regime, self.critic.as_ref(), &cp, fake)?;
                let value = tape.scalar(loss)?;
                let grads = grad_values(&mut tape, loss, &gp.nodes())?;
                if !value.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Diverged {
                        iteration: self.iteration + 1,
                        last_good: self.iteration,
                        what: "generator loss",
                    });
                }
                opt.step(params, &grads)?;
                self.gen_steps += 1;
                Ok(value)
            }
            FakeSource::Fixed(s) => {
                let fake = s.sample(m);
                let d = evaluate(self.critic.as_ref(), &self.critic_params, &fake)?;
                let loss = match regime {
                    CriticRegime::StandardGan => {
                        -d.data().iter().map(|&v| libm::log(sigmoid_clamped(v))).sum::<f64>() / m as f64
                    }
                    _ => -d.mean(),
                };
                Ok(loss)
            }
        }
    }

    /// One generator iteration: `n_critic` critic updates, then one generator
    /// update (skipped for a fixed fake distribution, whose generator loss is
    /// still reported).
    ///
    /// On error the parameters are those after the last successful update.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let mut last = None;
        for k in 0..self.config.n_critic {
            let record = self.config.track_layer_norms && k + 1 == self.config.n_critic;
            last = Some(self.critic_step(record)?);
        }
        let cs = last.expect("n_critic is positive");
        let gen_loss = self.generator_step()?;
        if !gen_loss.is_finite() {
            return Err(self.diverged("generator loss"));
        }
        self.iteration += 1;
        let (gp_mean_norm, gp_msd) = stats(&cs.norms);
        Ok(MetricsRow {
            iteration: self.iteration,
            critic_loss: cs.loss,
            gen_loss,
            w_estimate: cs.w,
            gp_mean_norm,
            gp_msd,
            layer_norms: cs.layer_norms,
            seconds: self.clock.seconds(),
        })
    }

    /// Runs the configured number of generator iterations, handing each
    /// metrics row to `sink` in order.
    pub fn run(&mut self, sink: &mut dyn FnMut(&MetricsRow) -> Result<()>) -> Result<()> {
        while self.iteration < self.config.iterations {
            let row = self.step()?;
            sink(&row)?;
        }
        Ok(())
    }
}

fn sigmoid_clamped(v: f64) -> f64 {
    let s = if v >= 0.0 { 1.0 / (1.0 + libm::exp(-v)) } else { libm::exp(v) / (1.0 + libm::exp(v)) };
    s.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// A ready-made critic for tests and examples: `D(x) = w·x + b` on `[m, d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCritic {
    pub input: usize,
}

impl Network for LinearCritic {
    fn init_params(&self, seed: u64) -> Result<ParamSet> {
        let mut p = ParamSet::new();
        crate::nn::Linear::new("lin", self.input, 1).init_into(
            &mut p,
            &mut Rng64::new(seed),
            libm::sqrt(6.0 / (self.input + 1) as f64),
        )?;
        Ok(p)
    }

    fn forward(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<NodeRef> {
        crate::nn::Linear::new("lin", self.input, 1).forward(tape, params, x)
    }
}

impl LinearCritic {
    pub fn params(w: &[f64], b: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("lin.w", Tensor::from_raw(vec![1, w.len()], w.to_vec())).expect("fresh set");
        p.insert("lin.b", Tensor::vector(vec![b])).expect("fresh set");
        p
    }
}
