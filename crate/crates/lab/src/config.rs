//! Flat `key=value` run configuration.
//!
//! One pair per line, `#` starts a comment. Every key has a default that may
//! depend on the subcommand; the file is applied first and command-line flags
//! after it. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wgangp_core::data::{LatentKind, ToyDistribution};
use wgangp_core::gan::{CriticRegime, Sidedness, TrainConfig};
use wgangp_core::nn::Activation;
use wgangp_core::optim::{OptimizerConfig, RMSPROP_DECAY};

use crate::error::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckGrad,
    Train,
    Surface,
    GradNorms,
    Wdist,
    Overfit,
    LmTrain,
    LmSample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckGrad => "check-grad",
            Command::Train => "train",
            Command::Surface => "surface",
            Command::GradNorms => "gradnorms",
            Command::Wdist => "wdist",
            Command::Overfit => "overfit",
            Command::LmTrain => "lm-train",
            Command::LmSample => "lm-sample",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptKind {
    Adam,
    RmsProp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FakeKind {
    /// A trained generator.
    Generator,
    /// Real data plus Gaussian noise; only the critic trains.
    Noisy,
}

/// Every knob of every experiment, resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub regime: String,
    pub clip: f64,
    pub lambda: f64,
    pub ncritic: usize,
    pub iters: usize,
    pub opt: Option<OptKind>,
    pub lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub batch: usize,
    pub data: String,
    pub activation: String,
    pub layer_norm: bool,
    pub critic_width: usize,
    /// Linear layers, so hidden layers plus one.
    pub critic_depth: usize,
    pub gen_width: usize,
    pub gen_depth: usize,
    pub latent: usize,
    pub fake: FakeKind,
    pub noise_std: f64,
    pub params: Option<PathBuf>,
    pub grid_n: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub clip_sweep: Vec<f64>,
    pub log_every: usize,
    pub hist_bins: usize,
    pub real_mean: f64,
    pub fake_mean: f64,
    pub eval_samples: usize,
    pub norm_samples: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub track_every: usize,
    pub corpus: Option<PathBuf>,
    pub corpus_size: usize,
    pub grammar: String,
    pub lm_channels: usize,
    pub lm_kernel: usize,
    pub lm_latent: usize,
    pub samples: usize,
    pub check_seeds: u64,
    pub wallclock: bool,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = RunConfig {
            command,
            seed: 0,
            out: PathBuf::from("out"),
            regime: "gp".into(),
            clip: 0.01,
            lambda: 10.0,
            ncritic: 5,
            iters: 2000,
            opt: None,
            lr: None,
            beta1: 0.0,
            beta2: 0.9,
            batch: 64,
            data: "eight_gaussians".into(),
            activation: "relu".into(),
            layer_norm: false,
            critic_width: 64,
            critic_depth: 3,
            gen_width: 64,
            gen_depth: 3,
            latent: 2,
            fake: FakeKind::Generator,
            noise_std: 1.0,
            params: None,
            grid_n: 64,
            grid_lo: -3.0,
            grid_hi: 3.0,
            clip_sweep: vec![0.1, 0.01, 0.001],
            log_every: 100,
            hist_bins: 20,
            real_mean: 3.0,
            fake_mean: 0.0,
            eval_samples: 100_000,
            norm_samples: 10_000,
            train_size: 64,
            val_size: 256,
            track_every: 10,
            corpus: None,
            corpus_size: 2000,
            grammar: wgangp_core::data::DEFAULT_GRAMMAR.into(),
            lm_channels: 16,
            lm_kernel: 5,
            lm_latent: 128,
            samples: 1000,
            check_seeds: 10,
            wallclock: false,
        };
        match command {
            Command::GradNorms => {
                c.data = "swiss_roll".into();
                c.critic_depth = 12;
                c.gen_depth = 12;
                c.iters = 400;
            }
            Command::Wdist => {
                // three hidden layers of 64
                c.critic_depth = 4;
            }
            Command::Overfit => {
                c.iters = 2000;
            }
            Command::LmTrain | Command::LmSample => {
                c.iters = 5000;
                c.batch = 32;
            }
            _ => {}
        }
        c
    }

    /// Applies a config file's pairs.
    pub fn apply_text(&mut self, text: &str) -> Result<(), LabError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| LabError::Config {
                key: line.to_string(),
                msg: format!("line {} is not a key=value pair", n + 1),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config {
            key: "config".into(),
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        self.apply_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), LabError> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "regime" => {
                if !["gp", "gp1", "clip", "gan"].contains(&value) {
                    return Err(bad(key, value, "expected gp, gp1, clip or gan"));
                }
                self.regime = value.into();
            }
            "clip" => self.clip = positive(key, value)?,
            "lambda" => {
                let l: f64 = parse(key, value)?;
                if l.is_nan() || l < 0.0 {
                    return Err(bad(key, value, "must be non-negative"));
                }
                self.lambda = l;
            }
            "ncritic" => self.ncritic = count(key, value)?,
            "iters" => self.iters = parse(key, value)?,
            "opt" => {
                self.opt = Some(match value {
                    "adam" => OptKind::Adam,
                    "rmsprop" => OptKind::RmsProp,
                    _ => return Err(bad(key, value, "expected adam or rmsprop")),
                })
            }
            "lr" => self.lr = Some(positive(key, value)?),
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "batch" => self.batch = count(key, value)?,
            "data" => {
                toy_distribution(value, self.real_mean).map_err(|msg| bad(key, value, &msg))?;
                self.data = value.into();
            }
            "activation" => {
                parse_activation(value).map_err(|msg| bad(key, value, &msg))?;
                self.activation = value.into();
            }
            "layer_norm" => self.layer_norm = parse(key, value)?,
            "critic_width" => self.critic_width = count(key, value)?,
            "critic_depth" => self.critic_depth = count(key, value)?,
            "gen_width" => self.gen_width = count(key, value)?,
            "gen_depth" => self.gen_depth = count(key, value)?,
            "latent" => self.latent = count(key, value)?,
            "fake" => {
                self.fake = match value {
                    "generator" => FakeKind::Generator,
                    "noisy" => FakeKind::Noisy,
                    _ => return Err(bad(key, value, "expected generator or noisy")),
                }
            }
            "noise_std" => self.noise_std = positive(key, value)?,
            "params" => self.params = optional_path(value),
            "grid_n" => {
                let n = parse(key, value)?;
                if n < 2 {
                    return Err(bad(key, value, "must be at least 2"));
                }
                self.grid_n = n;
            }
            "grid_lo" => self.grid_lo = parse(key, value)?,
            "grid_hi" => self.grid_hi = parse(key, value)?,
            "clip_sweep" => {
                let cs = value.split(',').map(|s| positive(key, s.trim())).collect::<Result<Vec<f64>, _>>()?;
                if cs.is_empty() {
                    return Err(bad(key, value, "needs at least one threshold"));
                }
                self.clip_sweep = cs;
            }
            "log_every" => self.log_every = count(key, value)?,
            "hist_bins" => {
                let b = parse(key, value)?;
                if b < 2 {
                    return Err(bad(key, value, "must be at least 2"));
                }
                self.hist_bins = b;
            }
            "real_mean" => self.real_mean = parse(key, value)?,
            "fake_mean" => self.fake_mean = parse(key, value)?,
            "eval_samples" => self.eval_samples = count(key, value)?,
            "norm_samples" => self.norm_samples = count(key, value)?,
            "train_size" => self.train_size = count(key, value)?,
            "val_size" => self.val_size = count(key, value)?,
            "track_every" => self.track_every = count(key, value)?,
            "corpus" => self.corpus = optional_path(value),
            "corpus_size" => self.corpus_size = parse(key, value)?,
            "grammar" => self.grammar = value.into(),
            "lm_channels" => self.lm_channels = count(key, value)?,
            "lm_kernel" => self.lm_kernel = count(key, value)?,
            "lm_latent" => self.lm_latent = count(key, value)?,
            "samples" => self.samples = count(key, value)?,
            "check_seeds" => self.check_seeds = parse(key, value)?,
            "wallclock" => self.wallclock = parse(key, value)?,
            _ => {
                return Err(LabError::Config { key: key.into(), msg: "unknown key".into() });
            }
        }
        Ok(())
    }

    pub fn critic_regime(&self) -> CriticRegime {
        match self.regime.as_str() {
            "clip" => CriticRegime::Clipping { c: self.clip },
            "gp1" => CriticRegime::GradientPenalty { lambda: self.lambda, sidedness: Sidedness::OneSided },
            "gan" => CriticRegime::StandardGan,
            _ => CriticRegime::GradientPenalty { lambda: self.lambda, sidedness: Sidedness::TwoSided },
        }
    }

    /// RMSProp for clipping unless chosen explicitly, Adam otherwise.
    pub fn opt_kind(&self) -> OptKind {
        self.opt.unwrap_or(if self.regime == "clip" { OptKind::RmsProp } else { OptKind::Adam })
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        match self.opt_kind() {
            OptKind::Adam => {
                OptimizerConfig::Adam { lr: self.lr.unwrap_or(1e-4), beta1: self.beta1, beta2: self.beta2 }
            }
            OptKind::RmsProp => OptimizerConfig::RmsProp { lr: self.lr.unwrap_or(5e-5), decay: RMSPROP_DECAY },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            regime: self.critic_regime(),
            n_critic: self.ncritic,
            batch: self.batch,
            critic_opt: self.optimizer(),
            gen_opt: self.optimizer(),
            iterations: self.iters,
            seed: self.seed,
            track_layer_norms: false,
        }
    }

    pub fn toy(&self) -> ToyDistribution {
        toy_distribution(&self.data, self.real_mean).expect("validated when set")
    }

    pub fn activation_fn(&self) -> Activation {
        parse_activation(&self.activation).expect("validated when set")
    }

    pub fn latent_kind(&self) -> LatentKind {
        LatentKind::Gaussian
    }

    /// Resolved values in key order, as written to file headers.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        let opt = match self.opt_kind() {
            OptKind::Adam => "adam",
            OptKind::RmsProp => "rmsprop",
        };
        let join = |v: &[f64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        m.insert("seed", self.seed.to_string());
        m.insert("out", self.out.display().to_string());
        m.insert("regime", self.regime.clone());
        m.insert("clip", self.clip.to_string());
        m.insert("lambda", self.lambda.to_string());
        m.insert("ncritic", self.ncritic.to_string());
        m.insert("iters", self.iters.to_string());
        m.insert("opt", opt.into());
        m.insert("lr", self.optimizer().lr().to_string());
        m.insert("beta1", self.beta1.to_string());
        m.insert("beta2", self.beta2.to_string());
        m.insert("batch", self.batch.to_string());
        m.insert("data", self.data.clone());
        m.insert("activation", self.activation.clone());
        m.insert("layer_norm", self.layer_norm.to_string());
        m.insert("critic_width", self.critic_width.to_string());
        m.insert("critic_depth", self.critic_depth.to_string());
        m.insert("gen_width", self.gen_width.to_string());
        m.insert("gen_depth", self.gen_depth.to_string());
        m.insert("latent", self.latent.to_string());
        m.insert("fake", if self.fake == FakeKind::Noisy { "noisy" } else { "generator" }.into());
        m.insert("noise_std", self.noise_std.to_string());
        m.insert("params", path(&self.params));
        m.insert("grid_n", self.grid_n.to_string());
        m.insert("grid_lo", self.grid_lo.to_string());
        m.insert("grid_hi", self.grid_hi.to_string());
        m.insert("clip_sweep", join(&self.clip_sweep));
        m.insert("log_every", self.log_every.to_string());
        m.insert("hist_bins", self.hist_bins.to_string());
        m.insert("real_mean", self.real_mean.to_string());
        m.insert("fake_mean", self.fake_mean.to_string());
        m.insert("eval_samples", self.eval_samples.to_string());
        m.insert("norm_samples", self.norm_samples.to_string());
        m.insert("train_size", self.train_size.to_string());
        m.insert("val_size", self.val_size.to_string());
        m.insert("track_every", self.track_every.to_string());
        m.insert("corpus", path(&self.corpus));
        m.insert("corpus_size", self.corpus_size.to_string());
        m.insert("grammar", self.grammar.clone());
        m.insert("lm_channels", self.lm_channels.to_string());
        m.insert("lm_kernel", self.lm_kernel.to_string());
        m.insert("lm_latent", self.lm_latent.to_string());
        m.insert("samples", self.samples.to_string());
        m.insert("check_seeds", self.check_seeds.to_string());
        m.insert("wallclock", self.wallclock.to_string());
        m
    }

    /// The provenance comment that opens every output file.
    /// Provenance comment for artifacts. The output directory is left out so
    /// that identical runs produce identical bytes wherever they are written.
    pub fn header(&self) -> String {
        let pairs: Vec<String> =
            self.entries().into_iter().filter(|(k, _)| *k != "out").map(|(k, v)| format!("{k}={v}")).collect();
        format!("# wgangp {} {}", self.command.name(), pairs.join(" "))
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn bad(key: &str, value: &str, why: &str) -> LabError {
    LabError::Config { key: key.into(), msg: format!("invalid value `{value}`: {why}") }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, LabError> {
    value.parse().map_err(|_| bad(key, value, "cannot parse"))
}

fn positive(key: &str, value: &str) -> Result<f64, LabError> {
    let v: f64 = parse(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "must be positive"))
    }
}

fn count(key: &str, value: &str) -> Result<usize, LabError> {
    let v: usize = parse(key, value)?;
    if v == 0 {
        return Err(bad(key, value, "must be positive"));
    }
    Ok(v)
}

fn toy_distribution(name: &str, mean: f64) -> Result<ToyDistribution, String> {
    Ok(match name {
        "swiss_roll" => ToyDistribution::swiss_roll(),
        "eight_gaussians" => ToyDistribution::eight_gaussians(),
        "twenty_five_gaussians" => ToyDistribution::twenty_five_gaussians(),
        "gaussian_1d" => ToyDistribution::gaussian_1d(mean, 1.0),
        _ => return Err("expected swiss_roll, eight_gaussians, twenty_five_gaussians or gaussian_1d".into()),
    })
}

fn parse_activation(name: &str) -> Result<Activation, String> {
    Ok(match name {
        "relu" => Activation::Relu,
        "leaky_relu" => Activation::leaky(),
        "tanh" => Activation::Tanh,
        "softplus" => Activation::ShiftedSoftplus,
        _ => return Err("expected relu, leaky_relu, tanh or softplus".into()),
    })
}
