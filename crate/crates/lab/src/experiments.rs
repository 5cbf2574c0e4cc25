//! The experiments behind each subcommand. Every function is deterministic in
//! the config (unless `wallclock` is on) and returns its artifacts as text so
//! callers decide where they go.

use std::path::PathBuf;

use wgangp_core::data::{
    CharCorpus, FixedSetSampler, Grammar, LatentKind, LatentSampler, Sampler, SplitSpec, ToyDistribution, ToySampler,
    DEFAULT_PAD,
};
use wgangp_core::diagnostics::{
    ls_slope, value_surface, weight_histogram, GridSpec, Histogram, TrackPoint, TrainValTracker,
};
use wgangp_core::gan::{
    estimate_wasserstein, evaluate, interpolate_samples, penalty_norm_stats, Clock, CriticRegime, FakeSource,
    MetricsRow, NoClock, NoisySampler, Seeds, Trainer,
};
use wgangp_core::gradcheck::{full_suite, CheckResult};
use wgangp_core::langmodel::{decode_batch, mean_max_probability, ngram_divergence, LmCriticSpec, LmGeneratorSpec};
use wgangp_core::nn::{MlpSpec, Network, ParamSet};
use wgangp_core::rng::Rng64;
use wgangp_core::Tensor;

use crate::clock::WallClock;
use crate::config::{FakeKind, RunConfig};
use crate::error::LabError;
use crate::output::{self, num, Table};
use crate::svg::{self, Series};

/// A named output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Artifact { name: name.into(), contents: contents.into() }
    }
}

/// Writes every artifact under `dir`.
pub fn save(dir: &std::path::Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, LabError> {
    let mut paths = Vec::new();
    for a in artifacts {
        let p = dir.join(&a.name);
        output::write(&p, &a.contents)?;
        paths.push(p);
    }
    Ok(paths)
}

fn clock(cfg: &RunConfig) -> Box<dyn Clock> {
    if cfg.wallclock {
        Box::new(WallClock::start())
    } else {
        Box::new(NoClock)
    }
}

fn params_file(cfg: &RunConfig, params: &ParamSet) -> String {
    params.to_text(cfg.header().trim_start_matches("# "))
}

fn toy_critic(cfg: &RunConfig, dim: usize) -> MlpSpec {
    MlpSpec::uniform(dim, cfg.critic_width, cfg.critic_depth, 1, cfg.activation_fn()).with_layer_norm(cfg.layer_norm)
}

fn toy_generator(cfg: &RunConfig, dim: usize) -> MlpSpec {
    MlpSpec::uniform(cfg.latent, cfg.gen_width, cfg.gen_depth, dim, cfg.activation_fn())
}

fn metrics_svg(title: &str, rows: &[MetricsRow]) -> String {
    let pts = |f: fn(&MetricsRow) -> f64| rows.iter().map(|r| (r.iteration as f64, f(r))).collect();
    svg::line_chart(
        title,
        "generator iteration",
        "value",
        &[
            Series { label: "w_estimate", points: pts(|r| r.w_estimate) },
            Series { label: "critic_loss", points: pts(|r| r.critic_loss) },
        ],
    )
}

/// Steps `trainer` to its iteration budget, calling `each` after every step.
fn drive(
    trainer: &mut Trainer,
    mut each: impl FnMut(&Trainer, &MetricsRow) -> Result<(), LabError>,
) -> Result<Vec<MetricsRow>, LabError> {
    let mut rows = Vec::with_capacity(trainer.config().iterations);
    while trainer.iteration() < trainer.config().iterations {
        let row = trainer.step()?;
        each(trainer, &row)?;
        rows.push(row);
    }
    Ok(rows)
}

// ---------------------------------------------------------------- check-grad

pub struct GradCheckReport {
    pub results: Vec<CheckResult>,
    pub artifacts: Vec<Artifact>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(CheckResult::passed)
    }

    pub fn summary(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .results
            .iter()
            .map(|r| {
                format!(
                    "{:<4} {:<28} {:?} max error {:.3e} (tolerance {:.0e})",
                    if r.passed() { "ok" } else { "FAIL" },
                    r.name,
                    r.order,
                    r.max_error,
                    r.tolerance
                )
            })
            .collect();
        let failed = self.results.iter().filter(|r| !r.passed()).count();
        lines.push(format!("{} checks, {failed} failed", self.results.len()));
        lines
    }
}

pub fn check_grad(cfg: &RunConfig) -> Result<GradCheckReport, LabError> {
    let results = full_suite(cfg.seed, cfg.check_seeds)?;
    let mut t = Table::new(&cfg.header(), "check,order,max_error,tolerance,passed");
    for r in &results {
        t.row(&[
            r.name.clone(),
            format!("{:?}", r.order).to_lowercase(),
            num(r.max_error),
            num(r.tolerance),
            r.passed().to_string(),
        ]);
    }
    Ok(GradCheckReport { results, artifacts: vec![Artifact::new("gradcheck.csv", t.into_string())] })
}

// --------------------------------------------------------------------- train

pub struct TrainReport {
    pub rows: Vec<MetricsRow>,
    pub critic: MlpSpec,
    pub critic_params: ParamSet,
    pub generator_params: Option<ParamSet>,
    pub artifacts: Vec<Artifact>,
}

impl TrainReport {
    pub fn summary(&self) -> Vec<String> {
        match self.rows.last() {
            Some(r) => vec![format!(
                "iteration {}: critic loss {:.6}, generator loss {:.6}, W estimate {:.6}, mean penalty norm {:.4}",
                r.iteration, r.critic_loss, r.gen_loss, r.w_estimate, r.gp_mean_norm
            )],
            None => vec!["no iterations run".into()],
        }
    }
}

/// Algorithm-style training on a toy distribution, either against a
/// generator or against the fixed noisy copy of the data.
pub fn train(cfg: &RunConfig) -> Result<TrainReport, LabError> {
    let dist = cfg.toy();
    let dim = dist.dim();
    let seeds = Seeds::derive(cfg.seed);
    let critic = toy_critic(cfg, dim);
    let critic_params = critic.init_params(seeds.critic_init)?;
    let real = Box::new(ToySampler::new(dist, seeds.real)?);
    let fake = toy_fake_source(cfg, dist, &seeds)?;
    let mut trainer =
        Trainer::new(cfg.train_config(), Box::new(critic.clone()), critic_params, real, fake)?.with_clock(clock(cfg));
    let rows = drive(&mut trainer, |_, _| Ok(()))?;

    let header = cfg.header();
    let critic_params = trainer.critic_params().clone();
    let generator_params = trainer.generator_params().cloned();
    let mut artifacts = vec![
        Artifact::new("metrics.csv", output::metrics_table(&header, &rows).into_string()),
        Artifact::new("metrics.svg", metrics_svg("training metrics", &rows)),
        Artifact::new("critic.params", params_file(cfg, &critic_params)),
    ];
    if let Some(gp) = &generator_params {
        artifacts.push(Artifact::new("generator.params", params_file(cfg, gp)));
        let fake = trainer.sample_fake(512)?;
        let cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        let mut t = Table::new(&header, &cols.join(","));
        for i in 0..fake.shape()[0] {
            t.row(&fake.row(i).iter().map(|&v| num(v)).collect::<Vec<_>>());
        }
        artifacts.push(Artifact::new("samples.csv", t.into_string()));
    }
    Ok(TrainReport { rows, critic, critic_params, generator_params, artifacts })
}

fn toy_fake_source(cfg: &RunConfig, dist: ToyDistribution, seeds: &Seeds) -> Result<FakeSource, LabError> {
    Ok(match cfg.fake {
        FakeKind::Generator => {
            let gen = toy_generator(cfg, dist.dim());
            let params = gen.init_params(seeds.gen_init)?;
            let latent = LatentSampler::new(cfg.latent, LatentKind::Gaussian, seeds.latent)?;
            FakeSource::generator(Box::new(gen), params, cfg.optimizer(), Box::new(latent))?
        }
        FakeKind::Noisy => {
            // an independent stream of real draws, so fakes are not paired
            // with the critic's real batches
            let inner = ToySampler::new(dist, seeds.gen_init)?;
            FakeSource::Fixed(Box::new(NoisySampler::new(Box::new(inner), cfg.noise_std, seeds.noise)?))
        }
    })
}

// ------------------------------------------------------------------- surface

pub struct SurfaceReport {
    pub values: Vec<[f64; 3]>,
    pub artifacts: Vec<Artifact>,
}

/// Evaluates saved critic parameters on a square grid.
pub fn surface(cfg: &RunConfig, params: &ParamSet) -> Result<SurfaceReport, LabError> {
    let dist = cfg.toy();
    if dist.dim() != 2 {
        return Err(LabError::Config { key: "data".into(), msg: "value surfaces need a 2D distribution".into() });
    }
    let critic = toy_critic(cfg, 2);
    let grid = GridSpec::square(cfg.grid_lo, cfg.grid_hi, cfg.grid_n);
    let values = value_surface(&critic, params, &grid)?;
    let real = dist.sample_range(Seeds::derive(cfg.seed).real, 0, 256);
    let overlay: Vec<(f64, f64)> = (0..real.shape()[0]).map(|i| (real.row(i)[0], real.row(i)[1])).collect();
    let artifacts = vec![
        Artifact::new("surface.csv", output::surface_table(&cfg.header(), &values).into_string()),
        Artifact::new("surface.svg", svg::heatmap("critic value surface", &values, grid.nx, grid.ny, &overlay)),
    ];
    Ok(SurfaceReport { values, artifacts })
}

// ----------------------------------------------------------------- gradnorms

/// One critic trained under one regime, with its per-layer gradient norms.
pub struct NormRun {
    pub label: String,
    pub regime: CriticRegime,
    /// Norms at the last critic step of every logged iteration.
    pub series: Vec<(usize, Vec<f64>)>,
    pub critic_params: ParamSet,
    pub histogram: Histogram,
}

impl NormRun {
    pub fn final_norms(&self) -> &[f64] {
        self.series.last().map(|(_, n)| n.as_slice()).unwrap_or(&[])
    }

    /// Largest over smallest final layer norm.
    pub fn ratio(&self) -> f64 {
        let n = self.final_norms();
        let max = n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = n.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Least-squares slope of the natural log of the final norms against the
    /// layer index.
    pub fn log_slope(&self) -> f64 {
        let logs: Vec<f64> = self.final_norms().iter().map(|v| v.ln()).collect();
        ls_slope(&logs)
    }

    /// Fraction of weight entries with `|w| > 0.9 c`.
    pub fn near_clip_fraction(&self, c: f64) -> f64 {
        let w = self.critic_params.weights_only();
        let n = w.num_scalars().max(1) as f64;
        w.values().filter(|v| v.abs() > 0.9 * c).count() as f64 / n
    }
}

pub struct GradNormsReport {
    pub runs: Vec<NormRun>,
    pub artifacts: Vec<Artifact>,
}

impl GradNormsReport {
    pub fn summary(&self) -> Vec<String> {
        self.runs
            .iter()
            .map(|r| {
                format!(
                    "{}: final layer norms max/min {:.3e}, log-norm slope {:.4}, edge-bin weight fraction {:.4}",
                    r.label,
                    r.ratio(),
                    r.log_slope(),
                    r.histogram.edge_fraction()
                )
            })
            .collect()
    }
}

/// Deep critics trained with each clip threshold of the sweep and with the
/// two-sided penalty, tracking `‖∂L/∂a_l‖` per layer.
pub fn gradnorms(cfg: &RunConfig) -> Result<GradNormsReport, LabError> {
    let mut variants: Vec<RunConfig> = cfg
        .clip_sweep
        .iter()
        .map(|&c| {
            let mut v = cfg.clone();
            v.regime = "clip".into();
            v.clip = c;
            v
        })
        .collect();
    let mut gp = cfg.clone();
    gp.regime = "gp".into();
    variants.push(gp);

    let mut runs = Vec::new();
    let mut artifacts = Vec::new();
    for v in &variants {
        let run = norm_run(v)?;
        let header = v.header();
        artifacts.push(Artifact::new(
            format!("gradnorms_{}.csv", run.label),
            output::gradnorms_table(&header, &run.series).into_string(),
        ));
        artifacts.push(Artifact::new(
            format!("weights_{}.csv", run.label),
            output::histogram_table(&header, &run.histogram).into_string(),
        ));
        artifacts.push(Artifact::new(
            format!("weights_{}.svg", run.label),
            svg::bars(&format!("critic weights, {}", run.label), &run.histogram.edges, &run.histogram.counts),
        ));
        runs.push(run);
    }
    let series: Vec<Series> = runs
        .iter()
        .map(|r| Series {
            label: &r.label,
            points: r.final_norms().iter().enumerate().map(|(l, n)| (l as f64, n.log10())).collect(),
        })
        .collect();
    artifacts.push(Artifact::new(
        "gradnorms.svg",
        svg::line_chart("critic gradient norms by layer", "layer", "log10 norm", &series),
    ));
    Ok(GradNormsReport { runs, artifacts })
}

fn norm_run(cfg: &RunConfig) -> Result<NormRun, LabError> {
    let dist = cfg.toy();
    let seeds = Seeds::derive(cfg.seed);
    let critic = toy_critic(cfg, dist.dim());
    let params = critic.init_params(seeds.critic_init)?;
    let real = Box::new(ToySampler::new(dist, seeds.real)?);
    let fake = toy_fake_source(cfg, dist, &seeds)?;
    let mut tc = cfg.train_config();
    tc.track_layer_norms = true;
    let mut trainer = Trainer::new(tc, Box::new(critic), params, real, fake)?;
    let mut series = Vec::new();
    let last = cfg.iters;
    drive(&mut trainer, |_, row| {
        if row.iteration % cfg.log_every == 0 || row.iteration == last {
            if let Some(n) = &row.layer_norms {
                series.push((row.iteration, n.clone()));
            }
        }
        Ok(())
    })?;
    let critic_params = trainer.critic_params().clone();
    let regime = cfg.critic_regime();
    let (label, range) = match regime {
        CriticRegime::Clipping { c } => (format!("clip_{c}"), c),
        _ => {
            let m = critic_params.weights_only().values().fold(0.0f64, |a, v| a.max(v.abs()));
            (regime.name().to_string(), if m > 0.0 { m } else { 1.0 })
        }
    };
    let histogram = weight_histogram(&critic_params.weights_only(), cfg.hist_bins, -range, range)?;
    Ok(NormRun { label, regime, series, critic_params, histogram })
}

// --------------------------------------------------------------------- wdist

pub struct WdistReport {
    pub estimate: f64,
    /// Mean and mean squared deviation from 1 of `‖∇D(x̂)‖` at fresh
    /// interpolates.
    pub mean_norm: f64,
    pub msd: f64,
    pub rows: Vec<MetricsRow>,
    pub artifacts: Vec<Artifact>,
}

impl WdistReport {
    pub fn summary(&self) -> Vec<String> {
        vec![
            format!("W estimate {:.6}", self.estimate),
            format!("mean gradient norm at interpolates {:.6}, mean squared deviation {:.6}", self.mean_norm, self.msd),
        ]
    }
}

/// A critic trained between two fixed 1D Gaussians, then evaluated on fresh
/// samples.
pub fn wdist(cfg: &RunConfig) -> Result<WdistReport, LabError> {
    let seeds = Seeds::derive(cfg.seed);
    let real_dist = ToyDistribution::gaussian_1d(cfg.real_mean, 1.0);
    let fake_dist = ToyDistribution::gaussian_1d(cfg.fake_mean, 1.0);
    let critic = toy_critic(cfg, 1);
    let params = critic.init_params(seeds.critic_init)?;
    let real = Box::new(ToySampler::new(real_dist, seeds.real)?);
    let fake = FakeSource::Fixed(Box::new(ToySampler::new(fake_dist, seeds.gen_init)?));
    let mut trainer =
        Trainer::new(cfg.train_config(), Box::new(critic.clone()), params, real, fake)?.with_clock(clock(cfg));
    let rows = drive(&mut trainer, |_, _| Ok(()))?;
    let params = trainer.critic_params().clone();

    let mut eval = Rng64::new(seeds.noise);
    let mut er = ToySampler::new(real_dist, eval.fork())?;
    let mut ef = ToySampler::new(fake_dist, eval.fork())?;
    let estimate = estimate_wasserstein(&critic, &params, &mut er, &mut ef, cfg.eval_samples)?;
    let n = cfg.norm_samples;
    let xr = er.sample(n);
    let xf = ef.sample(n);
    let mut er_eps = Rng64::new(eval.fork());
    let eps: Vec<f64> = (0..n).map(|_| er_eps.uniform()).collect();
    let x_hat = interpolate_samples(&xr, &xf, &eps)?;
    let (mean_norm, msd) = penalty_norm_stats(&critic, &params, &x_hat)?;

    let header = cfg.header();
    let mut t = Table::new(&header, "estimate,mean_norm,msd");
    t.row(&[num(estimate), num(mean_norm), num(msd)]);
    let profile_x = Tensor::new(
        vec![201, 1],
        (0..201).map(|i| cfg.fake_mean - 4.0 + (cfg.real_mean - cfg.fake_mean + 8.0) * i as f64 / 200.0).collect(),
    )?;
    let profile_d = evaluate(&critic, &params, &profile_x)?;
    let mut p = Table::new(&header, "x,value");
    for (x, d) in profile_x.data().iter().zip(profile_d.data()) {
        p.row(&[num(*x), num(*d)]);
    }
    let artifacts = vec![
        Artifact::new("metrics.csv", output::metrics_table(&header, &rows).into_string()),
        Artifact::new("metrics.svg", metrics_svg("critic between fixed distributions", &rows)),
        Artifact::new("wdist.csv", t.into_string()),
        Artifact::new("profile.csv", p.into_string()),
        Artifact::new("critic.params", params_file(cfg, &params)),
    ];
    Ok(WdistReport { estimate, mean_norm, msd, rows, artifacts })
}

// ------------------------------------------------------------------- overfit

pub struct OverfitReport {
    pub points: Vec<TrackPoint>,
    pub rows: Vec<MetricsRow>,
    pub artifacts: Vec<Artifact>,
}

impl OverfitReport {
    /// Mean gap over the first and the last `fraction` of tracked points.
    pub fn gaps(&self, fraction: f64) -> (f64, f64) {
        let n = self.points.len();
        let k = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
        let mean = |ps: &[TrackPoint]| ps.iter().map(TrackPoint::gap).sum::<f64>() / ps.len().max(1) as f64;
        (mean(&self.points[..k.min(n)]), mean(&self.points[n.saturating_sub(k)..]))
    }

    /// Least-squares slope of the training negative loss over the final half.
    pub fn late_train_slope(&self) -> f64 {
        let half = &self.points[self.points.len() / 2..];
        ls_slope(&half.iter().map(|p| p.train).collect::<Vec<_>>())
    }

    pub fn summary(&self) -> Vec<String> {
        let (first, last) = self.gaps(0.1);
        vec![format!(
            "gap (validation minus training loss): first 10% {first:.6}, last 10% {last:.6}; late training slope {:.3e}",
            self.late_train_slope()
        )]
    }
}

/// Training on a small frozen subset while tracking the critic's negative
/// loss on it and on a disjoint validation draw.
pub fn overfit(cfg: &RunConfig) -> Result<OverfitReport, LabError> {
    let dist = cfg.toy();
    let seeds = Seeds::derive(cfg.seed);
    let (train_set, val_set) =
        SplitSpec { train: cfg.train_size, validation: cfg.val_size, seed: seeds.real }.split(&dist)?;
    let critic = toy_critic(cfg, dist.dim());
    let params = critic.init_params(seeds.critic_init)?;
    let real = Box::new(FixedSetSampler::new(train_set.clone(), seeds.real)?);
    let gen = toy_generator(cfg, dist.dim());
    let gen_params = gen.init_params(seeds.gen_init)?;
    let latent = LatentSampler::new(cfg.latent, LatentKind::Gaussian, seeds.latent)?;
    let fake = FakeSource::generator(Box::new(gen), gen_params, cfg.optimizer(), Box::new(latent))?;
    let mut trainer = Trainer::new(cfg.train_config(), Box::new(critic), params, real, fake)?.with_clock(clock(cfg));
    let mut tracker = TrainValTracker::new(train_set, val_set, cfg.track_every)?;
    let mut eval_latent = LatentSampler::new(cfg.latent, LatentKind::Gaussian, seeds.noise)?;
    let n_fake = cfg.val_size;
    let rows = drive(&mut trainer, |t, row| {
        if tracker.due(row.iteration) {
            let (g, gp) = (t.generator().expect("generator"), t.generator_params().expect("generator"));
            let fake = evaluate(g, gp, &eval_latent.sample(n_fake))?;
            tracker.observe(row.iteration, t.critic(), t.critic_params(), &fake)?;
        }
        Ok(())
    })?;
    let points = tracker.points().to_vec();
    let header = cfg.header();
    let series = |f: fn(&TrackPoint) -> f64| points.iter().map(|p| (p.iteration as f64, f(p))).collect();
    let artifacts = vec![
        Artifact::new("overfit.csv", output::track_table(&header, &points).into_string()),
        Artifact::new(
            "overfit.svg",
            svg::line_chart(
                "negative critic loss",
                "generator iteration",
                "mean D(x) - mean D(fake)",
                &[
                    Series { label: "train", points: series(|p| p.train) },
                    Series { label: "validation", points: series(|p| p.validation) },
                ],
            ),
        ),
        Artifact::new("metrics.csv", output::metrics_table(&header, &rows).into_string()),
    ];
    Ok(OverfitReport { points, rows, artifacts })
}

// ------------------------------------------------------------ language model

pub struct LmReport {
    pub corpus: CharCorpus,
    pub samples: Vec<String>,
    pub unigram_js: f64,
    pub bigram_js: f64,
    /// `(iteration, mean max probability)` on a fixed latent batch, starting
    /// at iteration 0.
    pub sharpness: Vec<(usize, f64)>,
    pub rows: Vec<MetricsRow>,
    pub generator_params: ParamSet,
    pub artifacts: Vec<Artifact>,
}

impl LmReport {
    pub fn summary(&self) -> Vec<String> {
        let first = self.sharpness.first().map(|p| p.1).unwrap_or(f64::NAN);
        let last = self.sharpness.last().map(|p| p.1).unwrap_or(f64::NAN);
        let mut lines = vec![
            format!("unigram JS {:.5}, bigram JS {:.5}", self.unigram_js, self.bigram_js),
            format!("mean max probability {first:.4} -> {last:.4}"),
        ];
        lines.extend(self.samples.iter().take(5).cloned());
        lines
    }
}

/// The corpus named by the config: a text file, or a synthetic draw from the
/// grammar.
pub fn load_corpus(cfg: &RunConfig) -> Result<CharCorpus, LabError> {
    match &cfg.corpus {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
            Ok(CharCorpus::from_lines(&text, DEFAULT_PAD)?)
        }
        None => {
            let grammar = Grammar::parse(&cfg.grammar)
                .map_err(|e| LabError::Config { key: "grammar".into(), msg: e.to_string() })?;
            Ok(CharCorpus::synthesize(&grammar, cfg.corpus_size, Seeds::derive(cfg.seed).real, DEFAULT_PAD)?)
        }
    }
}

pub fn lm_specs(cfg: &RunConfig, vocab: usize) -> (LmGeneratorSpec, LmCriticSpec) {
    let gen = LmGeneratorSpec {
        latent: cfg.lm_latent,
        channels: cfg.lm_channels,
        kernel: cfg.lm_kernel,
        ..LmGeneratorSpec::new(vocab)
    };
    let critic = LmCriticSpec { channels: cfg.lm_channels, kernel: cfg.lm_kernel, ..LmCriticSpec::new(vocab) };
    (gen, critic)
}

/// Independent seeds for the sharpness probe and the final sample dump.
fn lm_eval_seeds(cfg: &RunConfig) -> (u64, u64) {
    let mut r = Rng64::new(Seeds::derive(cfg.seed).noise);
    (r.fork(), r.fork())
}

const SHARPNESS_BATCH: usize = 256;

pub fn lm_train(cfg: &RunConfig) -> Result<LmReport, LabError> {
    let corpus = load_corpus(cfg)?;
    if corpus.is_empty() {
        return Err(LabError::Config { key: "corpus".into(), msg: "the corpus has no sequences".into() });
    }
    let seeds = Seeds::derive(cfg.seed);
    let (gen, critic) = lm_specs(cfg, corpus.vocab_size());
    let real = Box::new(FixedSetSampler::new(corpus.encode_onehot()?, seeds.real)?);
    let gen_params = gen.init_params(seeds.gen_init)?;
    let critic_params = critic.init_params(seeds.critic_init)?;
    let latent = LatentSampler::new(cfg.lm_latent, LatentKind::Gaussian, seeds.latent)?;
    let fake = FakeSource::generator(Box::new(gen.clone()), gen_params.clone(), cfg.optimizer(), Box::new(latent))?;
    let mut trainer =
        Trainer::new(cfg.train_config(), Box::new(critic), critic_params, real, fake)?.with_clock(clock(cfg));

    let (probe_seed, sample_seed) = lm_eval_seeds(cfg);
    let probe = LatentSampler::new(cfg.lm_latent, LatentKind::Gaussian, probe_seed)?.sample(SHARPNESS_BATCH);
    let mut sharpness = vec![(0, mean_max_probability(&evaluate(&gen, &gen_params, &probe)?))];
    let last = cfg.iters;
    let rows = drive(&mut trainer, |t, row| {
        if row.iteration % cfg.track_every == 0 || row.iteration == last {
            let soft = evaluate(&gen, t.generator_params().expect("generator"), &probe)?;
            sharpness.push((row.iteration, mean_max_probability(&soft)));
        }
        Ok(())
    })?;
    let gen_params = trainer.generator_params().expect("generator").clone();
    let critic_params = trainer.critic_params().clone();
    let samples = lm_samples(cfg, &gen, &gen_params, &corpus, sample_seed)?;
    let unigram_js = ngram_divergence(&samples, &corpus, 1)?;
    let bigram_js = ngram_divergence(&samples, &corpus, 2)?;

    let header = cfg.header();
    let mut sh = Table::new(&header, "iter,mean_max_prob");
    for (it, v) in &sharpness {
        sh.row(&[it.to_string(), num(*v)]);
    }
    let mut js = Table::new(&header, "n,js_divergence");
    js.row(&["1".into(), num(unigram_js)]);
    js.row(&["2".into(), num(bigram_js)]);
    let artifacts = vec![
        Artifact::new("metrics.csv", output::metrics_table(&header, &rows).into_string()),
        Artifact::new("metrics.svg", metrics_svg("language model training", &rows)),
        Artifact::new("sharpness.csv", sh.into_string()),
        Artifact::new("ngrams.csv", js.into_string()),
        Artifact::new("samples.txt", output::samples_text(&header, &samples)),
        Artifact::new("generator.params", params_file(cfg, &gen_params)),
        Artifact::new("critic.params", params_file(cfg, &critic_params)),
    ];
    Ok(LmReport { corpus, samples, unigram_js, bigram_js, sharpness, rows, generator_params: gen_params, artifacts })
}

fn lm_samples(
    cfg: &RunConfig,
    gen: &LmGeneratorSpec,
    params: &ParamSet,
    corpus: &CharCorpus,
    seed: u64,
) -> Result<Vec<String>, LabError> {
    let z = LatentSampler::new(cfg.lm_latent, LatentKind::Gaussian, seed)?.sample(cfg.samples);
    Ok(decode_batch(&evaluate(gen, params, &z)?, corpus.vocab())?)
}

pub struct LmSampleReport {
    pub samples: Vec<String>,
    pub unigram_js: f64,
    pub bigram_js: f64,
    pub artifacts: Vec<Artifact>,
}

/// Decodes samples from saved generator parameters.
pub fn lm_sample(cfg: &RunConfig, params: &ParamSet) -> Result<LmSampleReport, LabError> {
    let corpus = load_corpus(cfg)?;
    let (gen, _) = lm_specs(cfg, corpus.vocab_size());
    let samples = lm_samples(cfg, &gen, params, &corpus, lm_eval_seeds(cfg).1)?;
    let unigram_js = ngram_divergence(&samples, &corpus, 1)?;
    let bigram_js = ngram_divergence(&samples, &corpus, 2)?;
    let artifacts = vec![Artifact::new("samples.txt", output::samples_text(&cfg.header(), &samples))];
    Ok(LmSampleReport { samples, unigram_js, bigram_js, artifacts })
}
