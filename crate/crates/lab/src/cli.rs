//! Argument parsing and dispatch. Exit codes: 0 success, 1 usage, config or
//! IO errors (and failed gradient checks), 2 numeric failure during training.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use wgangp_core::nn::ParamSet;

use crate::config::{Command, RunConfig};
use crate::error::LabError;
use crate::experiments::{self, Artifact};

#[derive(Parser, Debug)]
#[command(name = "wgangp", version, about = "Wasserstein GAN critic experiments with gradient penalty")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Finite-difference checks of every primitive and of the penalized critic loss.
    CheckGrad(Flags),
    /// Train a critic and generator on a toy distribution.
    Train(Flags),
    /// Evaluate saved critic parameters on a grid.
    Surface(Flags),
    /// Per-layer critic gradient norms across clip thresholds and the penalty.
    Gradnorms(Flags),
    /// Estimate the distance between two fixed 1D Gaussians with a trained critic.
    Wdist(Flags),
    /// Track training and validation critic losses on a small frozen subset.
    Overfit(Flags),
    /// Train the character-sequence generator and convolutional critic.
    LmTrain(Flags),
    /// Decode sequences from saved generator parameters.
    LmSample(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Flat key=value config file, applied before the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// gp, gp1 (one-sided penalty), clip or gan.
    #[arg(long)]
    regime: Option<String>,
    /// Weight clipping threshold.
    #[arg(long, allow_hyphen_values = true)]
    clip: Option<String>,
    /// Penalty coefficient.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Critic updates per generator update.
    #[arg(long, allow_hyphen_values = true)]
    ncritic: Option<String>,
    /// Generator iterations.
    #[arg(long, allow_hyphen_values = true)]
    iters: Option<String>,
    /// adam or rmsprop.
    #[arg(long)]
    opt: Option<String>,
    /// Any other config key, as KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Sub {
    fn split(self) -> (Command, Flags) {
        match self {
            Sub::CheckGrad(f) => (Command::CheckGrad, f),
            Sub::Train(f) => (Command::Train, f),
            Sub::Surface(f) => (Command::Surface, f),
            Sub::Gradnorms(f) => (Command::GradNorms, f),
            Sub::Wdist(f) => (Command::Wdist, f),
            Sub::Overfit(f) => (Command::Overfit, f),
            Sub::LmTrain(f) => (Command::LmTrain, f),
            Sub::LmSample(f) => (Command::LmSample, f),
        }
    }
}

fn resolve(command: Command, flags: &Flags) -> Result<RunConfig, LabError> {
    let mut cfg = RunConfig::defaults(command);
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    for pair in &flags.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| LabError::Config { key: pair.clone(), msg: "--set expects KEY=VALUE".into() })?;
        cfg.set(k.trim(), v.trim())?;
    }
    let named = [
        ("seed", &flags.seed),
        ("regime", &flags.regime),
        ("clip", &flags.clip),
        ("lambda", &flags.lambda),
        ("ncritic", &flags.ncritic),
        ("iters", &flags.iters),
        ("opt", &flags.opt),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    if let Some(out) = &flags.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn load_params(cfg: &RunConfig, default_name: &str) -> Result<ParamSet, LabError> {
    let path = cfg.params.clone().unwrap_or_else(|| cfg.out.join(default_name));
    let text = std::fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
    ParamSet::from_text(&text)
        .map_err(|e| LabError::Config { key: "params".into(), msg: format!("{}: {e}", path.display()) })
}

/// What a finished command reports back.
struct Done {
    lines: Vec<String>,
    artifacts: Vec<Artifact>,
    ok: bool,
}

fn execute(cfg: &RunConfig) -> Result<Done, LabError> {
    let done = |lines, artifacts| Done { lines, artifacts, ok: true };
    Ok(match cfg.command {
        Command::CheckGrad => {
            let r = experiments::check_grad(cfg)?;
            Done { ok: r.passed(), lines: r.summary(), artifacts: r.artifacts }
        }
        Command::Train => {
            let r = experiments::train(cfg)?;
            done(r.summary(), r.artifacts)
        }
        Command::Surface => {
            let params = load_params(cfg, "critic.params")?;
            let r = experiments::surface(cfg, &params)?;
            done(vec![format!("{} grid values", r.values.len())], r.artifacts)
        }
        Command::GradNorms => {
            let r = experiments::gradnorms(cfg)?;
            done(r.summary(), r.artifacts)
        }
        Command::Wdist => {
            let r = experiments::wdist(cfg)?;
            done(r.summary(), r.artifacts)
        }
        Command::Overfit => {
            let r = experiments::overfit(cfg)?;
            done(r.summary(), r.artifacts)
        }
        Command::LmTrain => {
            let r = experiments::lm_train(cfg)?;
            done(r.summary(), r.artifacts)
        }
        Command::LmSample => {
            let params = load_params(cfg, "generator.params")?;
            let r = experiments::lm_sample(cfg, &params)?;
            let mut lines = vec![format!("unigram JS {:.5}, bigram JS {:.5}", r.unigram_js, r.bigram_js)];
            lines.extend(r.samples.iter().take(5).cloned());
            done(lines, r.artifacts)
        }
    })
}

fn report(out: &Path, done: &Done) -> Result<(), LabError> {
    let paths = experiments::save(out, &done.artifacts)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for l in &done.lines {
        let _ = writeln!(w, "{l}");
    }
    for p in paths {
        let _ = writeln!(w, "wrote {}", p.display());
    }
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (command, flags) = cli.command.split();
    let result = resolve(command, &flags).and_then(|cfg| {
        let done = execute(&cfg)?;
        report(&cfg.out, &done)?;
        Ok(done.ok)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: some gradient checks exceeded their tolerance");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> (Command, Flags) {
        let mut v = vec!["wgangp"];
        v.extend_from_slice(args);
        Cli::try_parse_from(v).unwrap().command.split()
    }

    #[test]
    fn flags_override_file_and_set() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed=1\niters=5\nregime=clip\n").unwrap();
        let p = path.to_str().unwrap();
        let (c, f) = flags(&["train", "--config", p, "--seed", "2", "--set", "batch=8"]);
        let cfg = resolve(c, &f).unwrap();
        assert_eq!((cfg.seed, cfg.iters, cfg.batch, cfg.regime.as_str()), (2, 5, 8, "clip"));
    }

    #[test]
    fn bad_flag_values_name_the_key() {
        let (c, f) = flags(&["train", "--lambda", "-3"]);
        let e = resolve(c, &f).unwrap_err();
        assert!(e.to_string().contains("lambda"));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["wgangp", "fly"]), 1);
        assert_eq!(run(["wgangp", "train", "--bogus"]), 1);
        assert_eq!(run(["wgangp", "--help"]), 0);
    }
}
