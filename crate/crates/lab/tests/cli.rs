//! Runs the `wgangp` binary the way a user would.

use std::path::Path;
use std::process::{Command, Output};

fn wgangp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wgangp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn every_file_opens_with_a_comment(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv" || e == "txt") {
            let text = read(&path);
            assert!(text.starts_with("# wgangp "), "{} has no provenance comment", path.display());
        }
    }
}

#[test]
fn check_grad_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = wgangp(&["check-grad", "--seed", "0", "--out", out.to_str().unwrap(), "--set", "check_seeds=2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(read(&out.join("gradcheck.csv")).contains("gp_critic_loss"));
    every_file_opens_with_a_comment(&out);
}

#[test]
fn missing_config_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.cfg");
    let o = wgangp(&["train", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("missing.cfg"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_named() {
    let o = wgangp(&["train", "--set", "lamda=3"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));
}

#[test]
fn bad_value_in_config_file_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# a comment\nncritic = five\n").unwrap();
    let o = wgangp(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("ncritic"), "{}", stderr(&o));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&wgangp(&[])), 1);
    assert_eq!(code(&wgangp(&["fly"])), 1);
    assert_eq!(code(&wgangp(&["train", "--iters", "many"])), 1);
    assert_eq!(code(&wgangp(&["--help"])), 0);
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = wgangp(&["train", "--out", out.to_str().unwrap(), "--iters", "20", "--set", "lr=1e100"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_metrics_then_surface() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = wgangp(&["train", "--seed", "7", "--iters", "30", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["metrics.csv", "samples.csv", "critic.params", "generator.params"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }
    let metrics = read(&a.join("metrics.csv"));
    assert!(metrics.lines().next().unwrap().contains("seed=7"));
    assert_eq!(metrics.lines().nth(1).unwrap(), "iter,critic_loss,gen_loss,w_estimate,gp_mean_norm,gp_msd,seconds");

    let o = wgangp(&["surface", "--out", a.to_str().unwrap(), "--set", "grid_n=8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let surface = read(&a.join("surface.csv"));
    assert_eq!(surface.lines().skip(2).count(), 64);
    every_file_opens_with_a_comment(&a);
}

#[test]
fn language_model_trains_then_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lm");
    let o = wgangp(&[
        "lm-train",
        "--iters",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "corpus_size=50",
        "--set",
        "samples=20",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = wgangp(&["lm-sample", "--out", out.to_str().unwrap(), "--set", "corpus_size=50", "--set", "samples=20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let samples = read(&out.join("samples.txt"));
    assert_eq!(samples.lines().skip(1).count(), 20);
    every_file_opens_with_a_comment(&out);
}
