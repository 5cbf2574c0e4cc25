//! Invariants checked through the public API only.

use proptest::prelude::*;
use wgangp_core::data::{CharCorpus, Grammar, ToyDistribution};
use wgangp_core::gan::{gradient_penalty, LinearCritic, Sidedness};
use wgangp_core::rng::Rng64;
use wgangp_core::{Tape, Tensor};

const LAMBDA: f64 = 10.0;

fn points(dim: usize, seed: u64) -> Tensor {
    let mut rng = Rng64::new(seed);
    Tensor::new(vec![6, dim], (0..6 * dim).map(|_| rng.normal()).collect()).unwrap()
}

/// Penalty value and its gradient w.r.t. the weights of a linear critic.
fn linear_penalty(w: &[f64], sidedness: Sidedness) -> (f64, Vec<f64>) {
    let critic = LinearCritic { input: w.len() };
    let params = LinearCritic::params(w, 0.3);
    let mut tape = Tape::new();
    let p = params.bind(&mut tape);
    let x = tape.constant(points(w.len(), 5));
    let pen = gradient_penalty(&mut tape, &critic, &p, x, LAMBDA, sidedness).unwrap();
    let value = tape.scalar(pen.value).unwrap();
    let wnode = p.get("lin.w").unwrap();
    let g = tape.grad(pen.value, &[wnode]).unwrap()[0];
    (value, tape.value(g).unwrap().data().to_vec())
}

fn stabilized_norm(w: &[f64]) -> f64 {
    (w.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // a linear critic has the same input gradient everywhere, so the penalty
    // and its weight gradient have closed forms
    #[test]
    fn two_sided_penalty_of_linear_critic_has_closed_form(w in prop::collection::vec(-3.0f64..3.0, 1..6)) {
        let n = stabilized_norm(&w);
        let (value, grad) = linear_penalty(&w, Sidedness::TwoSided);
        prop_assert!((value - LAMBDA * (n - 1.0).powi(2)).abs() < 1e-10 * (1.0 + value));
        for (g, wi) in grad.iter().zip(&w) {
            let expect = 2.0 * LAMBDA * (n - 1.0) * wi / n;
            prop_assert!((g - expect).abs() < 1e-9 * (1.0 + expect.abs()), "{g} vs {expect}");
        }
    }

    #[test]
    fn one_sided_penalty_ignores_short_gradients(w in prop::collection::vec(-3.0f64..3.0, 1..6)) {
        let n = stabilized_norm(&w);
        let (value, grad) = linear_penalty(&w, Sidedness::OneSided);
        if n < 1.0 {
            prop_assert_eq!(value, 0.0);
            prop_assert!(grad.iter().all(|g| *g == 0.0));
        } else {
            prop_assert!((value - LAMBDA * (n - 1.0).powi(2)).abs() < 1e-10 * (1.0 + value));
        }
    }

    #[test]
    fn toy_draws_depend_only_on_their_index(seed in any::<u64>(), n in 1usize..20, m in 1usize..20) {
        let dist = ToyDistribution::eight_gaussians();
        let whole = dist.sample_range(seed, 0, n + m);
        let head = dist.sample_range(seed, 0, n);
        let tail = dist.sample_range(seed, n as u64, m);
        prop_assert_eq!(&whole.data()[..head.len()], head.data());
        prop_assert_eq!(&whole.data()[head.len()..], tail.data());
    }

    #[test]
    fn grammar_sentences_survive_encoding(seed in any::<u64>()) {
        let grammar = Grammar::default_grammar();
        let corpus = CharCorpus::synthesize(&grammar, 4, seed, '_').unwrap();
        for i in 0..corpus.len() {
            let text = corpus.text(i);
            let encoded = corpus.encode(&text).unwrap();
            prop_assert_eq!(&encoded, &corpus.sequences()[i]);
            let decoded = corpus.decode(&encoded).unwrap();
            prop_assert_eq!(decoded.trim_end_matches('_'), text.as_str());
        }
    }
}

// d/dx Σ (3x²)² = 36x³, computed by differentiating a gradient
#[test]
fn gradient_of_squared_gradient_norm() {
    let xs = [-1.5, 0.25, 2.0];
    let mut tape = Tape::new();
    let x = tape.leaf("x", Tensor::vector(xs.to_vec()));
    let cube = tape.pow(x, 3.0);
    let f = tape.sum(cube);
    let g = tape.grad(f, &[x]).unwrap()[0];
    let g2 = tape.mul(g, g).unwrap();
    let h = tape.sum(g2);
    let dh = tape.grad(h, &[x]).unwrap()[0];
    for (v, x) in tape.value(dh).unwrap().data().iter().zip(xs) {
        assert!((v - 36.0 * x * x * x).abs() < 1e-12);
    }
}
