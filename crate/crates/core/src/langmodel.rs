//! Character-level generator and critic on sequences of probability vectors.
//!
//! The generator ends in a per-position softmax and is never sampled: its
//! output, a point of the product of simplices `Δ_V^T`, goes straight into
//! the critic, which reads one-hot real sequences through the same graph.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{NodeRef, Tape};
use crate::data::{CharCorpus, SEQ_LEN};
use crate::error::{invalid, Error, Result};
use crate::nn::{Activation, Conv1d, Linear, Network, ParamNodes, ParamSet};
use crate::rng::Rng64;
use crate::tensor::Tensor;

/// Latent vector → `[m, T, V]` per-position distributions.
///
/// A linear layer produces `channels` features at `T/4` positions, two stages
/// of nearest-neighbour ×2 upsampling each followed by a same-padded
/// convolution bring the length to `T`, and a width-1 convolution maps to `V`
/// logits per position.
#[derive(Clone, Debug, PartialEq)]
pub struct LmGeneratorSpec {
    pub latent: usize,
    pub channels: usize,
    pub kernel: usize,
    pub seq_len: usize,
    pub vocab: usize,
}

impl LmGeneratorSpec {
    pub fn new(vocab: usize) -> Self {
        Self { latent: 128, channels: 16, kernel: 5, seq_len: SEQ_LEN, vocab }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || !self.seq_len.is_multiple_of(4) {
            return Err(invalid(format!("sequence length {} must be a positive multiple of 4", self.seq_len)));
        }
        if self.latent == 0 || self.channels == 0 || self.kernel == 0 || self.vocab < 2 {
            return Err(invalid("generator sizes must be positive and the vocabulary at least 2"));
        }
        Ok(())
    }

    fn input(&self) -> Linear {
        Linear::new("g.in", self.latent, self.seq_len / 4 * self.channels)
    }

    fn stage(&self, i: usize) -> Conv1d {
        Conv1d::same(format!("g.conv{i}"), self.channels, self.channels, self.kernel)
    }

    fn output(&self) -> Conv1d {
        Conv1d::same("g.out", self.channels, self.vocab, 1)
    }
}

/// Nearest-neighbour ×2 upsampling of the last axis of `[m, c, l]`.
fn upsample2(tape: &mut Tape, x: NodeRef) -> Result<NodeRef> {
    let s = tape.shape(x).to_vec();
    let (m, c, l) = (s[0], s[1], s[2]);
    let r = tape.reshape(x, &[m, c, l, 1])?;
    let b = tape.broadcast_to(r, &[m, c, l, 2])?;
    tape.reshape(b, &[m, c, 2 * l])
}

impl Network for LmGeneratorSpec {
    fn init_params(&self, seed: u64) -> Result<ParamSet> {
        self.validate()?;
        let mut rng = Rng64::new(seed);
        let mut p = ParamSet::new();
        let lin = self.input();
        lin.init_into(&mut p, &mut rng, crate::nn::init_bound(Activation::Relu, lin.input, lin.output))?;
        for i in 0..2 {
            self.stage(i).init_into(&mut p, &mut rng, Activation::Relu)?;
        }
        // logits feed a softmax, so the output layer uses the Xavier bound
        self.output().init_into(&mut p, &mut rng, Activation::Tanh)?;
        Ok(p)
    }

    fn forward(&self, tape: &mut Tape, params: &ParamNodes, z: NodeRef) -> Result<NodeRef> {
        self.validate()?;
        let m = tape.shape(z)[0];
        let h = self.input().forward(tape, params, z)?;
        let h = tape.reshape(h, &[m, self.channels, self.seq_len / 4])?;
        let mut h = tape.relu(h);
        for i in 0..2 {
            let u = upsample2(tape, h)?;
            let c = self.stage(i).forward(tape, params, u)?;
            h = tape.relu(c);
        }
        let logits = self.output().forward(tape, params, h)?;
        let per_position = tape.transpose(logits)?;
        tape.softmax(per_position)
    }
}

/// `[m, T, V]` sequences → `[m, 1]` scores: same-padded convolutions with a
/// pointwise nonlinearity, a mean over positions and a linear read-out.
#[derive(Clone, Debug, PartialEq)]
pub struct LmCriticSpec {
    pub vocab: usize,
    pub channels: usize,
    pub kernel: usize,
    pub depth: usize,
    pub activation: Activation,
}

impl LmCriticSpec {
    pub fn new(vocab: usize) -> Self {
        Self { vocab, channels: 16, kernel: 5, depth: 2, activation: Activation::leaky() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.channels == 0 || self.kernel == 0 || self.depth == 0 {
            return Err(invalid("critic sizes must be positive and the vocabulary at least 2"));
        }
        self.activation.validate()
    }

    fn conv(&self, i: usize) -> Conv1d {
        let input = if i == 0 { self.vocab } else { self.channels };
        Conv1d::same(format!("d.conv{i}"), input, self.channels, self.kernel)
    }

    fn head(&self) -> Linear {
        Linear::new("d.out", self.channels, 1)
    }
}

impl Network for LmCriticSpec {
    fn init_params(&self, seed: u64) -> Result<ParamSet> {
        self.validate()?;
        let mut rng = Rng64::new(seed);
        let mut p = ParamSet::new();
        for i in 0..self.depth {
            self.conv(i).init_into(&mut p, &mut rng, self.activation)?;
        }
        let head = self.head();
        head.init_into(&mut p, &mut rng, crate::nn::init_bound(Activation::Tanh, head.input, head.output))?;
        Ok(p)
    }

    fn forward(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<NodeRef> {
        Ok(self.forward_traced(tape, params, x)?.0)
    }

    fn forward_traced(&self, tape: &mut Tape, params: &ParamNodes, x: NodeRef) -> Result<(NodeRef, Vec<NodeRef>)> {
        self.validate()?;
        let s = tape.shape(x).to_vec();
        if s.len() != 3 || s[2] != self.vocab {
            return Err(Error::ShapeMismatch {
                op: "lm_critic",
                detail: format!("input {s:?}, expects [_, T, {}]", self.vocab),
            });
        }
        let mut h = tape.transpose(x)?;
        let mut layers = Vec::with_capacity(self.depth + 2);
        for i in 0..self.depth {
            let c = self.conv(i).forward(tape, params, h)?;
            h = self.activation.apply(tape, c);
            layers.push(h);
        }
        let total = tape.sum_last(h)?;
        let pooled = tape.scale(total, 1.0 / s[1] as f64);
        layers.push(pooled);
        let out = self.head().forward(tape, params, pooled)?;
        layers.push(out);
        Ok((out, layers))
    }
}

/// Character of the largest entry of each row of `[T, V]`; ties go to the
/// lowest index.
pub fn decode_argmax(soft: &Tensor, vocab: &[char]) -> Result<String> {
    if soft.rank() != 2 || soft.shape()[1] != vocab.len() {
        return Err(Error::ShapeMismatch {
            op: "decode_argmax",
            detail: format!("rows {:?} for a vocabulary of {}", soft.shape(), vocab.len()),
        });
    }
    if !soft.is_finite() {
        return Err(Error::NonFiniteInput { what: "decoder input" });
    }
    Ok((0..soft.shape()[0]).map(|t| vocab[argmax(soft.row(t))]).collect())
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Decodes every sequence of a `[m, T, V]` batch.
pub fn decode_batch(soft: &Tensor, vocab: &[char]) -> Result<Vec<String>> {
    if soft.rank() != 3 {
        return Err(invalid("decode_batch expects [m, T, V]"));
    }
    let (t, v) = (soft.shape()[1], soft.shape()[2]);
    (0..soft.shape()[0])
        .map(|i| decode_argmax(&Tensor::from_raw(alloc::vec![t, v], soft.row(i).to_vec()), vocab))
        .collect()
}

/// Mean over examples and positions of the largest probability.
pub fn mean_max_probability(soft: &Tensor) -> f64 {
    let v = *soft.shape().last().unwrap_or(&1);
    let rows = soft.data().chunks(v.max(1));
    let n = rows.len().max(1) as f64;
    rows.map(|r| r.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))).sum::<f64>() / n
}

/// Token stream of a padded sequence: trailing padding collapses to a single
/// pad token marking the end, interior pad characters are kept.
fn tokens(s: &str, pad: char) -> Vec<char> {
    let mut t: Vec<char> = s.trim_end_matches(pad).chars().collect();
    t.push(pad);
    t
}

fn ngram_counts<'a>(strings: impl Iterator<Item = &'a str>, pad: char, n: usize) -> BTreeMap<Vec<char>, f64> {
    let mut counts = BTreeMap::new();
    for s in strings {
        let t = tokens(s, pad);
        for w in t.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Jensen–Shannon divergence (natural log) between two count tables.
pub fn js_divergence<K: Ord + Clone>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> Result<f64> {
    let (sp, sq) = (p.values().sum::<f64>(), q.values().sum::<f64>());
    if !(sp > 0.0 && sq > 0.0) {
        return Err(invalid("n-gram tables must be non-empty"));
    }
    let mut keys: Vec<&K> = p.keys().chain(q.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut js = 0.0;
    for k in keys {
        let a = p.get(k).copied().unwrap_or(0.0) / sp;
        let b = q.get(k).copied().unwrap_or(0.0) / sq;
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * libm::log(a / m);
        }
        if b > 0.0 {
            js += 0.5 * b * libm::log(b / m);
        }
    }
    Ok(js.max(0.0))
}

/// JS divergence between the `n`-gram distributions of `samples` and of the
/// corpus, counting the end of each string as one pad token.
pub fn ngram_divergence(samples: &[String], corpus: &CharCorpus, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n-gram order must be positive"));
    }
    if samples.is_empty() || corpus.is_empty() {
        return Err(invalid("n-gram divergence needs samples and a non-empty corpus"));
    }
    let pad = corpus.pad();
    let texts: Vec<String> = (0..corpus.len()).map(|i| corpus.text(i)).collect();
    let p = ngram_counts(samples.iter().map(String::as_str), pad, n);
    let q = ngram_counts(texts.iter().map(String::as_str), pad, n);
    js_divergence(&p, &q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Grammar, DEFAULT_PAD};
    use crate::gan::interpolate_samples;
    use alloc::string::ToString;
    use alloc::vec;

    fn latent(m: usize, dim: usize, seed: u64) -> Tensor {
        let mut r = Rng64::new(seed);
        Tensor::from_raw(vec![m, dim], (0..m * dim).map(|_| r.normal()).collect())
    }

    fn generate(spec: &LmGeneratorSpec, p: &ParamSet, z: &Tensor) -> Tensor {
        crate::gan::evaluate(spec, p, z).unwrap()
    }

    #[test]
    fn generator_rows_are_distributions() {
        let spec = LmGeneratorSpec::new(4);
        let p = spec.init_params(1).unwrap();
        let z = latent(3, 128, 2);
        let out = generate(&spec, &p, &z);
        assert_eq!(out.shape(), &[3, 32, 4]);
        for row in out.data().chunks(4) {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(out, generate(&spec, &p, &z));
    }

    #[test]
    fn zero_generator_is_uniform() {
        let spec = LmGeneratorSpec::new(5);
        let p = spec.init_params(0).unwrap();
        let zero = p.with_flat(&vec![0.0; p.num_scalars()]).unwrap();
        let out = generate(&spec, &zero, &latent(2, 128, 0));
        assert!(out.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn upsampling_repeats_positions() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_raw(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let u = upsample2(&mut tape, x).unwrap();
        assert_eq!(tape.value(u).unwrap().data(), &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn critic_reads_hard_and_soft_inputs_alike() {
        let corpus = CharCorpus::synthesize(&Grammar::default_grammar(), 4, 3, DEFAULT_PAD).unwrap();
        let real = corpus.encode_onehot().unwrap();
        let gen = LmGeneratorSpec::new(corpus.vocab_size());
        let fake = generate(&gen, &gen.init_params(5).unwrap(), &latent(4, 128, 1));
        let critic = LmCriticSpec::new(corpus.vocab_size());
        let cp = critic.init_params(2).unwrap();
        // a batch mixing both kinds scores each example as it would alone
        let both = Tensor::stack_rows(&[real.clone(), fake.clone()]).unwrap();
        let d = crate::gan::evaluate(&critic, &cp, &both).unwrap();
        let dr = crate::gan::evaluate(&critic, &cp, &real).unwrap();
        let df = crate::gan::evaluate(&critic, &cp, &fake).unwrap();
        assert_eq!(&d.data()[..4], dr.data());
        assert_eq!(&d.data()[4..], df.data());
        assert_eq!(d.shape(), &[8, 1]);

        let mut tape = Tape::new();
        let p = cp.bind_constant(&mut tape);
        let x = tape.constant(both);
        let (_, layers) = critic.forward_traced(&mut tape, &p, x).unwrap();
        assert_eq!(layers.len(), critic.depth + 2);
    }

    #[test]
    fn interpolates_stay_on_the_simplex() {
        let real = Tensor::from_raw(vec![1, 1, 2], vec![1.0, 0.0]);
        let fake = Tensor::from_raw(vec![1, 1, 2], vec![0.5, 0.5]);
        assert_eq!(interpolate_samples(&real, &fake, &[0.5]).unwrap().data(), &[0.75, 0.25]);
        assert_eq!(interpolate_samples(&real, &fake, &[1.0]).unwrap(), real);

        let corpus = CharCorpus::synthesize(&Grammar::default_grammar(), 6, 8, DEFAULT_PAD).unwrap();
        let real = corpus.encode_onehot().unwrap();
        let gen = LmGeneratorSpec::new(3);
        let fake = generate(&gen, &gen.init_params(0).unwrap(), &latent(6, 128, 3));
        let mut r = Rng64::new(0);
        let eps: Vec<f64> = (0..6).map(|_| r.uniform()).collect();
        let h = interpolate_samples(&real, &fake, &eps).unwrap();
        for row in h.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn argmax_decoding() {
        let v = ['a', 'b', 'c'];
        let t = |d: Vec<f64>| Tensor::from_raw(vec![d.len() / 3, 3], d);
        assert_eq!(decode_argmax(&t(vec![0.2, 0.5, 0.3]), &v).unwrap(), "b");
        assert_eq!(decode_argmax(&t(vec![0.5, 0.5, 0.0]), &v).unwrap(), "a");
        let c = CharCorpus::with_alphabet(&['a', 'b'], '_').unwrap();
        let hard = c.onehot("abba_a").unwrap();
        assert_eq!(decode_argmax(&hard, c.vocab()).unwrap(), "abba_a");
        assert!(decode_argmax(&t(vec![f64::NAN, 0.0, 0.0]), &v).is_err());
        assert!(decode_argmax(&hard, &v[..2]).is_err());
    }

    #[test]
    fn divergence_examples() {
        let c = CharCorpus::from_lines("ab\nba\n", '_').unwrap();
        let same = vec!["ab".to_string(), "ba".to_string()];
        assert_eq!(ngram_divergence(&same, &c, 1).unwrap(), 0.0);
        assert_eq!(ngram_divergence(&same, &c, 2).unwrap(), 0.0);
        // padding is not content: a padded sample equals its trimmed text
        let padded = vec!["ab______".to_string(), "ba".to_string()];
        assert_eq!(ngram_divergence(&padded, &c, 2).unwrap(), 0.0);

        let xy = CharCorpus::from_lines("xy\n", '_').unwrap();
        // bigram supports are disjoint
        let bigram = ngram_divergence(&same, &xy, 2).unwrap();
        assert!((bigram - core::f64::consts::LN_2).abs() < 1e-15);
        // unigrams {a, b, _} vs {x, y, _} at 1/3 each share only the end token
        let shared_end = 2.0 / 3.0 * core::f64::consts::LN_2;
        let cd = CharCorpus::from_lines("cd\n", '_').unwrap();
        assert!((ngram_divergence(&["ab".to_string()], &cd, 1).unwrap() - shared_end).abs() < 1e-15);

        // hand-built case: samples {"aa"} vs corpus {"ab"} bigrams
        // P = {aa: 1/2, a_: 1/2}, Q = {ab: 1/2, b_: 1/2}: disjoint → ln 2
        let ab = CharCorpus::from_lines("ab\n", '_').unwrap();
        let aa = vec!["aa".to_string()];
        assert!((ngram_divergence(&aa, &ab, 2).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        // unigrams P = {a: 2/3, _: 1/3}, Q = {a: 1/3, b: 1/3, _: 1/3}
        let (pa, qa, qb): (f64, f64, f64) = (2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
        let ma = 0.5 * (pa + qa);
        let mb = 0.5 * qb;
        let hand = 0.5 * pa * (pa / ma).ln() + 0.5 * qa * (qa / ma).ln() + 0.5 * qb * (qb / mb).ln();
        assert!((ngram_divergence(&aa, &ab, 1).unwrap() - hand).abs() < 1e-15);

        assert!(ngram_divergence(&[], &ab, 1).is_err());
        assert!(ngram_divergence(&aa, &ab, 0).is_err());
    }

    #[test]
    fn max_probability() {
        let t = Tensor::from_raw(vec![1, 2, 2], vec![0.5, 0.5, 0.9, 0.1]);
        assert!((mean_max_probability(&t) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs() {
        assert!(LmGeneratorSpec { seq_len: 30, ..LmGeneratorSpec::new(3) }.init_params(0).is_err());
        assert!(LmGeneratorSpec::new(1).init_params(0).is_err());
        assert!(LmCriticSpec { depth: 0, ..LmCriticSpec::new(3) }.init_params(0).is_err());
        let critic = LmCriticSpec::new(3);
        let p = critic.init_params(0).unwrap();
        assert!(crate::gan::evaluate(&critic, &p, &Tensor::zeros(&[1, 32, 4])).is_err());
    }
}
