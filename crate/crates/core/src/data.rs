//! Deterministic samplers: 2D toy distributions, latent noise, frozen
//! train/validation splits and character corpora.
//!
//! Every sampler is a pure function of `(seed, draw index)`: draw `i` uses
//! its own ChaCha stream, so a sampler that has handed out `k` examples will
//! produce examples `k, k+1, ...` next regardless of batch boundaries.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::rng::Rng64;
use crate::tensor::Tensor;

/// Fixed sequence length of character corpora.
pub const SEQ_LEN: usize = 32;
pub const DEFAULT_PAD: char = '_';
pub const DEFAULT_GRAMMAR: &str = "S -> ab S | ba S | abb S | ε";

/// Source of example batches; the leading axis of the result is the batch.
pub trait Sampler {
    fn sample(&mut self, n: usize) -> Tensor;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ToyDistribution {
    /// Spiral `(t cos t, t sin t)` for `t ∈ [1.5π, 4.5π]`, scaled into `[-2, 2]²`.
    SwissRoll {
        noise: f64,
    },
    EightGaussians {
        radius: f64,
        std: f64,
    },
    /// 5×5 grid of modes centred on the origin.
    TwentyFiveGaussians {
        spacing: f64,
        std: f64,
    },
    Gaussian1d {
        mean: f64,
        std: f64,
    },
    /// `a` or `b` with probability one half each.
    PointPair {
        a: [f64; 2],
        b: [f64; 2],
    },
}

/// Divides the raw spiral so its outermost point has radius 2.
pub const SWISS_ROLL_SCALE: f64 = 4.5 * PI / 2.0;

impl ToyDistribution {
    pub fn swiss_roll() -> Self {
        ToyDistribution::SwissRoll { noise: 0.02 }
    }

    pub fn eight_gaussians() -> Self {
        ToyDistribution::EightGaussians { radius: 2.0, std: 0.05 }
    }

    pub fn twenty_five_gaussians() -> Self {
        ToyDistribution::TwentyFiveGaussians { spacing: 1.0, std: 0.05 }
    }

    pub fn gaussian_1d(mean: f64, std: f64) -> Self {
        ToyDistribution::Gaussian1d { mean, std }
    }

    pub fn dim(&self) -> usize {
        match self {
            ToyDistribution::Gaussian1d { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let std = match *self {
            ToyDistribution::SwissRoll { noise } => noise,
            ToyDistribution::EightGaussians { radius, std } => {
                if !radius.is_finite() {
                    return Err(invalid("eight_gaussians radius must be finite"));
                }
                std
            }
            ToyDistribution::TwentyFiveGaussians { spacing, std } => {
                if !spacing.is_finite() {
                    return Err(invalid("twenty_five_gaussians spacing must be finite"));
                }
                std
            }
            ToyDistribution::Gaussian1d { mean, std } => {
                if !mean.is_finite() {
                    return Err(invalid("gaussian mean must be finite"));
                }
                std
            }
            ToyDistribution::PointPair { a, b } => {
                if a.iter().chain(&b).any(|v| !v.is_finite()) {
                    return Err(invalid("point_pair endpoints must be finite"));
                }
                0.0
            }
        };
        if !(std >= 0.0) || !std.is_finite() {
            return Err(invalid(format!("standard deviation {std} must be finite and non-negative")));
        }
        Ok(())
    }

    /// The point drawn with stream `index` of `seed`.
    pub fn draw(&self, seed: u64, index: u64, out: &mut Vec<f64>) {
        let mut rng = Rng64::for_draw(seed, index);
        match *self {
            ToyDistribution::SwissRoll { noise } => {
                let t = rng.uniform_in(1.5 * PI, 4.5 * PI);
                let (s, c) = libm::sincos(t);
                out.push(t * c / SWISS_ROLL_SCALE + noise * rng.normal());
                out.push(t * s / SWISS_ROLL_SCALE + noise * rng.normal());
            }
            ToyDistribution::EightGaussians { radius, std } => {
                let k = rng.index(8) as f64;
                let (s, c) = libm::sincos(2.0 * PI * k / 8.0);
                out.push(radius * c + std * rng.normal());
                out.push(radius * s + std * rng.normal());
            }
            ToyDistribution::TwentyFiveGaussians { spacing, std } => {
                let i = rng.index(5) as f64 - 2.0;
                let j = rng.index(5) as f64 - 2.0;
                out.push(spacing * i + std * rng.normal());
                out.push(spacing * j + std * rng.normal());
            }
            ToyDistribution::Gaussian1d { mean, std } => out.push(mean + std * rng.normal()),
            ToyDistribution::PointPair { a, b } => {
                let p = if rng.uniform() < 0.5 { a } else { b };
                out.extend_from_slice(&p);
            }
        }
    }

    /// Draws with indices `start..start + n` as an `[n, dim]` tensor.
    pub fn sample_range(&self, seed: u64, start: u64, n: usize) -> Tensor {
        let mut data = Vec::with_capacity(n * self.dim());
        for i in 0..n as u64 {
            self.draw(seed, start + i, &mut data);
        }
        Tensor::from_raw(vec![n, self.dim()], data)
    }
}

/// Stateful cursor over a [`ToyDistribution`].
#[derive(Clone, Debug)]
pub struct ToySampler {
    pub dist: ToyDistribution,
    seed: u64,
    next: u64,
}

impl ToySampler {
    pub fn new(dist: ToyDistribution, seed: u64) -> Result<Self> {
        dist.validate()?;
        Ok(Self { dist, seed, next: 0 })
    }

    pub fn drawn(&self) -> u64 {
        self.next
    }
}

impl Sampler for ToySampler {
    fn sample(&mut self, n: usize) -> Tensor {
        let t = self.dist.sample_range(self.seed, self.next, n);
        self.next += n as u64;
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentKind {
    /// Uniform on `[-1, 1]` per coordinate.
    Uniform,
    /// Standard normal per coordinate.
    Gaussian,
}

#[derive(Clone, Debug)]
pub struct LatentSampler {
    pub dim: usize,
    pub kind: LatentKind,
    seed: u64,
    next: u64,
}

impl LatentSampler {
    pub fn new(dim: usize, kind: LatentKind, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("latent dimension must be positive"));
        }
        Ok(Self { dim, kind, seed, next: 0 })
    }
}

impl Sampler for LatentSampler {
    fn sample(&mut self, n: usize) -> Tensor {
        let mut data = Vec::with_capacity(n * self.dim);
        for i in 0..n as u64 {
            let mut rng = Rng64::for_draw(self.seed, self.next + i);
            for _ in 0..self.dim {
                data.push(match self.kind {
                    LatentKind::Uniform => rng.uniform_in(-1.0, 1.0),
                    LatentKind::Gaussian => rng.normal(),
                });
            }
        }
        self.next += n as u64;
        Tensor::from_raw(vec![n, self.dim], data)
    }
}

/// Uniform resampling, with replacement, of the rows of a frozen set.
#[derive(Clone, Debug)]
pub struct FixedSetSampler {
    data: Tensor,
    seed: u64,
    next: u64,
}

impl FixedSetSampler {
    pub fn new(data: Tensor, seed: u64) -> Result<Self> {
        if data.rank() == 0 || data.shape()[0] == 0 {
            return Err(invalid("fixed set must contain at least one example"));
        }
        Ok(Self { data, seed, next: 0 })
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }
}

impl Sampler for FixedSetSampler {
    fn sample(&mut self, n: usize) -> Tensor {
        let rows = self.data.shape()[0];
        let idx: Vec<usize> = (0..n as u64).map(|i| Rng64::for_draw(self.seed, self.next + i).index(rows)).collect();
        self.next += n as u64;
        self.data.gather_rows(&idx)
    }
}

/// Frozen training subset and a disjoint validation draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: usize,
    pub validation: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// Training examples use draw indices `0..train`, validation examples
    /// `train..train + validation`.
    pub fn split(&self, dist: &ToyDistribution) -> Result<(Tensor, Tensor)> {
        dist.validate()?;
        if self.train == 0 || self.validation == 0 {
            return Err(invalid("split sizes must be positive"));
        }
        Ok((
            dist.sample_range(self.seed, 0, self.train),
            dist.sample_range(self.seed, self.train as u64, self.validation),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Production {
    pub terminals: String,
    pub next: Option<String>,
}

/// Right-linear grammar: every production is a terminal string optionally
/// followed by one nonterminal.
///
/// Text form, one nonterminal per line, the first one being the start symbol:
///
/// ```text
/// S -> ab S | ba S | abb S | ε
/// ```
///
/// Tokens that name a defined nonterminal must come last in an alternative;
/// every other token is terminal text. `ε` (or an empty alternative) is the
/// empty production.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<(String, Vec<Production>)>,
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Grammar> {
        let mut raw = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lhs, rhs) =
                line.split_once("->").ok_or_else(|| Error::Parse { line: n + 1, msg: "expected `->`".into() })?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                return Err(Error::Parse { line: n + 1, msg: "bad nonterminal".into() });
            }
            raw.push((n + 1, lhs.to_string(), rhs.to_string()));
        }
        if raw.is_empty() {
            return Err(invalid("empty grammar"));
        }
        let names: BTreeSet<String> = raw.iter().map(|(_, l, _)| l.clone()).collect();
        let mut rules: Vec<(String, Vec<Production>)> = Vec::new();
        for (line, lhs, rhs) in raw {
            let mut prods = Vec::new();
            for alt in rhs.split('|') {
                let tokens: Vec<&str> = alt.split_whitespace().filter(|t| *t != "ε").collect();
                let mut terminals = String::new();
                let mut next = None;
                for (k, tok) in tokens.iter().enumerate() {
                    if names.contains(*tok) {
                        if k + 1 != tokens.len() {
                            return Err(Error::Parse {
                                line,
                                msg: format!("nonterminal `{tok}` must end its alternative"),
                            });
                        }
                        next = Some(tok.to_string());
                    } else {
                        terminals.push_str(tok);
                    }
                }
                prods.push(Production { terminals, next });
            }
            match rules.iter_mut().find(|(l, _)| *l == lhs) {
                Some((_, p)) => p.extend(prods),
                None => rules.push((lhs, prods)),
            }
        }
        let g = Grammar { rules };
        if !g.productive().contains(g.start()) {
            return Err(invalid("grammar cannot derive any finite string"));
        }
        Ok(g)
    }

    pub fn default_grammar() -> Grammar {
        Grammar::parse(DEFAULT_GRAMMAR).expect("built-in grammar parses")
    }

    pub fn start(&self) -> &str {
        &self.rules[0].0
    }

    /// Sorted terminal characters.
    pub fn alphabet(&self) -> Vec<char> {
        let set: BTreeSet<char> =
            self.rules.iter().flat_map(|(_, ps)| ps.iter().flat_map(|p| p.terminals.chars())).collect();
        set.into_iter().collect()
    }

    fn productions(&self, name: &str) -> &[Production] {
        self.rules.iter().find(|(l, _)| l == name).map(|(_, p)| p.as_slice()).unwrap_or(&[])
    }

    /// Nonterminals that can derive a finite terminal string.
    fn productive(&self) -> BTreeSet<String> {
        let mut done = BTreeSet::new();
        loop {
            let before = done.len();
            for (l, ps) in &self.rules {
                if ps.iter().any(|p| p.next.as_ref().is_none_or(|n| done.contains(n))) {
                    done.insert(l.clone());
                }
            }
            if done.len() == before {
                return done;
            }
        }
    }

    /// Random derivation, choosing uniformly among alternatives, of at most
    /// `max_len` characters. Longer derivations are rejected and redrawn, so
    /// the result is always in the language.
    pub fn generate(&self, rng: &mut Rng64, max_len: usize) -> Result<String> {
        const ATTEMPTS: usize = 10_000;
        'attempt: for _ in 0..ATTEMPTS {
            let mut out = String::new();
            let mut current = self.start();
            loop {
                let ps = self.productions(current);
                let p = &ps[rng.index(ps.len())];
                out.push_str(&p.terminals);
                if out.chars().count() > max_len {
                    continue 'attempt;
                }
                match &p.next {
                    Some(n) => current = n,
                    None => return Ok(out),
                }
            }
        }
        Err(invalid(format!("no derivation of at most {max_len} characters after {ATTEMPTS} attempts")))
    }
}

/// Fixed-length character sequences over an ordered vocabulary whose last
/// symbol is the pad character.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharCorpus {
    vocab: Vec<char>,
    seq_len: usize,
    sequences: Vec<Vec<usize>>,
}

impl CharCorpus {
    /// Empty corpus over `alphabet ∪ {pad}`.
    pub fn with_alphabet(alphabet: &[char], pad: char) -> Result<Self> {
        let set: BTreeSet<char> = alphabet.iter().copied().collect();
        if set.contains(&pad) {
            return Err(invalid(format!("pad character `{pad}` is part of the alphabet")));
        }
        let mut vocab: Vec<char> = set.into_iter().collect();
        vocab.push(pad);
        Ok(Self { vocab, seq_len: SEQ_LEN, sequences: Vec::new() })
    }

    /// One sequence per non-blank line, truncated to 32 characters.
    pub fn from_lines(text: &str, pad: char) -> Result<Self> {
        let lines: Vec<String> =
            text.lines().filter(|l| !l.trim().is_empty()).map(|l| l.chars().take(SEQ_LEN).collect()).collect();
        let alphabet: BTreeSet<char> = lines.iter().flat_map(|l| l.chars()).collect();
        let alphabet: Vec<char> = alphabet.into_iter().collect();
        let mut corpus = Self::with_alphabet(&alphabet, pad)?;
        for l in &lines {
            corpus.push(l)?;
        }
        Ok(corpus)
    }

    pub fn synthesize(grammar: &Grammar, count: usize, seed: u64, pad: char) -> Result<Self> {
        let mut corpus = Self::with_alphabet(&grammar.alphabet(), pad)?;
        for i in 0..count as u64 {
            let s = grammar.generate(&mut Rng64::for_draw(seed, i), SEQ_LEN)?;
            corpus.push(&s)?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, s: &str) -> Result<()> {
        let seq = self.encode(s)?;
        self.sequences.push(seq);
        Ok(())
    }

    pub fn vocab(&self) -> &[char] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn pad(&self) -> char {
        self.vocab[self.vocab.len() - 1]
    }

    pub fn pad_index(&self) -> usize {
        self.vocab.len() - 1
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn sequences(&self) -> &[Vec<usize>] {
        &self.sequences
    }

    pub fn index_of(&self, c: char) -> Result<usize> {
        self.vocab.iter().position(|&v| v == c).ok_or_else(|| invalid(format!("character `{c}` not in vocabulary")))
    }

    /// Indices of `s`, truncated or padded to the sequence length.
    pub fn encode(&self, s: &str) -> Result<Vec<usize>> {
        let mut seq: Vec<usize> = s.chars().take(self.seq_len).map(|c| self.index_of(c)).collect::<Result<_>>()?;
        seq.resize(self.seq_len, self.pad_index());
        Ok(seq)
    }

    pub fn decode(&self, seq: &[usize]) -> Result<String> {
        seq.iter()
            .map(|&i| self.vocab.get(i).copied().ok_or_else(|| invalid(format!("index {i} outside vocabulary"))))
            .collect()
    }

    /// Unpadded sequence `i` as text.
    pub fn text(&self, i: usize) -> String {
        let s: String = self.sequences[i].iter().map(|&k| self.vocab[k]).collect();
        s.trim_end_matches(self.pad()).to_string()
    }

    /// `[len(s), V]` one-hot rows of `s` without padding.
    pub fn onehot(&self, s: &str) -> Result<Tensor> {
        let v = self.vocab.len();
        let chars: Vec<char> = s.chars().collect();
        let mut data = vec![0.0; chars.len() * v];
        for (p, c) in chars.iter().enumerate() {
            data[p * v + self.index_of(*c)?] = 1.0;
        }
        Ok(Tensor::from_raw(vec![chars.len(), v], data))
    }

    /// `[n, T, V]` one-hot encoding of every sequence.
    pub fn encode_onehot(&self) -> Result<Tensor> {
        let (t, v) = (self.seq_len, self.vocab.len());
        let mut data = vec![0.0; self.sequences.len() * t * v];
        for (n, seq) in self.sequences.iter().enumerate() {
            for (p, &k) in seq.iter().enumerate() {
                if k >= v {
                    return Err(invalid(format!("index {k} outside vocabulary")));
                }
                data[(n * t + p) * v + k] = 1.0;
            }
        }
        Ok(Tensor::from_raw(vec![self.sequences.len(), t, v], data))
    }
}
