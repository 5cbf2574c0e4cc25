//! Critic instruments: value surfaces, per-layer gradient norms, weight
//! histograms and train/validation loss tracking.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{NodeRef, Tape};
use crate::error::{invalid, Result};
use crate::gan::evaluate;
use crate::nn::{Network, ParamSet};
use crate::tensor::Tensor;

pub use crate::gan::penalty_norm_stats;

/// Regular 2D evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Self { x: (lo, hi), y: (lo, hi), nx: n, ny: n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(invalid("grid needs at least 2 points per axis"));
        }
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.x) || !ok(self.y) {
            return Err(invalid("grid ranges must be finite and non-degenerate"));
        }
        Ok(())
    }

    /// Grid points as `[ny * nx, 2]`, x varying fastest.
    pub fn points(&self) -> Result<Tensor> {
        self.validate()?;
        let mut data = Vec::with_capacity(self.nx * self.ny * 2);
        for j in 0..self.ny {
            let y = self.y.0 + (self.y.1 - self.y.0) * j as f64 / (self.ny - 1) as f64;
            for i in 0..self.nx {
                data.push(self.x.0 + (self.x.1 - self.x.0) * i as f64 / (self.nx - 1) as f64);
                data.push(y);
            }
        }
        Tensor::new(vec![self.nx * self.ny, 2], data)
    }
}

/// `(x, y, D(x, y))` for every grid point in [`GridSpec::points`] order.
pub fn value_surface(critic: &dyn Network, params: &ParamSet, grid: &GridSpec) -> Result<Vec<[f64; 3]>> {
    let pts = grid.points()?;
    let d = evaluate(critic, params, &pts)?;
    if d.len() != pts.shape()[0] {
        return Err(invalid(format!("critic produced {} values for {} points", d.len(), pts.shape()[0])));
    }
    Ok((0..d.len()).map(|k| [pts.row(k)[0], pts.row(k)[1], d.data()[k]]).collect())
}

/// Euclidean norm of `∂loss/∂n` for each node in `nodes`.
pub fn gradient_norms_at(tape: &mut Tape, loss: NodeRef, nodes: &[NodeRef]) -> Result<Vec<f64>> {
    let grads = tape.grad(loss, nodes)?;
    grads.iter().map(|&g| Ok(libm::sqrt(tape.value(g)?.data().iter().map(|v| v * v).sum::<f64>()))).collect()
}

/// `‖∂L/∂a_l‖` for every layer output `a_l` of the critic on `batch`, input
/// side first. `loss` maps the critic output node to the scalar `L`.
pub fn layer_gradient_norms(
    critic: &dyn Network,
    params: &ParamSet,
    batch: &Tensor,
    loss: &dyn Fn(&mut Tape, NodeRef) -> Result<NodeRef>,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let p = params.bind_constant(&mut tape);
    let x = tape.constant(batch.clone());
    let (out, layers) = critic.forward_traced(&mut tape, &p, x)?;
    let l = loss(&mut tape, out)?;
    gradient_norms_at(&mut tape, l, &layers)
}

/// Per-layer norms for the unpenalised critic loss `mean D(x̃) - mean D(x)`,
/// evaluated on `concat(real, fake)`.
pub fn wasserstein_layer_norms(
    critic: &dyn Network,
    params: &ParamSet,
    real: &Tensor,
    fake: &Tensor,
) -> Result<Vec<f64>> {
    let m = real.shape().first().copied().unwrap_or(0);
    let n = fake.shape().first().copied().unwrap_or(0);
    let batch = Tensor::stack_rows(&[real.clone(), fake.clone()])?;
    layer_gradient_norms(critic, params, &batch, &|t: &mut Tape, d: NodeRef| {
        let dr = t.slice(d, 0, 0, m)?;
        let df = t.slice(d, 0, m, n)?;
        let mr = t.mean(dr);
        let mf = t.mean(df);
        t.sub(mf, mr)
    })
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// `bins` equal-width bins over `[lo, hi]`; values outside fall into the
    /// edge bins.
    pub fn new(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins < 2 {
            return Err(invalid("a histogram needs at least 2 bins"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!("histogram range [{lo}, {hi}] is empty")));
        }
        let edges = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
        Ok(Self { edges, counts: vec![0; bins] })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, v: f64) {
        let (lo, hi) = (self.edges[0], self.edges[self.bins()]);
        let k = libm::floor((v - lo) / (hi - lo) * self.bins() as f64);
        let k = if k.is_nan() { 0 } else { k.max(0.0).min((self.bins() - 1) as f64) as usize };
        self.counts[k] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of samples in the first and last bin.
    pub fn edge_fraction(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        (self.counts[0] + self.counts[self.bins() - 1]) as f64 / t as f64
    }
}

/// Histogram of every entry of every tensor in `params`.
pub fn weight_histogram(params: &ParamSet, bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    let mut h = Histogram::new(bins, lo, hi)?;
    for v in params.values() {
        h.add(v);
    }
    Ok(h)
}

/// Negative critic losses on the training and validation sets against a
/// shared fake batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    pub iteration: usize,
    /// `mean D(x_train) - mean D(x̃)`.
    pub train: f64,
    /// `mean D(x_val) - mean D(x̃)`.
    pub validation: f64,
}

impl TrackPoint {
    /// Validation loss minus training loss, equal to `train - validation` in
    /// negative-loss terms; grows as the critic overfits.
    pub fn gap(&self) -> f64 {
        self.train - self.validation
    }
}

pub const TRACK_EVERY: usize = 10;

#[derive(Clone, Debug)]
pub struct TrainValTracker {
    train: Tensor,
    validation: Tensor,
    pub every: usize,
    points: Vec<TrackPoint>,
}

impl TrainValTracker {
    pub fn new(train: Tensor, validation: Tensor, every: usize) -> Result<Self> {
        if every == 0 {
            return Err(invalid("tracking cadence must be positive"));
        }
        if train.rank() == 0 || validation.rank() == 0 || train.shape()[1..] != validation.shape()[1..] {
            return Err(invalid("training and validation sets must share an example shape"));
        }
        Ok(Self { train, validation, every, points: Vec::new() })
    }

    pub fn due(&self, iteration: usize) -> bool {
        iteration.is_multiple_of(self.every)
    }

    pub fn evaluate(
        &self,
        iteration: usize,
        critic: &dyn Network,
        params: &ParamSet,
        fake: &Tensor,
    ) -> Result<TrackPoint> {
        let df = evaluate(critic, params, fake)?.mean();
        Ok(TrackPoint {
            iteration,
            train: evaluate(critic, params, &self.train)?.mean() - df,
            validation: evaluate(critic, params, &self.validation)?.mean() - df,
        })
    }

    /// Records a point if `iteration` is on the cadence.
    pub fn observe(&mut self, iteration: usize, critic: &dyn Network, params: &ParamSet, fake: &Tensor) -> Result<()> {
        if self.due(iteration) {
            let p = self.evaluate(iteration, critic, params, fake)?;
            self.points.push(p);
        }
        Ok(())
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::LinearCritic;
    use crate::nn::{Activation, MlpSpec};
    use crate::rng::Rng64;

    #[test]
    fn surface_examples() {
        let grid = GridSpec { x: (-1.0, 1.0), y: (0.0, 2.0), nx: 3, ny: 4 };
        let s = value_surface(&LinearCritic { input: 2 }, &LinearCritic::params(&[1.0, 0.0], 0.0), &grid).unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.iter().all(|[x, _, v]| x == v));
        assert_eq!(s[1][..2], [0.0, 0.0]);
        let c = value_surface(&LinearCritic { input: 2 }, &LinearCritic::params(&[0.0, 0.0], 0.7), &grid).unwrap();
        assert!(c.iter().all(|r| r[2] == 0.7));
        let g = GridSpec { x: (1.0, 2.0), y: (1.0, 2.0), nx: 2, ny: 2 };
        let v = value_surface(&LinearCritic { input: 2 }, &LinearCritic::params(&[1.0, 2.0], 0.0), &g).unwrap();
        assert_eq!(v[0], [1.0, 1.0, 3.0]);
        assert!(GridSpec::square(0.0, 0.0, 5).validate().is_err());
        assert!(GridSpec::square(0.0, 1.0, 1).validate().is_err());
    }

    #[test]
    fn layer_norm_examples() {
        let spec = MlpSpec::new(vec![3, 4], Activation::Relu);
        let params = spec.init_params(0).unwrap();
        let batch = Tensor::from_raw(vec![5, 3], (0..15).map(|k| k as f64 * 0.1).collect());
        let sum = |t: &mut Tape, d: NodeRef| Ok(t.sum(d));
        let n = layer_gradient_norms(&spec, &params, &batch, &sum).unwrap();
        assert_eq!(n.len(), 1);
        assert!((n[0] - (5.0f64 * 4.0).sqrt()).abs() < 1e-12);

        let detached = |t: &mut Tape, _d: NodeRef| Ok(t.scalar_constant(1.0));
        assert_eq!(layer_gradient_norms(&spec, &params, &batch, &detached).unwrap(), vec![0.0]);

        let deep = MlpSpec::uniform(3, 8, 4, 1, Activation::Tanh);
        let p = deep.init_params(1).unwrap();
        let base = layer_gradient_norms(&deep, &p, &batch, &sum).unwrap();
        let scaled = layer_gradient_norms(&deep, &p, &batch, &|t: &mut Tape, d: NodeRef| {
            let s = t.sum(d);
            Ok(t.scale(s, -3.0))
        })
        .unwrap();
        assert_eq!(base.len(), 4);
        for (a, b) in base.iter().zip(&scaled) {
            assert!((3.0 * a - b).abs() <= 1e-12 * b.abs());
            assert!(a.is_finite() && *a > 0.0);
        }
    }

    #[test]
    fn histogram_examples() {
        let c = 0.01;
        let mut p = ParamSet::new();
        p.insert("w", Tensor::vector(vec![-c, -c, c])).unwrap();
        assert_eq!(weight_histogram(&p, 2, -c, c).unwrap().counts, vec![2, 1]);
        assert_eq!(weight_histogram(&ParamSet::new(), 4, -1.0, 1.0).unwrap().counts, vec![0; 4]);
        assert!(weight_histogram(&p, 2, 1.0, 1.0).is_err());
        assert!(weight_histogram(&p, 1, 0.0, 1.0).is_err());
        let mut outside = ParamSet::new();
        outside.insert("w", Tensor::vector(vec![-5.0, 5.0, 0.1])).unwrap();
        assert_eq!(weight_histogram(&outside, 4, -1.0, 1.0).unwrap().counts, vec![1, 0, 1, 1]);
    }

    #[test]
    fn histogram_of_uniform_weights() {
        let mut rng = Rng64::new(12);
        let mut p = ParamSet::new();
        p.insert("w", Tensor::vector((0..100_000).map(|_| rng.uniform_in(-1.0, 1.0)).collect())).unwrap();
        let h = weight_histogram(&p, 10, -1.0, 1.0).unwrap();
        assert_eq!(h.total(), 100_000);
        // multinomial sd: sqrt(n p (1 - p)) = sqrt(1e5 * 0.1 * 0.9) ≈ 94.9
        let sd = (1e5f64 * 0.1 * 0.9).sqrt();
        for &c in &h.counts {
            assert!((c as f64 - 1e4).abs() <= 3.0 * sd, "count {c}");
        }
        assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn penalty_stats_examples() {
        let critic = LinearCritic { input: 2 };
        let x = Tensor::from_raw(vec![3, 2], vec![0.1, 0.2, -1.0, 3.0, 0.0, 0.0]);
        let (m, msd) = penalty_norm_stats(&critic, &LinearCritic::params(&[3.0, 4.0], 0.2), &x).unwrap();
        assert!((m - 5.0).abs() < 1e-12 && (msd - 16.0).abs() < 1e-11);
        let (m, msd) = penalty_norm_stats(&critic, &LinearCritic::params(&[0.6, 0.8], 0.0), &x).unwrap();
        assert!((m - 1.0).abs() < 1e-12 && msd < 1e-20);

        // mixed batches: stats of the union are the size-weighted average
        let mlp = MlpSpec::uniform(2, 6, 3, 1, Activation::Tanh);
        let p = mlp.init_params(3).unwrap();
        let a = Tensor::from_raw(vec![2, 2], vec![0.3, -0.1, 1.0, 2.0]);
        let b = Tensor::from_raw(vec![3, 2], vec![-0.5, 0.5, 0.0, 0.1, 2.0, -1.0]);
        let (ma, sa) = penalty_norm_stats(&mlp, &p, &a).unwrap();
        let (mb, sb) = penalty_norm_stats(&mlp, &p, &b).unwrap();
        let (mu, su) = penalty_norm_stats(&mlp, &p, &Tensor::stack_rows(&[a, b]).unwrap()).unwrap();
        assert!((mu - (2.0 * ma + 3.0 * mb) / 5.0).abs() < 1e-12);
        assert!((su - (2.0 * sa + 3.0 * sb) / 5.0).abs() < 1e-12);
    }

    #[test]
    fn tracker_examples() {
        let critic = LinearCritic { input: 1 };
        let train = Tensor::from_raw(vec![2, 1], vec![1.0, 3.0]);
        let val = Tensor::from_raw(vec![2, 1], vec![0.0, -2.0]);
        let fake = Tensor::from_raw(vec![2, 1], vec![0.5, 0.5]);
        let params = LinearCritic::params(&[2.0], 1.0);

        let same = TrainValTracker::new(train.clone(), train.clone(), 1).unwrap();
        assert_eq!(same.evaluate(0, &critic, &params, &fake).unwrap().gap(), 0.0);

        let constant = LinearCritic::params(&[0.0], 4.0);
        let t = TrainValTracker::new(train.clone(), val.clone(), 1).unwrap();
        let p = t.evaluate(0, &critic, &constant, &fake).unwrap();
        assert_eq!((p.train, p.validation), (0.0, 0.0));

        // D = 2x + 1: train mean 5, val mean -1, fake mean 2
        let p = t.evaluate(3, &critic, &params, &fake).unwrap();
        assert_eq!((p.train, p.validation, p.gap()), (3.0, -3.0, 6.0));

        let mut every = TrainValTracker::new(train, val, TRACK_EVERY).unwrap();
        for it in 0..35 {
            every.observe(it, &critic, &params, &fake).unwrap();
        }
        let its: Vec<usize> = every.points().iter().map(|p| p.iteration).collect();
        assert_eq!(its, vec![0, 10, 20, 30]);
    }

    #[test]
    fn slope() {
        assert!((ls_slope(&[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-12);
        assert_eq!(ls_slope(&[4.0]), 0.0);
        assert!(ls_slope(&[3.0, 2.0, 2.5, 0.0]) < 0.0);
    }
}
