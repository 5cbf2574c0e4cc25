//! Seeded random streams.
//!
//! All randomness in the crate flows through [`Rng64`], a ChaCha8 generator.
//! [`Rng64::for_draw`] derives an independent stream from `(seed, index)` so
//! samplers can be pure functions of the draw index.
//!
//! Normal draws use Box-Muller on top of `libm` rather than a distribution
//! crate: those route float math through `num-traits`, whose `std` feature
//! can be switched on by any other crate in the build and changes the last
//! bits of `ln`/`exp`. Seeds must give the same bits in every build.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct Rng64 {
    inner: ChaCha8Rng,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Stream number `index` of the generator seeded with `seed`.
    pub fn for_draw(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        Self { inner }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal; consumes two uniforms.
    pub fn normal(&mut self) -> f64 {
        let u = 1.0 - self.uniform();
        let v = self.uniform();
        libm::sqrt(-2.0 * libm::log(u)) * libm::cos(core::f64::consts::TAU * v)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// A child seed, for handing independent streams to sub-components.
    pub fn fork(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
