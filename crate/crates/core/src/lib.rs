//! Reverse-mode differentiation with differentiable gradients, small neural
//! network blocks, and the Wasserstein GAN training loop with weight clipping,
//! gradient penalty (two- and one-sided) and the standard GAN objective.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, clocks and the
//! command line live in the `wgangp-lab` companion crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod data;
pub mod diagnostics;
mod error;
pub mod gan;
pub mod gradcheck;
pub mod langmodel;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use autodiff::{NodeRef, Tape};
pub use error::{Error, Result};
pub use tensor::Tensor;
