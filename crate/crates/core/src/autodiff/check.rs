//! Central finite-difference checks of tape gradients.

use alloc::vec::Vec;

use super::{NodeRef, Tape};
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Which derivative [`check_gradient_fd`] compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckOrder {
    /// Analytic gradient against differences of the function.
    First,
    /// Analytic Hessian (gradient of the gradient) against differences of the
    /// analytic gradient.
    Second,
}

/// Builds `f` on a fresh tape with the point bound to a leaf named `"x"` and
/// returns `max_i |analytic_i - fd_i| / max(1, |analytic_i|)`.
///
/// Perturbed evaluations replay the recorded tape through
/// [`Tape::eval_forward`], so the check also exercises forward replay.
pub fn check_gradient_fd<F>(f: F, point: &Tensor, h: f64, order: CheckOrder) -> Result<f64>
where
    F: Fn(&mut Tape, NodeRef) -> Result<NodeRef>,
{
    if !(h > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let mut tape = Tape::new();
    let x = tape.leaf("x", point.clone());
    let y = f(&mut tape, x)?;
    let g = tape.grad(y, &[x])?[0];
    let n = point.len();

    let shifted = |i: usize, delta: f64| {
        let mut p = point.clone();
        p.data_mut()[i] += delta;
        p
    };

    let (analytic, fd): (Vec<f64>, Vec<f64>) = match order {
        CheckOrder::First => {
            let analytic = tape.value(g)?.data().to_vec();
            let mut fd = Vec::with_capacity(n);
            for i in 0..n {
                let plus = tape.eval_forward(&[("x", shifted(i, h))], y)?.item();
                let minus = tape.eval_forward(&[("x", shifted(i, -h))], y)?.item();
                fd.push((plus - minus) / (2.0 * h));
            }
            (analytic, fd)
        }
        CheckOrder::Second => {
            // Row i of the Hessian is the gradient of <g, e_i>.
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut e = Tensor::zeros(point.shape());
                e.data_mut()[i] = 1.0;
                let e = tape.constant(e);
                let ge = tape.mul(g, e)?;
                let s = tape.sum(ge);
                rows.push(tape.grad(s, &[x])?[0]);
            }
            let mut analytic = Vec::with_capacity(n * n);
            for r in &rows {
                analytic.extend_from_slice(tape.value(*r)?.data());
            }
            // Column j of the Hessian from differences of the gradient.
            let mut cols = Vec::with_capacity(n);
            for j in 0..n {
                let plus = tape.eval_forward(&[("x", shifted(j, h))], g)?;
                let minus = tape.eval_forward(&[("x", shifted(j, -h))], g)?;
                let col: Vec<f64> = plus.data().iter().zip(minus.data()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                cols.push(col);
            }
            let mut fd = Vec::with_capacity(n * n);
            for i in 0..n {
                for col in &cols {
                    fd.push(col[i]);
                }
            }
            (analytic, fd)
        }
    };

    if fd.iter().all(|v| *v == 0.0) && analytic.iter().any(|v| *v != 0.0) {
        return Err(Error::StepTooSmall);
    }
    Ok(analytic.iter().zip(&fd).map(|(a, d)| (a - d).abs() / a.abs().max(1.0)).fold(0.0, f64::max))
}
