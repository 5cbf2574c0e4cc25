//! Finite-difference verification of every differentiable primitive and of
//! the gradient-penalty critic loss with respect to critic parameters.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{check_gradient_fd, CheckOrder, NodeRef, Tape};
use crate::error::Result;
use crate::gan::{critic_loss, interpolate_samples, CriticRegime};
use crate::nn::{Activation, MlpSpec, Network};
use crate::rng::Rng64;
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;
pub const FIRST_ORDER_TOL: f64 = 1e-5;
pub const SECOND_ORDER_TOL: f64 = 1e-4;
/// Random points per primitive.
pub const POINTS: usize = 10;

/// Outcome of one check, maximised over its points or seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub order: CheckOrder,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }
}

type Build = Box<dyn Fn(&mut Tape, NodeRef) -> Result<NodeRef>>;

#[derive(Clone, Copy)]
enum Domain {
    /// Uniform on `[-2, 2]`, kept at least 0.05 away from the kinks at 0 and
    /// the clamp window edges.
    Real,
    /// Uniform on `[0.5, 2]`.
    Positive,
}

struct Primitive {
    name: &'static str,
    len: usize,
    domain: Domain,
    /// Maps the input vector to a tensor output.
    op: Build,
}

fn halves(t: &mut Tape, x: NodeRef, a: &[usize], b: &[usize]) -> Result<(NodeRef, NodeRef)> {
    let na: usize = a.iter().product();
    let nb: usize = b.iter().product();
    let sa = t.slice(x, 0, 0, na)?;
    let sb = t.slice(x, 0, na, nb)?;
    Ok((t.reshape(sa, a)?, t.reshape(sb, b)?))
}

fn primitives() -> Vec<Primitive> {
    use Domain::*;
    let p = |name, len, domain, op: Build| Primitive { name, len, domain, op };
    vec![
        p(
            "add",
            8,
            Real,
            Box::new(|t, x| {
                let (a, b) = halves(t, x, &[4], &[4])?;
                t.add(a, b)
            }),
        ),
        p(
            "sub",
            8,
            Real,
            Box::new(|t, x| {
                let (a, b) = halves(t, x, &[4], &[4])?;
                t.sub(a, b)
            }),
        ),
        p(
            "mul",
            8,
            Real,
            Box::new(|t, x| {
                let (a, b) = halves(t, x, &[4], &[4])?;
                t.mul(a, b)
            }),
        ),
        p("scale", 5, Real, Box::new(|t, x| Ok(t.scale(x, -1.7)))),
        p("add_scalar", 5, Real, Box::new(|t, x| Ok(t.add_scalar(x, 0.3)))),
        p(
            "matmul",
            12,
            Real,
            Box::new(|t, x| {
                let (a, b) = halves(t, x, &[2, 3], &[3, 2])?;
                t.matmul(a, b)
            }),
        ),
        p(
            "transpose",
            6,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[2, 3])?;
                t.transpose(m)
            }),
        ),
        p(
            "broadcast",
            3,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[1, 3])?;
                t.broadcast_to(m, &[4, 3])
            }),
        ),
        p(
            "reduce",
            6,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[2, 3])?;
                t.reduce_to(m, &[1, 3])
            }),
        ),
        p("sum", 5, Real, Box::new(|t, x| Ok(t.sum(x)))),
        p("mean", 5, Real, Box::new(|t, x| Ok(t.mean(x)))),
        p("pow", 5, Positive, Box::new(|t, x| Ok(t.pow(x, 2.5)))),
        p("pow_negative", 5, Positive, Box::new(|t, x| Ok(t.pow(x, -1.5)))),
        p("sqrt", 5, Positive, Box::new(|t, x| Ok(t.sqrt(x)))),
        p("exp", 5, Real, Box::new(|t, x| Ok(t.exp(x)))),
        p("log", 5, Positive, Box::new(|t, x| Ok(t.log(x)))),
        p(
            "div",
            6,
            Positive,
            Box::new(|t, x| {
                let (a, b) = halves(t, x, &[3], &[3])?;
                t.div(a, b)
            }),
        ),
        p("max_const", 6, Real, Box::new(|t, x| Ok(t.max_const(x, 0.0)))),
        p("relu", 6, Real, Box::new(|t, x| Ok(t.relu(x)))),
        p("leaky_relu", 6, Real, Box::new(|t, x| Ok(t.leaky_relu(x, 0.2)))),
        p("clamp", 6, Real, Box::new(|t, x| Ok(t.clamp(x, -1.0, 1.0)))),
        p("tanh", 5, Real, Box::new(|t, x| Ok(t.tanh(x)))),
        p("softplus", 5, Real, Box::new(|t, x| Ok(t.softplus(x)))),
        p("sigmoid", 5, Real, Box::new(|t, x| Ok(t.sigmoid(x)))),
        p(
            "softmax",
            8,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[2, 4])?;
                t.softmax(m)
            }),
        ),
        p(
            "conv1d",
            22,
            Real,
            Box::new(|t, x| {
                let (a, w) = halves(t, x, &[1, 2, 5], &[2, 2, 3])?;
                t.conv1d(a, w)
            }),
        ),
        p(
            "concat",
            7,
            Real,
            Box::new(|t, x| {
                let (a, b) = halves(t, x, &[1, 3], &[1, 4])?;
                let bt = t.reshape(b, &[1, 4])?;
                t.concat(&[a, bt], 1)
            }),
        ),
        p(
            "slice",
            6,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[2, 3])?;
                t.slice(m, 1, 1, 2)
            }),
        ),
        p(
            "pad",
            4,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[1, 1, 4])?;
                t.pad(m, 2, 2, 1)
            }),
        ),
        p(
            "row_l2_norm",
            6,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[2, 3])?;
                t.row_l2_norm(m)
            }),
        ),
        p(
            "layer_norm_core",
            8,
            Real,
            Box::new(|t, x| {
                let m = t.reshape(x, &[2, 4])?;
                t.layer_norm_core(m, 1e-5)
            }),
        ),
    ]
}

fn draw_point(rng: &mut Rng64, len: usize, domain: Domain) -> Tensor {
    let data = (0..len)
        .map(|_| match domain {
            Domain::Real => {
                let mut v = rng.uniform_in(-2.0, 2.0);
                // stay clear of the kinks at 0 and ±1
                for k in [-1.0, 0.0, 1.0] {
                    if (v - k).abs() < 0.05 {
                        v = k + 0.05 * if v >= k { 1.0 } else { -1.0 };
                    }
                }
                v
            }
            Domain::Positive => rng.uniform_in(0.5, 2.0),
        })
        .collect();
    Tensor::vector(data)
}

/// `Σ c ⊙ op(x)`, or `Σ c ⊙ (op(x) + op(x)²)` with `square`, for fixed
/// random weights `c`.
fn weighted<'a>(op: &'a Build, weights: &Tensor, square: bool) -> impl Fn(&mut Tape, NodeRef) -> Result<NodeRef> + 'a {
    let w = weights.clone();
    move |t: &mut Tape, x: NodeRef| {
        let y = op(t, x)?;
        let y = if square {
            let sq = t.mul(y, y)?;
            t.add(y, sq)?
        } else {
            y
        };
        let flat = t.reshape(y, &[t.shape(y).iter().product()])?;
        let c = t.constant(w.clone());
        let p = t.mul(flat, c)?;
        Ok(t.sum(p))
    }
}

fn output_len(op: &Build, len: usize) -> Result<usize> {
    let mut t = Tape::new();
    let x = t.leaf("x", Tensor::ones(&[len]));
    let y = op(&mut t, x)?;
    Ok(t.shape(y).iter().product())
}

/// Checks every primitive at [`POINTS`] random points:
///
/// - order 1 on `Σ c ⊙ op(x)`;
/// - order 2 on `Σ c ⊙ (op(x) + op(x)²)`, whose Hessian exercises the
///   backward of `op`'s backward;
/// - order 1 on the norm of the gradient of that function, the composition
///   the penalty differentiates.
pub fn primitive_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut rng = Rng64::new(seed);
    for prim in primitives() {
        let m = output_len(&prim.op, prim.len)?;
        let mut errs = [0.0f64; 3];
        for _ in 0..POINTS {
            let weights = Tensor::vector((0..m).map(|_| rng.uniform_in(-1.0, 1.0)).collect());
            let point = draw_point(&mut rng, prim.len, prim.domain);
            let e1 = check_gradient_fd(weighted(&prim.op, &weights, false), &point, FD_STEP, CheckOrder::First)?;
            let e2 = check_gradient_fd(weighted(&prim.op, &weights, true), &point, FD_STEP, CheckOrder::Second)?;
            let sq = weighted(&prim.op, &weights, true);
            let norm = |t: &mut Tape, x: NodeRef| {
                let f = sq(t, x)?;
                let g = t.grad(f, &[x])?[0];
                let g2 = t.reshape(g, &[1, prim.len])?;
                let n = t.row_l2_norm(g2)?;
                Ok(t.sum(n))
            };
            let e3 = check_gradient_fd(norm, &point, FD_STEP, CheckOrder::First)?;
            errs = [errs[0].max(e1), errs[1].max(e2), errs[2].max(e3)];
        }
        out.push(CheckResult {
            name: prim.name.to_string(),
            order: CheckOrder::First,
            max_error: errs[0],
            tolerance: FIRST_ORDER_TOL,
        });
        out.push(CheckResult {
            name: prim.name.to_string(),
            order: CheckOrder::Second,
            max_error: errs[1],
            tolerance: SECOND_ORDER_TOL,
        });
        out.push(CheckResult {
            name: alloc::format!("grad_norm({})", prim.name),
            order: CheckOrder::Second,
            max_error: errs[2],
            tolerance: SECOND_ORDER_TOL,
        });
    }
    Ok(out)
}

/// The two-sided penalty critic loss (λ = 10) of a small tanh MLP critic as
/// a function of its flattened parameters, at order 1 and order 2.
pub fn gp_loss_check(seed: u64) -> Result<(f64, f64)> {
    let spec = MlpSpec::uniform(2, 5, 3, 1, Activation::Tanh);
    let params = spec.init_params(seed)?;
    let mut rng = Rng64::for_draw(seed, 1);
    let m = 4;
    let real = Tensor::new(vec![m, 2], (0..2 * m).map(|_| rng.normal()).collect())?;
    let fake = Tensor::new(vec![m, 2], (0..2 * m).map(|_| rng.normal()).collect())?;
    let eps: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
    let x_hat = interpolate_samples(&real, &fake, &eps)?;
    let point = Tensor::vector(params.flatten());
    let f = |tape: &mut Tape, flat: NodeRef| {
        let p = params.bind_flat(tape, flat)?;
        let r = tape.constant(real.clone());
        let fk = tape.constant(fake.clone());
        let h = tape.constant(x_hat.clone());
        Ok(critic_loss(tape, CriticRegime::gp(10.0), &spec, &p, r, fk, Some(h))?.loss)
    };
    let e1 = check_gradient_fd(f, &point, FD_STEP, CheckOrder::First)?;
    let e2 = check_gradient_fd(f, &point, FD_STEP, CheckOrder::Second)?;
    Ok((e1, e2))
}

/// Primitive and penalty-loss checks at `seeds` consecutive seeds starting
/// from `seed`, each result maximised over the seeds.
pub fn full_suite(seed: u64, seeds: u64) -> Result<Vec<CheckResult>> {
    let mut out: Vec<CheckResult> = Vec::new();
    for s in seed..seed + seeds {
        let mut results = primitive_suite(s)?;
        let (e1, e2) = gp_loss_check(s)?;
        results.push(CheckResult {
            name: "gp_critic_loss".to_string(),
            order: CheckOrder::First,
            max_error: e1,
            tolerance: FIRST_ORDER_TOL,
        });
        results.push(CheckResult {
            name: "gp_critic_loss".to_string(),
            order: CheckOrder::Second,
            max_error: e2,
            tolerance: SECOND_ORDER_TOL,
        });
        if out.is_empty() {
            out = results;
        } else {
            for (acc, r) in out.iter_mut().zip(results) {
                acc.max_error = acc.max_error.max(r.max_error);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_primitive_passes() {
        let results = primitive_suite(0).unwrap();
        assert_eq!(results.len(), 3 * primitives().len());
        for r in &results {
            assert!(r.passed(), "{} {:?}: {}", r.name, r.order, r.max_error);
        }
    }

    #[test]
    fn penalty_loss_passes() {
        let (e1, e2) = gp_loss_check(3).unwrap();
        assert!(e1 < FIRST_ORDER_TOL && e2 < SECOND_ORDER_TOL, "{e1} {e2}");
    }

    #[test]
    fn full_suite_maximises_over_seeds() {
        let all = full_suite(0, 2).unwrap();
        let first = primitive_suite(0).unwrap();
        let second = primitive_suite(1).unwrap();
        assert_eq!(all.len(), first.len() + 2);
        for ((a, f), s) in all.iter().zip(&first).zip(&second) {
            assert_eq!(a.max_error, f.max_error.max(s.max_error));
        }
    }

    #[test]
    fn points_avoid_kinks() {
        let mut rng = Rng64::new(1);
        for _ in 0..100 {
            let p = draw_point(&mut rng, 10, Domain::Real);
            assert!(p.data().iter().all(|v| [-1.0f64, 0.0, 1.0].iter().all(|k| (v - k).abs() >= 0.05 - 1e-15)));
        }
    }
}
