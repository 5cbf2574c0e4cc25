use super::*;
use crate::rng::Rng64;

fn t1(v: &[f64]) -> Tensor {
    Tensor::vector(v.to_vec())
}

#[test]
fn forward_examples() {
    let mut tape = Tape::new();
    let x = tape.leaf("x", Tensor::scalar(3.0));
    let y = tape.leaf("y", Tensor::scalar(4.0));
    let p = tape.mul(x, y).unwrap();
    assert_eq!(tape.eval_forward(&[], p).unwrap().item(), 12.0);

    let mut tape = Tape::new();
    let x = tape.leaf("x", t1(&[1.0, 2.0]));
    assert_eq!(tape.eval_forward(&[], x).unwrap().data(), &[1.0, 2.0]);

    let mut tape = Tape::new();
    let x = tape.leaf("x", t1(&[-1.0, 2.0, 3.0]));
    let r = tape.relu(x);
    let s = tape.sum(r);
    assert_eq!(tape.eval_forward(&[], s).unwrap().item(), 5.0);
}

#[test]
fn eval_forward_rebinds_and_reports_errors() {
    let mut tape = Tape::new();
    let x = tape.input("x", &[2]);
    let sq = tape.mul(x, x).unwrap();
    let s = tape.sum(sq);
    assert!(matches!(tape.value(s), Err(Error::Unevaluated(_))));
    assert_eq!(tape.eval_forward(&[], s), Err(Error::UnboundLeaf("x".into())));
    assert_eq!(tape.eval_forward(&[("x", t1(&[1.0, 2.0]))], s).unwrap().item(), 5.0);
    assert!(matches!(tape.eval_forward(&[("x", t1(&[1.0]))], s), Err(Error::ShapeMismatch { .. })));
    assert!(matches!(tape.eval_forward(&[("nope", t1(&[1.0]))], s), Err(Error::InvalidArgument(_))));

    let l = tape.log(x);
    let ls = tape.sum(l);
    let err = tape.eval_forward(&[("x", t1(&[0.0, 1.0]))], ls).unwrap_err();
    assert_eq!(err, Error::NonFinite { node: l.index(), op: "log" });
}

#[test]
fn replay_is_bit_exact() {
    let mut rng = Rng64::new(5);
    let x0 = Tensor::from_raw(vec![3, 4], (0..12).map(|_| rng.normal()).collect());
    let mut tape = Tape::new();
    let x = tape.leaf("x", x0.clone());
    let t = tape.tanh(x);
    let n = tape.row_l2_norm(t).unwrap();
    let s = tape.sum(n);
    let g = tape.grad(s, &[x]).unwrap()[0];
    let first = tape.value(g).unwrap().clone();
    let other = x0.map(|v| v + 1.0);
    tape.eval_forward(&[("x", other)], g).unwrap();
    let replayed = tape.eval_forward(&[("x", x0)], g).unwrap();
    assert_eq!(first, replayed);
}

#[test]
fn shape_errors() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[3, 2]));
    assert!(matches!(tape.add(a, b), Err(Error::ShapeMismatch { op: "add", .. })));
    assert!(tape.matmul(a, b).is_ok());
    assert!(tape.matmul(a, a).is_err());
    assert!(tape.broadcast_to(a, &[4, 3]).is_err());
    assert!(tape.slice(a, 1, 2, 2).is_err());
    let x = tape.constant(Tensor::zeros(&[1, 1, 2]));
    let w = tape.constant(Tensor::zeros(&[1, 1, 3]));
    assert!(tape.conv1d(x, w).is_err());
}

#[test]
fn grad_examples() {
    let mut tape = Tape::new();
    let x = tape.leaf("x", Tensor::scalar(3.0));
    let y = tape.mul(x, x).unwrap();
    let g = tape.grad(y, &[x]).unwrap()[0];
    assert_eq!(tape.scalar(g).unwrap(), 6.0);

    let mut tape = Tape::new();
    let x = tape.leaf("x", Tensor::scalar(3.0));
    let y = tape.leaf("y", Tensor::scalar(4.0));
    let p = tape.mul(x, y).unwrap();
    let g = tape.grad(p, &[x, y]).unwrap();
    assert_eq!(tape.scalar(g[0]).unwrap(), 4.0);
    assert_eq!(tape.scalar(g[1]).unwrap(), 3.0);
}

#[test]
fn double_backprop_canonical() {
    // h(x) = (d(x^2)/dx)^2 = 4x^2, dh/dx = 8x.
    let mut tape = Tape::new();
    let x = tape.leaf("x", Tensor::scalar(1.0));
    let sq = tape.mul(x, x).unwrap();
    let g = tape.grad(sq, &[x]).unwrap()[0];
    let h = tape.mul(g, g).unwrap();
    let dh = tape.grad(h, &[x]).unwrap()[0];
    assert_eq!(tape.scalar(dh).unwrap(), 8.0);
}

#[test]
fn non_scalar_output_is_an_error() {
    let mut tape = Tape::new();
    let x = tape.leaf("x", t1(&[1.0, 2.0]));
    assert_eq!(tape.grad(x, &[x]), Err(Error::NotScalar(vec![2])));
}

#[test]
fn non_ancestor_gets_zeros() {
    let mut tape = Tape::new();
    let x = tape.leaf("x", t1(&[1.0, 2.0]));
    let z = tape.leaf("z", Tensor::zeros(&[2, 3]));
    let s = tape.sum(x);
    let later = tape.leaf("later", Tensor::scalar(1.0));
    let g = tape.grad(s, &[z, later, x]).unwrap();
    assert_eq!(tape.value(g[0]).unwrap(), &Tensor::zeros(&[2, 3]));
    assert_eq!(tape.value(g[1]).unwrap(), &Tensor::scalar(0.0));
    assert_eq!(tape.value(g[2]).unwrap().data(), &[1.0, 1.0]);
}

#[test]
fn relu_kink_has_zero_derivative() {
    let mut tape = Tape::new();
    let x = tape.leaf("x", t1(&[0.0, 0.0]));
    let r = tape.relu(x);
    let l = tape.leaky_relu(x, 0.2);
    let s1 = tape.sum(r);
    let s2 = tape.sum(l);
    let tot = tape.add(s1, s2).unwrap();
    let g = tape.grad(tot, &[x]).unwrap()[0];
    assert_eq!(tape.value(g).unwrap().data(), &[0.0, 0.0]);
}

#[test]
fn norm_is_finite_at_origin() {
    let mut tape = Tape::new();
    let x = tape.leaf("x", Tensor::zeros(&[2, 3]));
    let n = tape.row_l2_norm(x).unwrap();
    let s = tape.sum(n);
    let g = tape.grad(s, &[x]).unwrap()[0];
    assert!(tape.value(g).unwrap().is_finite());
    assert!((tape.scalar(s).unwrap() - 2e-6).abs() < 1e-12);
}

#[test]
fn fd_examples() {
    let cube = |t: &mut Tape, x: NodeRef| {
        let c = t.pow(x, 3.0);
        Ok(t.sum(c))
    };
    let err = check_gradient_fd(cube, &t1(&[2.0]), 1e-5, CheckOrder::First).unwrap();
    assert!(err < 1e-6, "{err}");

    let constant = |t: &mut Tape, x: NodeRef| {
        let z = t.scale(x, 0.0);
        let s = t.sum(z);
        Ok(t.add_scalar(s, 7.0))
    };
    let err = check_gradient_fd(constant, &t1(&[0.3, -1.0]), 1e-5, CheckOrder::First).unwrap();
    assert_eq!(err, 0.0);

    let sq_norm = |t: &mut Tape, x: NodeRef| {
        let q = t.mul(x, x)?;
        Ok(t.sum(q))
    };
    let err = check_gradient_fd(sq_norm, &t1(&[1.0, 1.0]), 1e-5, CheckOrder::Second).unwrap();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn fd_rejects_bad_steps() {
    let lin = |t: &mut Tape, x: NodeRef| Ok(t.sum(x));
    assert!(matches!(check_gradient_fd(lin, &t1(&[1.0]), 0.0, CheckOrder::First), Err(Error::InvalidArgument(_))));
    // 1e-300 added to 1.0 rounds away, so every difference is zero.
    assert_eq!(check_gradient_fd(lin, &t1(&[1.0]), 1e-300, CheckOrder::First), Err(Error::StepTooSmall));
}

#[test]
fn determinism_of_gradients() {
    let build = || {
        let mut tape = Tape::new();
        let x = tape.leaf("x", t1(&[0.3, -0.7, 1.1]));
        let e = tape.exp(x);
        let sp = tape.softplus(e);
        let n = tape.reshape(sp, &[1, 3]).unwrap();
        let nn = tape.row_l2_norm(n).unwrap();
        let s = tape.sum(nn);
        let g = tape.grad(s, &[x]).unwrap()[0];
        let gs = tape.mul(g, g).unwrap();
        let h = tape.sum(gs);
        let hh = tape.grad(h, &[x]).unwrap()[0];
        tape.value(hh).unwrap().clone()
    };
    let (a, b) = (build(), build());
    assert_eq!(
        a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}
