//! Value-level kernels behind the tape operations.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{numel, Tensor};

pub(crate) fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_raw(a.shape().to_vec(), data)
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k) = (a.shape()[0], a.shape()[1]);
    let m = b.shape()[1];
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::from_raw(vec![n, m], out)
}

/// Swaps the two trailing axes.
pub(crate) fn swap_last(a: &Tensor) -> Tensor {
    let r = a.rank();
    let (rows, cols) = (a.shape()[r - 2], a.shape()[r - 1]);
    let batch = numel(&a.shape()[..r - 2]);
    let mut out = vec![0.0; a.len()];
    let src = a.data();
    for b in 0..batch {
        let base = b * rows * cols;
        for i in 0..rows {
            for j in 0..cols {
                out[base + j * rows + i] = src[base + i * cols + j];
            }
        }
    }
    let mut shape = a.shape().to_vec();
    shape.swap(r - 2, r - 1);
    Tensor::from_raw(shape, out)
}

/// For each output position of `big`, the flat index of the broadcast source
/// with shape `small` (rank 0, or same rank with extents 1 or equal).
fn broadcast_index_map(small: &[usize], big: &[usize]) -> Vec<usize> {
    let total = numel(big);
    if small.is_empty() {
        return vec![0; total];
    }
    let rank = big.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for d in (0..rank).rev() {
        strides[d] = if small[d] == 1 { 0 } else { acc };
        acc *= small[d];
    }
    let mut idx = vec![0usize; rank];
    let mut map = Vec::with_capacity(total);
    let mut src = 0usize;
    for _ in 0..total {
        map.push(src);
        for d in (0..rank).rev() {
            idx[d] += 1;
            src += strides[d];
            if idx[d] < big[d] {
                break;
            }
            src -= strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    map
}

pub(crate) fn broadcast_to(a: &Tensor, shape: &[usize]) -> Tensor {
    let map = broadcast_index_map(a.shape(), shape);
    let src = a.data();
    Tensor::from_raw(shape.to_vec(), map.into_iter().map(|i| src[i]).collect())
}

pub(crate) fn reduce_to(a: &Tensor, shape: &[usize]) -> Tensor {
    let map = broadcast_index_map(shape, a.shape());
    let mut out = vec![0.0; numel(shape)];
    for (&i, &v) in map.iter().zip(a.data()) {
        out[i] += v;
    }
    Tensor::from_raw(shape.to_vec(), out)
}

pub(crate) fn softmax_last(a: &Tensor) -> Tensor {
    let n = *a.shape().last().unwrap();
    let mut out = a.data().to_vec();
    if n > 0 {
        for row in out.chunks_mut(n) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = libm::exp(*v - max);
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
    }
    Tensor::from_raw(a.shape().to_vec(), out)
}

/// y[b,o,t] = sum_{c,j} x[b,c,t+j] w[o,c,j]
pub(crate) fn conv1d(x: &Tensor, w: &Tensor) -> Tensor {
    let (nb, cin, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, k) = (w.shape()[0], w.shape()[2]);
    let lo = len + 1 - k;
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![0.0; nb * cout * lo];
    for b in 0..nb {
        for o in 0..cout {
            let orow = &mut out[(b * cout + o) * lo..(b * cout + o + 1) * lo];
            for c in 0..cin {
                let xrow = &xd[(b * cin + c) * len..(b * cin + c + 1) * len];
                for j in 0..k {
                    let wv = wd[(o * cin + c) * k + j];
                    if wv == 0.0 {
                        continue;
                    }
                    for (t, ov) in orow.iter_mut().enumerate() {
                        *ov += wv * xrow[t + j];
                    }
                }
            }
        }
    }
    Tensor::from_raw(vec![nb, cout, lo], out)
}

/// Adjoint of [`conv1d`] in its input: dx[b,c,t+j] += g[b,o,t] w[o,c,j].
pub(crate) fn conv1d_input_grad(g: &Tensor, w: &Tensor) -> Tensor {
    let (nb, cout, lo) = (g.shape()[0], g.shape()[1], g.shape()[2]);
    let (cin, k) = (w.shape()[1], w.shape()[2]);
    let len = lo + k - 1;
    let (gd, wd) = (g.data(), w.data());
    let mut out = vec![0.0; nb * cin * len];
    for b in 0..nb {
        for o in 0..cout {
            let grow = &gd[(b * cout + o) * lo..(b * cout + o + 1) * lo];
            for c in 0..cin {
                let xrow = &mut out[(b * cin + c) * len..(b * cin + c + 1) * len];
                for j in 0..k {
                    let wv = wd[(o * cin + c) * k + j];
                    if wv == 0.0 {
                        continue;
                    }
                    for (t, &gv) in grow.iter().enumerate() {
                        xrow[t + j] += wv * gv;
                    }
                }
            }
        }
    }
    Tensor::from_raw(vec![nb, cin, len], out)
}

/// Adjoint of [`conv1d`] in its kernel: dw[o,c,j] = sum_{b,t} g[b,o,t] x[b,c,t+j].
pub(crate) fn conv1d_weight_grad(x: &Tensor, g: &Tensor) -> Tensor {
    let (nb, cin, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, lo) = (g.shape()[1], g.shape()[2]);
    let k = len + 1 - lo;
    let (xd, gd) = (x.data(), g.data());
    let mut out = vec![0.0; cout * cin * k];
    for b in 0..nb {
        for o in 0..cout {
            let grow = &gd[(b * cout + o) * lo..(b * cout + o + 1) * lo];
            for c in 0..cin {
                let xrow = &xd[(b * cin + c) * len..(b * cin + c + 1) * len];
                for j in 0..k {
                    let mut s = 0.0;
                    for (t, &gv) in grow.iter().enumerate() {
                        s += gv * xrow[t + j];
                    }
                    out[(o * cin + c) * k + j] += s;
                }
            }
        }
    }
    Tensor::from_raw(vec![cout, cin, k], out)
}

/// (outer, axis length, inner) view of `shape` around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

pub(crate) fn concat(parts: &[&Tensor], axis: usize) -> Tensor {
    let mut shape = parts[0].shape().to_vec();
    shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
    let (outer, _, inner) = split_axis(&shape, axis);
    let mut out = Vec::with_capacity(numel(&shape));
    for o in 0..outer {
        for p in parts {
            let chunk = p.shape()[axis] * inner;
            out.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Tensor::from_raw(shape, out)
}

pub(crate) fn slice(a: &Tensor, axis: usize, start: usize, len: usize) -> Tensor {
    let (outer, full, inner) = split_axis(a.shape(), axis);
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = o * full * inner + start * inner;
        out.extend_from_slice(&a.data()[base..base + len * inner]);
    }
    let mut shape = a.shape().to_vec();
    shape[axis] = len;
    Tensor::from_raw(shape, out)
}

/// Places `a` at offset `before` inside zeros of extent `total` along `axis`.
pub(crate) fn pad(a: &Tensor, axis: usize, before: usize, total: usize) -> Tensor {
    let (outer, len, inner) = split_axis(a.shape(), axis);
    let mut out = vec![0.0; outer * total * inner];
    for o in 0..outer {
        let dst = o * total * inner + before * inner;
        out[dst..dst + len * inner].copy_from_slice(&a.data()[o * len * inner..(o + 1) * len * inner]);
    }
    let mut shape = a.shape().to_vec();
    shape[axis] = total;
    Tensor::from_raw(shape, out)
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_and_reduce_are_adjoint_shapes() {
        let v = Tensor::vector(vec![1., 2., 3.]).reshape(&[1, 3]).unwrap();
        let b = broadcast_to(&v, &[2, 3]);
        assert_eq!(b.data(), &[1., 2., 3., 1., 2., 3.]);
        let r = reduce_to(&b, &[1, 3]);
        assert_eq!(r.data(), &[2., 4., 6.]);
        let s = reduce_to(&b, &[]);
        assert_eq!(s.data(), &[12.]);
        let c = Tensor::vector(vec![1., 2.]).reshape(&[2, 1]).unwrap();
        assert_eq!(broadcast_to(&c, &[2, 3]).data(), &[1., 1., 1., 2., 2., 2.]);
    }

    #[test]
    fn conv_hand_case() {
        let x = Tensor::vector(vec![1., 2., 3., 4.]).reshape(&[1, 1, 4]).unwrap();
        let w = Tensor::vector(vec![1., 0., -1.]).reshape(&[1, 1, 3]).unwrap();
        assert_eq!(conv1d(&x, &w).data(), &[-2., -2.]);
    }

    #[test]
    fn concat_slice_pad() {
        let a = Tensor::matrix(2, 2, vec![1., 2., 3., 4.]).unwrap();
        let b = Tensor::matrix(2, 1, vec![5., 6.]).unwrap();
        let c = concat(&[&a, &b], 1);
        assert_eq!(c.data(), &[1., 2., 5., 3., 4., 6.]);
        assert_eq!(slice(&c, 1, 1, 2).data(), &[2., 5., 4., 6.]);
        assert_eq!(pad(&b, 1, 1, 3).data(), &[0., 5., 0., 0., 6., 0.]);
    }
}
