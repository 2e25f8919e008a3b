//! NCHW tensor kernels with hand-written backward passes.
//!
//! Convolutions lower to `im2col` plus SGEMM. Work is split per sample across the
//! rayon pool; per-sample weight gradients are reduced in sample order so results
//! do not depend on the number of threads.

use rayon::prelude::*;

/// Dense `[n, c, h, w]` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 4],
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f32>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length"
        );
        Tensor { shape, data }
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn c(&self) -> usize {
        self.shape[1]
    }

    pub fn hw(&self) -> usize {
        self.shape[2] * self.shape[3]
    }

    /// Elements per sample.
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }
}

/// `c = a · b` (or `c += a · b` when `accumulate`) for row-major slices, with
/// explicit strides so transposed operands need no copy.
#[allow(clippy::too_many_arguments)]
/// Elements spanned by a rows×cols view with non-negative strides.
fn span(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    assert!(rs >= 0 && cs >= 0, "negative gemm stride");
    (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (isize, isize),
    b: &[f32],
    (rsb, csb): (isize, isize),
    c: &mut [f32],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n, "gemm output too short");
    if k > 0 {
        assert!(
            span(m, k, rsa, csa) <= a.len() && span(k, n, rsb, csb) <= b.len(),
            "gemm operand out of bounds"
        );
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: strides describe in-bounds m×k, k×n and m×n views of the slices.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfold a `[c, h, w]` sample into `[c·k·k, h·w]` patch columns, zero padded by
/// `k / 2`.
fn im2col(x: &[f32], c: usize, h: usize, w: usize, k: usize, cols: &mut [f32]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    let out = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    let lo = (-dx).max(0) as usize;
                    let hi = (w as isize - dx).min(w as isize).max(0) as usize;
                    out[..lo.min(w)].fill(0.0);
                    if hi > lo {
                        let s0 = (lo as isize + dx) as usize;
                        out[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                    }
                    out[hi.max(lo)..].fill(0.0);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back onto a `[c, h, w]` sample.
fn col2im(cols: &[f32], c: usize, h: usize, w: usize, k: usize, x: &mut [f32]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    x.fill(0.0);
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let lo = (-dx).max(0) as usize;
                    let hi = (w as isize - dx).min(w as isize).max(0) as usize;
                    if hi <= lo {
                        continue;
                    }
                    let s0 = (lo as isize + dx) as usize;
                    let dst = &mut plane[sy as usize * w + s0..][..hi - lo];
                    for (d, &v) in dst.iter_mut().zip(&row[y * w + lo..y * w + hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// Square convolution, stride 1, same padding. `weight` is `[cout, cin, k, k]`.
pub fn conv2d(x: &Tensor, weight: &[f32], bias: Option<&[f32]>, cout: usize, k: usize) -> Tensor {
    let [n, cin, h, w] = x.shape;
    let hw = h * w;
    let kk = cin * k * k;
    debug_assert_eq!(weight.len(), cout * kk);
    let mut out = Tensor::zeros([n, cout, h, w]);
    out.data
        .par_chunks_mut(cout * hw)
        .zip(x.data.par_chunks(cin * hw))
        .for_each_init(
            || {
                if k == 1 {
                    Vec::new()
                } else {
                    vec![0.0f32; kk * hw]
                }
            },
            |cols, (o, xs)| {
                let src: &[f32] = if k == 1 {
                    xs
                } else {
                    im2col(xs, cin, h, w, k, cols);
                    cols
                };
                gemm(
                    cout,
                    kk,
                    hw,
                    weight,
                    (kk as isize, 1),
                    src,
                    (hw as isize, 1),
                    o,
                    false,
                );
                if let Some(b) = bias {
                    for (co, plane) in o.chunks_mut(hw).enumerate() {
                        plane.iter_mut().for_each(|v| *v += b[co]);
                    }
                }
            },
        );
    out
}

/// Gradients of [`conv2d`]: returns `(dx, dweight, dbias)`; `dx` is skipped when
/// `need_dx` is false (first layer).
pub fn conv2d_backward(
    x: &Tensor,
    weight: &[f32],
    dy: &Tensor,
    k: usize,
    with_bias: bool,
    need_dx: bool,
) -> (Option<Tensor>, Vec<f32>, Option<Vec<f32>>) {
    let [n, cin, h, w] = x.shape;
    let cout = dy.c();
    let hw = h * w;
    let kk = cin * k * k;

    let per_sample: Vec<(Vec<f32>, Option<Vec<f32>>)> = x
        .data
        .par_chunks(cin * hw)
        .zip(dy.data.par_chunks(cout * hw))
        .map(|(xs, dys)| {
            let cols;
            let src: &[f32] = if k == 1 {
                xs
            } else {
                let mut c = vec![0.0f32; kk * hw];
                im2col(xs, cin, h, w, k, &mut c);
                cols = c;
                &cols
            };
            let mut dw = vec![0.0f32; cout * kk];
            gemm(
                cout,
                hw,
                kk,
                dys,
                (hw as isize, 1),
                src,
                (1, hw as isize),
                &mut dw,
                false,
            );
            let dx = need_dx.then(|| {
                let mut dcols = vec![0.0f32; kk * hw];
                gemm(
                    kk,
                    cout,
                    hw,
                    weight,
                    (1, kk as isize),
                    dys,
                    (hw as isize, 1),
                    &mut dcols,
                    false,
                );
                if k == 1 {
                    dcols
                } else {
                    let mut dx = vec![0.0f32; cin * hw];
                    col2im(&dcols, cin, h, w, k, &mut dx);
                    dx
                }
            });
            (dw, dx)
        })
        .collect();

    let mut dweight = vec![0.0f32; cout * kk];
    let mut dx = need_dx.then(|| Tensor::zeros([n, cin, h, w]));
    for (s, (dw, dxs)) in per_sample.into_iter().enumerate() {
        dweight.iter_mut().zip(&dw).for_each(|(a, b)| *a += b);
        if let (Some(t), Some(d)) = (dx.as_mut(), dxs) {
            t.data[s * cin * hw..(s + 1) * cin * hw].copy_from_slice(&d);
        }
    }
    let dbias = with_bias.then(|| {
        let mut db = vec![0.0f64; cout];
        for sample in dy.data.chunks(cout * hw) {
            for (co, plane) in sample.chunks(hw).enumerate() {
                db[co] += plane.iter().map(|&v| v as f64).sum::<f64>();
            }
        }
        db.into_iter().map(|v| v as f32).collect()
    });
    (dx, dweight, dbias)
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

/// Saved state for the batch-norm backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    xhat: Vec<f32>,
    inv_std: Vec<f32>,
}

/// Training-mode batch norm over `(n, h, w)` per channel. Updates the running
/// statistics in place (unbiased variance, momentum 0.1).
pub fn batch_norm_train(
    x: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    running_mean: &mut [f32],
    running_var: &mut [f32],
) -> (Tensor, BnCache) {
    let [n, c, _, _] = x.shape;
    let hw = x.hw();
    let m = (n * hw) as f64;
    let mut mean = vec![0.0f64; c];
    let mut var = vec![0.0f64; c];
    for s in 0..n {
        for ch in 0..c {
            let plane = &x.data[(s * c + ch) * hw..][..hw];
            mean[ch] += plane.iter().map(|&v| v as f64).sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    for s in 0..n {
        for ch in 0..c {
            let plane = &x.data[(s * c + ch) * hw..][..hw];
            var[ch] += plane
                .iter()
                .map(|&v| (v as f64 - mean[ch]).powi(2))
                .sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= m);

    let inv_std: Vec<f32> = var
        .iter()
        .map(|v| (1.0 / (v + BN_EPS).sqrt()) as f32)
        .collect();
    let mut xhat = vec![0.0f32; x.data.len()];
    let mut y = Tensor::zeros(x.shape);
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * hw;
            let (mu, is) = (mean[ch] as f32, inv_std[ch]);
            for i in off..off + hw {
                let xh = (x.data[i] - mu) * is;
                xhat[i] = xh;
                y.data[i] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
    for ch in 0..c {
        running_mean[ch] = (1.0 - BN_MOMENTUM) * running_mean[ch] + BN_MOMENTUM * mean[ch] as f32;
        running_var[ch] =
            (1.0 - BN_MOMENTUM) * running_var[ch] + BN_MOMENTUM * (var[ch] * unbias) as f32;
    }
    (y, BnCache { xhat, inv_std })
}

/// Evaluation-mode batch norm with running statistics.
pub fn batch_norm_eval(
    x: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    running_mean: &[f32],
    running_var: &[f32],
) -> Tensor {
    let c = x.c();
    let hw = x.hw();
    let scale: Vec<f32> = (0..c)
        .map(|ch| gamma[ch] / ((running_var[ch] as f64 + BN_EPS).sqrt() as f32))
        .collect();
    let shift: Vec<f32> = (0..c)
        .map(|ch| beta[ch] - running_mean[ch] * scale[ch])
        .collect();
    let mut y = x.clone();
    for (i, plane) in y.data.chunks_mut(hw).enumerate() {
        let ch = i % c;
        plane
            .iter_mut()
            .for_each(|v| *v = *v * scale[ch] + shift[ch]);
    }
    y
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batch_norm_backward(
    dy: &Tensor,
    gamma: &[f32],
    cache: &BnCache,
) -> (Tensor, Vec<f32>, Vec<f32>) {
    let [n, c, _, _] = dy.shape;
    let hw = dy.hw();
    let m = (n * hw) as f64;
    let mut sum_dy = vec![0.0f64; c];
    let mut sum_dy_xhat = vec![0.0f64; c];
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * hw;
            for i in off..off + hw {
                sum_dy[ch] += dy.data[i] as f64;
                sum_dy_xhat[ch] += (dy.data[i] * cache.xhat[i]) as f64;
            }
        }
    }
    let mut dx = Tensor::zeros(dy.shape);
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * hw;
            let k = gamma[ch] * cache.inv_std[ch] / m as f32;
            let (a, b) = ((sum_dy[ch]) as f32, sum_dy_xhat[ch] as f32);
            for i in off..off + hw {
                dx.data[i] = k * (m as f32 * dy.data[i] - a - cache.xhat[i] * b);
            }
        }
    }
    let dgamma = sum_dy_xhat.iter().map(|&v| v as f32).collect();
    let dbeta = sum_dy.iter().map(|&v| v as f32).collect();
    (dx, dgamma, dbeta)
}

pub fn relu_inplace(x: &mut Tensor) {
    x.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Gradient through ReLU given its output.
pub fn relu_backward_inplace(dy: &mut Tensor, out: &Tensor) {
    dy.data.iter_mut().zip(&out.data).for_each(|(d, &o)| {
        if o <= 0.0 {
            *d = 0.0
        }
    });
}

/// 2×2 max pooling, stride 2. Returns the pooled tensor and the winning offset
/// (0..4, first maximum) of every output cell.
pub fn max_pool2(x: &Tensor) -> (Tensor, Vec<u8>) {
    let [n, c, h, w] = x.shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut arg = vec![0u8; out.data.len()];
    for p in 0..n * c {
        let src = &x.data[p * h * w..][..h * w];
        for y in 0..oh {
            for xx in 0..ow {
                let o = p * oh * ow + y * ow + xx;
                let mut best = f32::NEG_INFINITY;
                let mut best_k = 0u8;
                for k in 0..4u8 {
                    let v = src[(2 * y + (k as usize >> 1)) * w + 2 * xx + (k as usize & 1)];
                    if v > best {
                        best = v;
                        best_k = k;
                    }
                }
                out.data[o] = best;
                arg[o] = best_k;
            }
        }
    }
    (out, arg)
}

pub fn max_pool2_backward(dy: &Tensor, arg: &[u8], in_shape: [usize; 4]) -> Tensor {
    let [n, c, h, w] = in_shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = Tensor::zeros(in_shape);
    for p in 0..n * c {
        for y in 0..oh {
            for xx in 0..ow {
                let o = p * oh * ow + y * ow + xx;
                let k = arg[o] as usize;
                dx.data[p * h * w + (2 * y + (k >> 1)) * w + 2 * xx + (k & 1)] += dy.data[o];
            }
        }
    }
    dx
}

/// Nearest-neighbor 2× upsampling.
pub fn upsample2(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.shape;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    for p in 0..n * c {
        let src = &x.data[p * h * w..][..h * w];
        let dst = &mut out.data[p * oh * ow..][..oh * ow];
        for y in 0..oh {
            for xx in 0..ow {
                dst[y * ow + xx] = src[(y / 2) * w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(dy: &Tensor) -> Tensor {
    let [n, c, oh, ow] = dy.shape;
    let (h, w) = (oh / 2, ow / 2);
    let mut dx = Tensor::zeros([n, c, h, w]);
    for p in 0..n * c {
        let src = &dy.data[p * oh * ow..][..oh * ow];
        let dst = &mut dx.data[p * h * w..][..h * w];
        for y in 0..oh {
            for xx in 0..ow {
                dst[(y / 2) * w + xx / 2] += src[y * ow + xx];
            }
        }
    }
    dx
}

/// Channel concatenation `[a, b]`.
pub fn concat(a: &Tensor, b: &Tensor) -> Tensor {
    let [n, ca, h, w] = a.shape;
    let cb = b.c();
    debug_assert_eq!((b.n(), b.shape[2], b.shape[3]), (n, h, w));
    let mut out = Tensor::zeros([n, ca + cb, h, w]);
    let (la, lb) = (a.sample_len(), b.sample_len());
    for s in 0..n {
        let dst = &mut out.data[s * (la + lb)..][..la + lb];
        dst[..la].copy_from_slice(&a.data[s * la..][..la]);
        dst[la..].copy_from_slice(&b.data[s * lb..][..lb]);
    }
    out
}

/// Split a gradient of [`concat`] back into its two parts.
pub fn split(d: &Tensor, ca: usize) -> (Tensor, Tensor) {
    let [n, c, h, w] = d.shape;
    let cb = c - ca;
    let (la, lb) = (ca * h * w, cb * h * w);
    let mut a = Tensor::zeros([n, ca, h, w]);
    let mut b = Tensor::zeros([n, cb, h, w]);
    for s in 0..n {
        let src = &d.data[s * (la + lb)..][..la + lb];
        a.data[s * la..][..la].copy_from_slice(&src[..la]);
        b.data[s * lb..][..lb].copy_from_slice(&src[la..]);
    }
    (a, b)
}

/// Largest f32 strictly below one.
const ONE_MINUS: f32 = 1.0 - f32::EPSILON / 2.0;

/// Logistic sigmoid kept strictly inside `(0, 1)`.
pub fn sigmoid(z: f32) -> f32 {
    let p = 1.0 / (1.0 + (-(z as f64)).exp());
    (p as f32).clamp(f32::MIN_POSITIVE, ONE_MINUS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(
            shape,
            (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        )
    }

    fn naive_conv(x: &Tensor, w: &[f32], cout: usize, k: usize) -> Tensor {
        let [n, cin, h, wd] = x.shape;
        let pad = (k / 2) as isize;
        let mut out = Tensor::zeros([n, cout, h, wd]);
        for s in 0..n {
            for co in 0..cout {
                for y in 0..h {
                    for xx in 0..wd {
                        let mut acc = 0.0f64;
                        for ci in 0..cin {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let sy = y as isize + ky as isize - pad;
                                    let sx = xx as isize + kx as isize - pad;
                                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize {
                                        continue;
                                    }
                                    acc += (w[((co * cin + ci) * k + ky) * k + kx]
                                        * x.data
                                            [((s * cin + ci) * h + sy as usize) * wd + sx as usize])
                                        as f64;
                                }
                            }
                        }
                        out.data[((s * cout + co) * h + y) * wd + xx] = acc as f32;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in [1, 3] {
            let x = rand_tensor([2, 3, 5, 7], &mut rng);
            let w: Vec<f32> = (0..4 * 3 * k * k)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let got = conv2d(&x, &w, None, 4, k);
            let want = naive_conv(&x, &w, 4, k);
            for (a, b) in got.data.iter().zip(&want.data) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    /// `<conv(x), dy>` is linear in both `x` and `w`, so the backward pass must
    /// satisfy `<dy, conv(x')> = <dx, x'>` and the analogous identity for weights.
    #[test]
    fn conv_backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in [1, 3] {
            let x = rand_tensor([2, 3, 4, 6], &mut rng);
            let w: Vec<f32> = (0..5 * 3 * k * k)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let dy = rand_tensor([2, 5, 4, 6], &mut rng);
            let (dx, dw, db) = conv2d_backward(&x, &w, &dy, k, true, true);
            let dx = dx.unwrap();
            let dot = |a: &[f32], b: &[f32]| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (*x as f64) * (*y as f64))
                    .sum::<f64>()
            };
            let y = conv2d(&x, &w, None, 5, k);
            let lhs = dot(&y.data, &dy.data);
            assert!((lhs - dot(&dx.data, &x.data)).abs() < 1e-3 * lhs.abs().max(1.0));
            assert!((lhs - dot(&dw, &w)).abs() < 1e-3 * lhs.abs().max(1.0));
            let total: f64 = dy.data.iter().map(|&v| v as f64).sum();
            assert!((db.unwrap().iter().map(|&v| v as f64).sum::<f64>() - total).abs() < 1e-3);
        }
    }

    #[test]
    fn pool_and_upsample_round_trip() {
        let x = Tensor::from_vec([1, 1, 2, 4], vec![1., 5., 2., 2., 3., 4., 9., 0.]);
        let (p, arg) = max_pool2(&x);
        assert_eq!(p.data, vec![5., 9.]);
        let dx = max_pool2_backward(&Tensor::from_vec([1, 1, 1, 2], vec![1., 2.]), &arg, x.shape);
        assert_eq!(dx.data, vec![0., 1., 0., 0., 0., 0., 2., 0.]);
        let up = upsample2(&p);
        assert_eq!(up.data, vec![5., 5., 9., 9., 5., 5., 9., 9.]);
        assert_eq!(upsample2_backward(&up).data, vec![20., 36.]);
    }

    #[test]
    fn concat_split_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_tensor([3, 2, 2, 2], &mut rng);
        let b = rand_tensor([3, 4, 2, 2], &mut rng);
        let (a2, b2) = split(&concat(&a, &b), 2);
        assert_eq!((a2, b2), (a, b));
    }

    #[test]
    fn batch_norm_normalizes_and_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_tensor([3, 2, 3, 3], &mut rng);
        let gamma = vec![1.5, 0.5];
        let beta = vec![0.1, -0.2];
        let (mut rm, mut rv) = (vec![0.0; 2], vec![1.0; 2]);
        let (y, cache) = batch_norm_train(&x, &gamma, &beta, &mut rm, &mut rv);
        let hw = 9;
        for ch in 0..2 {
            let vals: Vec<f64> = (0..3)
                .flat_map(|s| y.data[(s * 2 + ch) * hw..][..hw].to_vec())
                .map(|v| v as f64)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((mean - beta[ch] as f64).abs() < 1e-5);
        }
        let dy = rand_tensor(y.shape, &mut rng);
        let (dx, _, _) = batch_norm_backward(&dy, &gamma, &cache);
        let f = |x: &Tensor| {
            let (mut a, mut b) = (vec![0.0; 2], vec![1.0; 2]);
            let (y, _) = batch_norm_train(x, &gamma, &beta, &mut a, &mut b);
            y.data
                .iter()
                .zip(&dy.data)
                .map(|(p, q)| (*p as f64) * (*q as f64))
                .sum::<f64>()
        };
        for i in [0, 5, 17, 40] {
            let h = 1e-2;
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let num = (f(&xp) - f(&xm)) / (2.0 * h as f64);
            assert!(
                (num - dx.data[i] as f64).abs() < 2e-2 * num.abs().max(1.0),
                "{num} vs {}",
                dx.data[i]
            );
        }
    }

    #[test]
    fn sigmoid_stays_open() {
        assert!(sigmoid(100.0) < 1.0);
        assert!(sigmoid(-200.0) > 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
