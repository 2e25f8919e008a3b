//! Masked soft Dice loss.
//!
//! For channel `c`, with sums over batch and space,
//! `L_c = 1 − (2·Σ m·p·g + ε) / (Σ m·p + Σ m·g + ε)`, and the loss is the mean of
//! `L_c` over channels. A channel whose mask is empty gives `L_c = 0`.

use crate::{Error, Result};

pub const DICE_EPS: f64 = 1e-5;

/// Loss value and `∂L/∂p`, both for a channel-major layout where element `i`
/// belongs to channel `channel_of(i)`.
fn dice_core(
    pred: &[f32],
    target: &[f32],
    mask: &[f32],
    n_channels: usize,
    channel_of: impl Fn(usize) -> usize,
) -> Result<(f64, Vec<f32>)> {
    if pred.len() != target.len() || pred.len() != mask.len() {
        return Err(Error::Shape(format!(
            "prediction, target and mask sizes differ: {}, {}, {}",
            pred.len(),
            target.len(),
            mask.len()
        )));
    }
    if n_channels == 0 {
        return Err(Error::Shape("loss needs at least one channel".into()));
    }
    let binary = |v: f32| v == 0.0 || v == 1.0;
    if !target.iter().all(|&v| binary(v)) {
        return Err(Error::Value("target values must be 0 or 1".into()));
    }
    if !mask.iter().all(|&v| binary(v)) {
        return Err(Error::Value("loss mask values must be 0 or 1".into()));
    }
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("prediction contains non-finite values".into()));
    }

    let mut inter = vec![0.0f64; n_channels];
    let mut sum = vec![0.0f64; n_channels];
    for i in 0..pred.len() {
        if mask[i] == 0.0 {
            continue;
        }
        let c = channel_of(i);
        let (p, g) = (pred[i] as f64, target[i] as f64);
        inter[c] += p * g;
        sum[c] += p + g;
    }
    let cf = n_channels as f64;
    let loss = (0..n_channels)
        .map(|c| 1.0 - (2.0 * inter[c] + DICE_EPS) / (sum[c] + DICE_EPS))
        .sum::<f64>()
        / cf;
    let grad = (0..pred.len())
        .map(|i| {
            if mask[i] == 0.0 {
                return 0.0;
            }
            let c = channel_of(i);
            let s = sum[c] + DICE_EPS;
            let g = target[i] as f64;
            (-(2.0 * g * s - (2.0 * inter[c] + DICE_EPS)) / (s * s) / cf) as f32
        })
        .collect();
    Ok((loss, grad))
}

/// Loss and gradient for `[n, c, h, w]` buffers.
pub fn masked_dice_nchw(
    pred: &[f32],
    target: &[f32],
    mask: &[f32],
    shape: [usize; 4],
) -> Result<(f64, Vec<f32>)> {
    let [n, c, h, w] = shape;
    if n * c * h * w != pred.len() {
        return Err(Error::Shape(format!(
            "shape {shape:?} does not match {} values",
            pred.len()
        )));
    }
    let hw = h * w;
    dice_core(pred, target, mask, c, |i| (i / hw) % c)
}

/// Loss and gradient for `[b, h, w, c]` arrays.
pub fn masked_dice_bhwc(
    pred: ndarray::ArrayView4<f32>,
    target: ndarray::ArrayView4<f32>,
    mask: ndarray::ArrayView4<f32>,
) -> Result<(f64, ndarray::Array4<f32>)> {
    if pred.dim() != target.dim() || pred.dim() != mask.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?}, target {:?} and mask {:?} differ",
            pred.dim(),
            target.dim(),
            mask.dim()
        )));
    }
    let dim = pred.dim();
    let c = dim.3;
    let (p, t, m) = (
        pred.as_standard_layout()
            .to_owned()
            .into_raw_vec_and_offset()
            .0,
        target
            .as_standard_layout()
            .to_owned()
            .into_raw_vec_and_offset()
            .0,
        mask.as_standard_layout()
            .to_owned()
            .into_raw_vec_and_offset()
            .0,
    );
    let (loss, grad) = dice_core(&p, &t, &m, c, |i| i % c)?;
    let grad = ndarray::Array4::from_shape_vec(dim, grad).expect("same element count");
    Ok((loss, grad))
}

/// Masked Dice loss on `[b, h, w, c]` arrays.
pub fn masked_dice_loss(
    pred: ndarray::ArrayView4<f32>,
    target: ndarray::ArrayView4<f32>,
    mask: ndarray::ArrayView4<f32>,
) -> Result<f64> {
    masked_dice_bhwc(pred, target, mask).map(|(l, _)| l)
}
