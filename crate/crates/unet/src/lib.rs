//! Four-level 2D U-Net for multi-label segmentation, trained with a masked
//! soft Dice loss and Adamax.
//!
//! Public entry points take `[batch, height, width, channels]` arrays; the
//! kernels run on NCHW buffers internally. Height and width must be multiples
//! of [`SIZE_MULTIPLE`].

pub mod checkpoint;
mod error;
pub mod loss;
pub mod model;
pub mod ops;
pub mod optim;

use ndarray::{Array4, ArrayView4};

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use loss::{masked_dice_loss, DICE_EPS};
pub use model::{ModelWeights, NamedTensor, UNet, UNetConfig, SIZE_MULTIPLE};
pub use ops::Tensor;
pub use optim::Adamax;

/// Copies a `[b, h, w, c]` array into an NCHW tensor.
pub fn bhwc_to_tensor(x: ArrayView4<f32>) -> Tensor {
    let (b, h, w, c) = x.dim();
    let data = x.permuted_axes([0, 3, 1, 2]).iter().copied().collect();
    Tensor::from_vec([b, c, h, w], data)
}

/// Inverse of [`bhwc_to_tensor`].
pub fn tensor_to_bhwc(t: &Tensor) -> Array4<f32> {
    let [n, c, h, w] = t.shape;
    let nchw = Array4::from_shape_vec((n, c, h, w), t.data.clone()).expect("tensor length");
    nchw.permuted_axes([0, 2, 3, 1])
        .as_standard_layout()
        .to_owned()
}

/// Evaluation-mode probabilities for a `[b, h, w, in_channels]` batch.
pub fn forward(net: &UNet, x: ArrayView4<f32>) -> Result<Array4<f32>> {
    let out = net.forward_nchw(&bhwc_to_tensor(x))?;
    Ok(tensor_to_bhwc(&out))
}

/// One optimizer step on a batch. Returns the loss before the update.
pub fn train_step(
    net: &mut UNet,
    opt: &mut Adamax,
    x: ArrayView4<f32>,
    target: ArrayView4<f32>,
    mask: ArrayView4<f32>,
) -> Result<f64> {
    let (b, h, w, _) = x.dim();
    let c_out = net.config().out_channels;
    if target.dim() != (b, h, w, c_out) || mask.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "input {:?} needs target and mask of {:?}, got {:?} and {:?}",
            x.dim(),
            (b, h, w, c_out),
            target.dim(),
            mask.dim()
        )));
    }
    let tape = net.forward_train(&bhwc_to_tensor(x))?;
    let probs = tape.probabilities();
    let (loss, grad) = loss::masked_dice_nchw(
        &probs.data,
        &bhwc_to_tensor(target).data,
        &bhwc_to_tensor(mask).data,
        probs.shape,
    )?;
    let mut grads = net.zero_gradients();
    net.backward(&tape, &Tensor::from_vec(probs.shape, grad), &mut grads);
    opt.step(net.weights_mut(), &grads);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    #[test]
    fn layout_conversion_round_trips() {
        let a = Array4::from_shape_fn((2, 3, 4, 5), |(b, i, j, c)| {
            (b * 1000 + i * 100 + j * 10 + c) as f32
        });
        let t = bhwc_to_tensor(a.view());
        assert_eq!(t.shape, [2, 5, 3, 4]);
        assert_eq!(t.data[12 + 2 * 4 + 3], 231.0);
        assert_eq!(tensor_to_bhwc(&t), a);
    }

    #[test]
    fn training_reduces_loss_on_a_fixed_batch() {
        let cfg = UNetConfig {
            in_channels: 9,
            out_channels: 2,
            base_width: 2,
            seed: 3,
        };
        let mut net = UNet::new(cfg).unwrap();
        let mut opt = Adamax::new(1e-2);
        let x = Array4::from_shape_fn((2, 16, 16, 9), |(b, i, j, c)| {
            if c == (i / 8) * 3 {
                1.0
            } else {
                0.05 * ((b + i + j + c) % 5) as f32
            }
        });
        let target =
            Array4::from_shape_fn((2, 16, 16, 2), |(_, i, _, c)| ((i / 8) == c) as u8 as f32);
        let mask = Array4::ones(target.dim());
        let first = train_step(&mut net, &mut opt, x.view(), target.view(), mask.view()).unwrap();
        let mut last = first;
        for _ in 0..40 {
            last = train_step(&mut net, &mut opt, x.view(), target.view(), mask.view()).unwrap();
        }
        assert!(last < first - 0.1, "{first} → {last}");
        let p = forward(&net, x.view()).unwrap();
        assert_eq!(p.dim(), (2, 16, 16, 2));
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn train_step_checks_shapes() {
        let mut net = UNet::new(UNetConfig {
            base_width: 1,
            out_channels: 2,
            ..Default::default()
        })
        .unwrap();
        let mut opt = Adamax::new(1e-3);
        let x = Array4::zeros((1, 16, 16, 9));
        let bad = Array4::zeros((1, 16, 16, 3));
        assert!(train_step(&mut net, &mut opt, x.view(), bad.view(), bad.view()).is_err());
    }
}
