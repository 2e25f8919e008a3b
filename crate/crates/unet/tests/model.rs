use ndarray::{Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmseg_unet::{forward, masked_dice_loss, train_step, Adamax, Checkpoint, UNet, UNetConfig};

fn cfg(out: usize) -> UNetConfig {
    UNetConfig {
        in_channels: 9,
        out_channels: out,
        base_width: 2,
        seed: 5,
    }
}

/// A disc target with inputs that encode it in channel 0.
fn toy_batch(b: usize) -> (Array4<f32>, Array4<f32>, Array4<f32>) {
    let mut x = Array4::<f32>::zeros((b, 16, 16, 9));
    let mut t = Array4::<f32>::zeros((b, 16, 16, 1));
    for n in 0..b {
        let (ci, cj) = (6.0 + n as f32, 8.0);
        for i in 0..16 {
            for j in 0..16 {
                if (i as f32 - ci).powi(2) + (j as f32 - cj).powi(2) <= 9.0 {
                    t[[n, i, j, 0]] = 1.0;
                    x[[n, i, j, 0]] = 1.0;
                }
                x[[n, i, j, 3]] = 0.2;
            }
        }
    }
    let m = Array4::ones(t.dim());
    (x, t, m)
}

#[test]
fn probabilities_have_input_geometry_and_range() {
    let net = UNet::new(cfg(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array4::from_shape_simple_fn((2, 32, 48, 9), || rng.random_range(-1.0f32..1.0));
    let y = forward(&net, x.view()).unwrap();
    assert_eq!(y.dim(), (2, 32, 48, 3));
    assert!(y.iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn sizes_off_the_pooling_grid_are_rejected() {
    let net = UNet::new(cfg(1)).unwrap();
    assert!(forward(&net, Array4::<f32>::zeros((1, 20, 16, 9)).view()).is_err());
    assert!(forward(&net, Array4::<f32>::zeros((1, 16, 16, 4)).view()).is_err());
}

#[test]
fn batch_items_are_independent_in_eval_mode() {
    let net = UNet::new(cfg(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Array4::from_shape_simple_fn((3, 16, 16, 9), || rng.random_range(-1.0f32..1.0));
    let all = forward(&net, x.view()).unwrap();
    let one = forward(&net, x.slice(ndarray::s![1..2, .., .., ..])).unwrap();
    let diff = (&all.index_axis(Axis(0), 1) - &one.index_axis(Axis(0), 0)).mapv(f32::abs);
    assert!(diff.iter().all(|&d| d < 1e-5));
}

#[test]
fn repeated_steps_fit_a_single_batch() {
    let mut net = UNet::new(UNetConfig {
        base_width: 4,
        ..cfg(1)
    })
    .unwrap();
    let mut opt = Adamax::new(1e-2);
    let (x, t, m) = toy_batch(4);
    let first = train_step(&mut net, &mut opt, x.view(), t.view(), m.view()).unwrap();
    let mut last = first;
    for _ in 0..150 {
        last = train_step(&mut net, &mut opt, x.view(), t.view(), m.view()).unwrap();
    }
    assert!(last < 0.5 * first, "loss {first} -> {last}");
    let p = forward(&net, x.view()).unwrap();
    assert!(masked_dice_loss(p.view(), t.view(), m.view()).unwrap() < first);
}

#[test]
fn masked_voxels_do_not_move_the_weights() {
    let (x, t, _) = toy_batch(2);
    let m = Array4::<f32>::zeros(t.dim());
    let mut net = UNet::new(cfg(1)).unwrap();
    let before = net.weights().clone();
    let mut opt = Adamax::new(1e-2);
    let loss = train_step(&mut net, &mut opt, x.view(), t.view(), m.view()).unwrap();
    assert_eq!(loss, 0.0);
    // Batch-norm running statistics still update; trainable tensors must not.
    for (a, b) in before.tensors.iter().zip(&net.weights().tensors) {
        if a.trainable {
            assert_eq!(a.data, b.data, "{} changed", a.name);
        }
    }
}

#[test]
fn checkpoint_file_round_trip_preserves_predictions() {
    let mut net = UNet::new(cfg(2)).unwrap();
    let mut opt = Adamax::new(1e-3);
    let (x, _, _) = toy_batch(2);
    let t = Array4::<f32>::zeros((2, 16, 16, 2));
    let m = Array4::<f32>::ones(t.dim());
    train_step(&mut net, &mut opt, x.view(), t.view(), m.view()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    Checkpoint::from_model(&net, 1, Some(0.5))
        .save(&path)
        .unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.epoch, 1);
    assert_eq!(back.val_dice, Some(0.5));
    let restored = back.into_model().unwrap();
    assert_eq!(
        forward(&net, x.view()).unwrap(),
        forward(&restored, x.view()).unwrap()
    );

    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes.truncate(last);
    assert!(Checkpoint::decode(&bytes).is_err());
}
