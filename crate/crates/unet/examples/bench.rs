use ndarray::Array4;
use std::time::Instant;
use wmseg_unet::{forward, train_step, Adamax, UNet, UNetConfig};
fn main() {
    let w: usize = std::env::args()
        .nth(1)
        .map(|v| v.parse().unwrap())
        .unwrap_or(8);
    let b: usize = std::env::args()
        .nth(2)
        .map(|v| v.parse().unwrap())
        .unwrap_or(8);
    let mut net = UNet::new(UNetConfig {
        base_width: w,
        out_channels: 3,
        ..Default::default()
    })
    .unwrap();
    let mut opt = Adamax::new(1e-3);
    let x = Array4::from_elem((b, 64, 64, 9), 0.3f32);
    let t = Array4::from_shape_fn((b, 64, 64, 3), |(_, i, _, _)| (i % 2) as f32);
    let m = Array4::ones(t.dim());
    let s = Instant::now();
    for _ in 0..5 {
        train_step(&mut net, &mut opt, x.view(), t.view(), m.view()).unwrap();
    }
    println!("train per slice {:?}", s.elapsed() / (5 * b as u32));
    let s = Instant::now();
    forward(&net, x.view()).unwrap();
    println!("infer per slice {:?}", s.elapsed() / b as u32);
}
