//! Slice-wise inference and 3D reconstruction.

use ndarray::{s, Array4, Axis, Zip};
use wmseg_core::pad::pad_to_multiple;
use wmseg_core::prep::SubjectRecord;
use wmseg_core::{BundleMaskSet, PeakVolume, ScalarVolume};
use wmseg_unet::{forward, UNet, SIZE_MULTIPLE};

use crate::{Error, Result};

/// Slices forwarded together during inference.
pub const INFER_BATCH: usize = 16;

/// Sigmoid probabilities for every axial slice, `[x, y, z, C]`.
pub fn predict_probabilities(net: &UNet, peaks: &PeakVolume) -> Result<Array4<f32>> {
    let cfg = net.config();
    let [nx, ny, nz] = peaks.grid().shape();
    if cfg.in_channels != peaks.data().dim().3 {
        return Err(Error::Invalid(format!(
            "model expects {} input channels, peaks have {}",
            cfg.in_channels,
            peaks.data().dim().3
        )));
    }
    if peaks.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(
            "peaks contain non-finite values; normalize first".into(),
        ));
    }
    let mut out = Array4::<f32>::zeros((nx, ny, nz, cfg.out_channels));
    let slices: Vec<usize> = (0..nz).collect();
    for chunk in slices.chunks(INFER_BATCH) {
        let mut batch = None;
        let mut crop = None;
        for (b, &z) in chunk.iter().enumerate() {
            let (padded, rec) =
                pad_to_multiple(peaks.data().slice(s![.., .., z, ..]), SIZE_MULTIPLE)?;
            let x = batch.get_or_insert_with(|| {
                let (ph, pw, c) = padded.dim();
                Array4::<f32>::zeros((chunk.len(), ph, pw, c))
            });
            x.index_axis_mut(Axis(0), b).assign(&padded);
            crop = Some(rec);
        }
        let (Some(x), Some(rec)) = (batch, crop) else {
            continue;
        };
        let probs = forward(net, x.view())?;
        for (b, &z) in chunk.iter().enumerate() {
            out.slice_mut(s![.., .., z, ..])
                .assign(&rec.crop(probs.index_axis(Axis(0), b)));
        }
    }
    Ok(out)
}

/// Binary prediction (probability ≥ 0.5) with the given channel names. Voxels
/// outside `brain` are background and stay zero. Every predicted channel is
/// marked valid.
pub fn infer_peaks(
    net: &UNet,
    peaks: &PeakVolume,
    brain: Option<&ScalarVolume>,
    channels: Vec<String>,
) -> Result<BundleMaskSet> {
    if channels.len() != net.config().out_channels {
        return Err(Error::Invalid(format!(
            "{} channel names for a model with {} outputs",
            channels.len(),
            net.config().out_channels
        )));
    }
    if let Some(b) = brain {
        if b.grid() != peaks.grid() {
            return Err(Error::Invalid(
                "brain mask and peaks are on different grids".into(),
            ));
        }
    }
    let probs = predict_probabilities(net, peaks)?;
    let mut binary = probs.mapv(|p| if p >= 0.5 { 1.0 } else { 0.0 });
    if let Some(b) = brain {
        for mut ch in binary.axis_iter_mut(Axis(3)) {
            Zip::from(&mut ch).and(b.data()).for_each(|v, &m| {
                if m < 0.5 {
                    *v = 0.0;
                }
            });
        }
    }
    let valid = vec![true; channels.len()];
    Ok(BundleMaskSet::new(*peaks.grid(), channels, binary, valid)?)
}

/// Predict a subject's bundles inside its brain mask, named after its reference
/// channels.
pub fn infer_subject(net: &UNet, subject: &SubjectRecord) -> Result<BundleMaskSet> {
    subject.check_grids()?;
    infer_peaks(
        net,
        &subject.peaks,
        Some(&subject.brain_mask),
        subject.masks.channels().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;
    use wmseg_core::VoxelGrid;
    use wmseg_unet::UNetConfig;

    fn net(out: usize) -> UNet {
        UNet::new(UNetConfig {
            out_channels: out,
            base_width: 2,
            ..Default::default()
        })
        .unwrap()
    }

    fn peaks(shape: [usize; 3]) -> PeakVolume {
        let grid = VoxelGrid::isotropic(shape, 1.0).unwrap();
        let data = Array4::from_shape_fn((shape[0], shape[1], shape[2], 9), |(i, j, k, c)| {
            (((i * 7 + j * 3 + k * 5 + c) % 11) as f32 / 11.0) - 0.5
        });
        PeakVolume::new(grid, data).unwrap()
    }

    #[test]
    fn reconstruction_has_subject_shape() {
        let names = vec!["a".to_string(), "b".to_string()];
        let p = peaks([20, 13, 19]);
        let m = infer_peaks(&net(2), &p, None, names.clone()).unwrap();
        assert_eq!(m.data().dim(), (20, 13, 19, 2));
        assert!(m.is_binary());
        let empty = ScalarVolume::zeros(*p.grid());
        let masked = infer_peaks(&net(2), &p, Some(&empty), names).unwrap();
        assert!(masked.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn restacking_is_order_exact() {
        let n = net(1);
        let p = peaks([16, 16, 21]);
        let full = predict_probabilities(&n, &p).unwrap();
        for z in [0, 7, 16, 20] {
            let x = p
                .data()
                .slice(s![.., .., z, ..])
                .insert_axis(Axis(0))
                .to_owned();
            let one = forward(&n, x.view()).unwrap();
            let diff =
                (&one.index_axis(Axis(0), 0) - &full.slice(s![.., .., z, ..])).mapv(f32::abs);
            assert!(diff.iter().all(|&d| d <= 1e-5));
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        assert!(infer_peaks(&net(2), &peaks([16, 16, 2]), None, vec!["a".into()]).is_err());
    }
}
