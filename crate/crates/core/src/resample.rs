//! Extent-preserving resampling to a new voxel size.
//!
//! Along each axis the input covers `[-s/2, n·s - s/2]` around its voxel centers. The
//! output keeps that span with `ceil(n·s / t)` voxels of size `t`, so no anatomy is
//! cropped. Output voxel `i` samples the input at continuous index
//! `(i + 0.5)·t/s - 0.5`; resampling to the source voxel size is therefore the
//! identity.

use ndarray::{Array4, ArrayView1, ArrayViewMut1, Axis, Zip};

use crate::io::Volume;
use crate::{BundleMaskSet, Error, PeakVolume, Result, ScalarVolume, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Nearest,
    /// Separable Catmull-Rom cubic with border clamping.
    Cubic,
}

/// Grid produced by resampling `grid` to `target` voxel size.
pub fn target_grid(grid: &VoxelGrid, target: [f64; 3]) -> Result<VoxelGrid> {
    if target.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return Err(Error::Invalid(format!(
            "target voxel size {target:?} must be positive"
        )));
    }
    let src = grid.voxel_size();
    let extent = grid.extent();
    let shape: [usize; 3] = std::array::from_fn(|a| {
        // Tolerate representation error such as 200·0.78 = 156.00000000000003.
        ((extent[a] / target[a]) - 1e-9).ceil().max(1.0) as usize
    });
    let origin: [f64; 3] =
        std::array::from_fn(|a| grid.origin()[a] - 0.5 * src[a] + 0.5 * target[a]);
    VoxelGrid::new(shape, target, origin)
}

/// Catmull-Rom weights for taps at offsets -1, 0, 1, 2 and fractional position `t`.
pub fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

enum Taps {
    Nearest(Vec<usize>),
    Cubic(Vec<([usize; 4], [f64; 4])>),
}

fn taps(n_in: usize, n_out: usize, ratio: f64, mode: Interpolation) -> Taps {
    let clamp = |i: isize| i.clamp(0, n_in as isize - 1) as usize;
    let pos = |i: usize| (i as f64 + 0.5) * ratio - 0.5;
    match mode {
        Interpolation::Nearest => Taps::Nearest(
            (0..n_out)
                .map(|i| clamp((pos(i) + 0.5).floor() as isize))
                .collect(),
        ),
        Interpolation::Cubic => Taps::Cubic(
            (0..n_out)
                .map(|i| {
                    let u = pos(i);
                    let base = u.floor();
                    let b = base as isize;
                    let idx = [clamp(b - 1), clamp(b), clamp(b + 1), clamp(b + 2)];
                    (idx, catmull_rom_weights(u - base))
                })
                .collect(),
        ),
    }
}

fn resample_lane(input: ArrayView1<f32>, mut output: ArrayViewMut1<f32>, taps: &Taps) {
    match taps {
        Taps::Nearest(idx) => {
            for (o, &i) in output.iter_mut().zip(idx) {
                *o = input[i];
            }
        }
        Taps::Cubic(t) => {
            for (o, (idx, w)) in output.iter_mut().zip(t) {
                let v: f64 = (0..4).map(|k| w[k] * input[idx[k]] as f64).sum();
                *o = v as f32;
            }
        }
    }
}

/// Resample a `[x, y, z, c]` array channel-wise.
pub fn resample_array(
    data: &Array4<f32>,
    grid: &VoxelGrid,
    target: [f64; 3],
    mode: Interpolation,
) -> Result<(Array4<f32>, VoxelGrid)> {
    let out_grid = target_grid(grid, target)?;
    let mut cur = data.clone();
    for a in 0..3 {
        let n_in = cur.shape()[a];
        let n_out = out_grid.shape()[a];
        let ratio = target[a] / grid.voxel_size()[a];
        if n_in == n_out && ratio == 1.0 {
            continue;
        }
        let t = taps(n_in, n_out, ratio, mode);
        let mut shape = [
            cur.shape()[0],
            cur.shape()[1],
            cur.shape()[2],
            cur.shape()[3],
        ];
        shape[a] = n_out;
        let mut next = Array4::<f32>::zeros(shape);
        Zip::from(next.lanes_mut(Axis(a)))
            .and(cur.lanes(Axis(a)))
            .for_each(|o, i| resample_lane(i, o, &t));
        cur = next;
    }
    Ok((cur, out_grid))
}

pub fn resample_scalar(
    v: &ScalarVolume,
    target: [f64; 3],
    mode: Interpolation,
) -> Result<ScalarVolume> {
    let data = v.data().clone().insert_axis(Axis(3));
    let (out, grid) = resample_array(&data, v.grid(), target, mode)?;
    ScalarVolume::new(grid, out.index_axis_move(Axis(3), 0))
}

pub fn resample_peaks(v: &PeakVolume, target: [f64; 3], mode: Interpolation) -> Result<PeakVolume> {
    let (out, grid) = resample_array(v.data(), v.grid(), target, mode)?;
    PeakVolume::new(grid, out)
}

/// Resample masks. Cubic overshoot is clipped back into `[0, 1]`.
pub fn resample_masks(
    v: &BundleMaskSet,
    target: [f64; 3],
    mode: Interpolation,
) -> Result<BundleMaskSet> {
    let (mut out, grid) = resample_array(v.data(), v.grid(), target, mode)?;
    out.mapv_inplace(|x| x.clamp(0.0, 1.0));
    BundleMaskSet::new(grid, v.channels().to_vec(), out, v.valid().to_vec())
}

pub fn resample(vol: &Volume, target: [f64; 3], mode: Interpolation) -> Result<Volume> {
    Ok(match vol {
        Volume::Scalar(v) => Volume::Scalar(resample_scalar(v, target, mode)?),
        Volume::Peaks(v) => Volume::Peaks(resample_peaks(v, target, mode)?),
        Volume::Masks(v) => Volume::Masks(resample_masks(v, target, mode)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;

    fn scalar(
        shape: [usize; 3],
        vs: [f64; 3],
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> ScalarVolume {
        let g = VoxelGrid::new(shape, vs, [0.0; 3]).unwrap();
        ScalarVolume::new(
            g,
            Array3::from_shape_fn((shape[0], shape[1], shape[2]), |(i, j, k)| f(i, j, k)),
        )
        .unwrap()
    }

    #[test]
    fn output_shape_covers_input_extent() {
        let g = VoxelGrid::new([200, 200, 119], [0.78, 0.78, 2.22], [0.0; 3]).unwrap();
        let t = target_grid(&g, [1.0; 3]).unwrap();
        // 200·0.78 = 156, 119·2.22 = 264.18
        assert_eq!(t.shape(), [156, 156, 265]);
    }

    #[test]
    fn identity_resample_is_exact_in_both_modes() {
        let v = scalar([5, 4, 3], [0.78, 0.78, 2.22], |i, j, k| {
            (i * 7 + j * 3 + k) as f32 * 0.37
        });
        for mode in [Interpolation::Nearest, Interpolation::Cubic] {
            let out = resample_scalar(&v, [0.78, 0.78, 2.22], mode).unwrap();
            assert_eq!(out.grid().shape(), v.grid().shape());
            assert_eq!(out.data(), v.data());
        }
    }

    #[test]
    fn constant_volume_stays_constant_under_cubic() {
        let v = scalar([7, 6, 5], [0.78, 0.78, 2.22], |_, _, _| 3.25);
        let out = resample_scalar(&v, [1.0; 3], Interpolation::Cubic).unwrap();
        for &x in out.data() {
            assert!((x as f64 - 3.25).abs() <= 1e-9, "{x}");
        }
    }

    #[test]
    fn cubic_identity_on_f64_weights_sums_to_one() {
        for i in 0..=20 {
            let w = catmull_rom_weights(i as f64 / 20.0);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(catmull_rom_weights(0.0), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn nearest_upsampling_by_two_duplicates_voxels() {
        let v = scalar([3, 1, 1], [2.0, 1.0, 1.0], |i, _, _| i as f32);
        let out = resample_scalar(&v, [1.0, 1.0, 1.0], Interpolation::Nearest).unwrap();
        assert_eq!(
            out.data().iter().copied().collect::<Vec<_>>(),
            vec![0., 0., 1., 1., 2., 2.]
        );
    }

    #[test]
    fn grid_origin_shifts_by_half_voxel_difference() {
        let g = VoxelGrid::new([4, 4, 4], [2.0; 3], [10.0; 3]).unwrap();
        let t = target_grid(&g, [1.0; 3]).unwrap();
        assert_eq!(t.origin(), [9.5; 3]);
        assert!(target_grid(&g, [0.0, 1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn nearest_never_invents_values(
            seed in 0u64..1000,
            tx in 0.4f64..3.0, ty in 0.4f64..3.0, tz in 0.4f64..3.0,
        ) {
            let v = scalar([6, 5, 4], [0.78, 0.78, 2.22], |i, j, k| ((i * 31 + j * 17 + k * 7 + seed as usize) % 5) as f32);
            let out = resample_scalar(&v, [tx, ty, tz], Interpolation::Nearest).unwrap();
            for x in out.data() {
                prop_assert!(v.data().iter().any(|y| y == x));
            }
        }
    }
}
