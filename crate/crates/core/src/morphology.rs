//! Binary morphology on `[x, y, z]` masks.

use ndarray::{Array3, ArrayView3, Axis};

/// Positive voxels (value ≥ 0.5) as a boolean array.
pub fn to_bool(mask: ArrayView3<f32>) -> Array3<bool> {
    mask.mapv(|v| v >= 0.5)
}

/// Dilation by a cube of half-width `radius`: a voxel is set when any voxel within
/// Chebyshev distance `radius` is set. `radius = 1` is one step of 26-connected
/// dilation.
pub fn dilate_cube(mask: &Array3<bool>, radius: usize) -> Array3<bool> {
    if radius == 0 {
        return mask.clone();
    }
    // A cube is separable: dilate along each axis in turn.
    let mut cur = mask.clone();
    for a in 0..3 {
        let mut next = Array3::from_elem(cur.dim(), false);
        for (src, mut dst) in cur.lanes(Axis(a)).into_iter().zip(next.lanes_mut(Axis(a))) {
            let n = src.len();
            for (i, d) in dst.iter_mut().enumerate() {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(n - 1);
                *d = (lo..=hi).any(|j| src[j]);
            }
        }
        cur = next;
    }
    cur
}
