//! Zero padding of 2-D slices to network-friendly sizes, and its inverse.

use ndarray::{s, Array3, ArrayView3};

use crate::{Error, Result};

/// Where the original slice sits inside its padded copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRecord {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl CropRecord {
    pub fn is_identity(&self, padded_h: usize, padded_w: usize) -> bool {
        self.top == 0 && self.left == 0 && self.height == padded_h && self.width == padded_w
    }

    /// Cut the original region back out of an `H'×W'×C` array.
    pub fn crop(&self, padded: ArrayView3<f32>) -> Array3<f32> {
        padded
            .slice(s![
                self.top..self.top + self.height,
                self.left..self.left + self.width,
                ..
            ])
            .to_owned()
    }
}

/// Smallest multiple of `multiple` that is at least `n`.
pub fn next_multiple(n: usize, multiple: usize) -> usize {
    n.div_ceil(multiple) * multiple
}

/// Zero-pad an `H×W×C` slice so both spatial sizes are multiples of `multiple`.
/// Padding is split evenly with the odd voxel on the high side.
pub fn pad_to_multiple(
    slice: ArrayView3<f32>,
    multiple: usize,
) -> Result<(Array3<f32>, CropRecord)> {
    if multiple == 0 {
        return Err(Error::Invalid("padding multiple must be at least 1".into()));
    }
    let (h, w, c) = slice.dim();
    let (ph, pw) = (next_multiple(h, multiple), next_multiple(w, multiple));
    let rec = CropRecord {
        top: (ph - h) / 2,
        left: (pw - w) / 2,
        height: h,
        width: w,
    };
    let mut out = Array3::zeros((ph, pw, c));
    out.slice_mut(s![rec.top..rec.top + h, rec.left..rec.left + w, ..])
        .assign(&slice);
    Ok((out, rec))
}
