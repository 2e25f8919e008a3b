//! Grid-aware volume types.
//!
//! Arrays are indexed `[x, y, z]` (plus a trailing channel axis for 4-D data) in
//! standard row-major layout. The world coordinate of voxel `(i, j, k)` is
//! `origin + (i·sx, j·sy, k·sz)`; axes are never rotated or flipped.

use std::collections::HashSet;

use ndarray::{Array3, Array4, ArrayView3, ArrayViewMut3, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of values per voxel in a peak volume: three peaks of three components.
pub const PEAK_CHANNELS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct VoxelGrid {
    shape: [usize; 3],
    voxel_size: [f64; 3],
    origin: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    shape: [usize; 3],
    voxel_size: [f64; 3],
    #[serde(default)]
    origin: [f64; 3],
}

impl TryFrom<GridRepr> for VoxelGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        VoxelGrid::new(r.shape, r.voxel_size, r.origin)
    }
}

impl From<VoxelGrid> for GridRepr {
    fn from(g: VoxelGrid) -> Self {
        GridRepr {
            shape: g.shape,
            voxel_size: g.voxel_size,
            origin: g.origin,
        }
    }
}

impl VoxelGrid {
    pub fn new(shape: [usize; 3], voxel_size: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Invalid(format!(
                "grid shape {shape:?} has an empty axis"
            )));
        }
        if voxel_size.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Invalid(format!(
                "voxel size {voxel_size:?} must be finite and strictly positive"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Invalid(format!("origin {origin:?} is not finite")));
        }
        Ok(VoxelGrid {
            shape,
            voxel_size,
            origin,
        })
    }

    /// Isotropic grid with its origin at zero.
    pub fn isotropic(shape: [usize; 3], voxel_size: f64) -> Result<Self> {
        Self::new(shape, [voxel_size; 3], [0.0; 3])
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn n_voxels(&self) -> usize {
        self.shape.iter().product()
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.voxel_size.iter().product()
    }

    /// World position (mm) of a voxel center.
    pub fn world(&self, index: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|a| self.origin[a] + index[a] as f64 * self.voxel_size[a])
    }

    /// Continuous voxel coordinates of a world point; `None` when outside the grid's
    /// voxel-center box.
    pub fn to_voxel(&self, point: [f64; 3]) -> Option<[f64; 3]> {
        let v: [f64; 3] = std::array::from_fn(|a| (point[a] - self.origin[a]) / self.voxel_size[a]);
        let inside = (0..3).all(|a| v[a] >= 0.0 && v[a] <= (self.shape[a] - 1) as f64);
        inside.then_some(v)
    }

    /// Physical size covered by the grid, counting each voxel's full width.
    pub fn extent(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.shape[a] as f64 * self.voxel_size[a])
    }

    pub(crate) fn check_same(&self, other: &VoxelGrid, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::GridMismatch(format!(
                "{what}: shape {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let close = |a: [f64; 3], b: [f64; 3]| (0..3).all(|i| (a[i] - b[i]).abs() <= 1e-4);
        if !close(self.voxel_size, other.voxel_size) {
            return Err(Error::GridMismatch(format!(
                "{what}: voxel size {:?} vs {:?}",
                self.voxel_size, other.voxel_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    grid: VoxelGrid,
    data: Array3<f32>,
}

impl ScalarVolume {
    pub fn new(grid: VoxelGrid, data: Array3<f32>) -> Result<Self> {
        let [nx, ny, nz] = grid.shape();
        if data.dim() != (nx, ny, nz) {
            return Err(Error::GridMismatch(format!(
                "scalar data {:?} does not match grid {:?}",
                data.dim(),
                grid.shape()
            )));
        }
        Ok(ScalarVolume { grid, data })
    }

    pub fn zeros(grid: VoxelGrid) -> Self {
        let [nx, ny, nz] = grid.shape();
        ScalarVolume {
            grid,
            data: Array3::zeros((nx, ny, nz)),
        }
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f32> {
        &mut self.data
    }

    pub fn into_data(self) -> Array3<f32> {
        self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakVolume {
    grid: VoxelGrid,
    data: Array4<f32>,
}

impl PeakVolume {
    pub fn new(grid: VoxelGrid, data: Array4<f32>) -> Result<Self> {
        let [nx, ny, nz] = grid.shape();
        let (dx, dy, dz, dc) = data.dim();
        if dc != PEAK_CHANNELS {
            return Err(Error::Invalid(format!(
                "peak volume needs {PEAK_CHANNELS} channels, got {dc}"
            )));
        }
        if (dx, dy, dz) != (nx, ny, nz) {
            return Err(Error::GridMismatch(format!(
                "peak data {:?} does not match grid {:?}",
                (dx, dy, dz),
                grid.shape()
            )));
        }
        Ok(PeakVolume { grid, data })
    }

    pub fn zeros(grid: VoxelGrid) -> Self {
        let [nx, ny, nz] = grid.shape();
        PeakVolume {
            grid,
            data: Array4::zeros((nx, ny, nz, PEAK_CHANNELS)),
        }
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn data(&self) -> &Array4<f32> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array4<f32> {
        &mut self.data
    }

    /// Largest peak vector norm over the whole volume.
    pub fn max_peak_magnitude(&self) -> f64 {
        self.data
            .lanes(Axis(3))
            .into_iter()
            .map(|v| {
                (0..3)
                    .map(|p| peak_norm([v[3 * p], v[3 * p + 1], v[3 * p + 2]]))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Multi-channel bundle masks sharing one grid, with per-channel validity.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleMaskSet {
    grid: VoxelGrid,
    channels: Vec<String>,
    data: Array4<f32>,
    valid: Vec<bool>,
}

impl BundleMaskSet {
    pub fn new(
        grid: VoxelGrid,
        channels: Vec<String>,
        data: Array4<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let [nx, ny, nz] = grid.shape();
        let (dx, dy, dz, dc) = data.dim();
        if (dx, dy, dz) != (nx, ny, nz) {
            return Err(Error::GridMismatch(format!(
                "mask data {:?} does not match grid {:?}",
                (dx, dy, dz),
                grid.shape()
            )));
        }
        if channels.len() != dc || valid.len() != dc {
            return Err(Error::Invalid(format!(
                "mask set has {dc} channels but {} names and {} validity flags",
                channels.len(),
                valid.len()
            )));
        }
        check_unique(&channels)?;
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("mask values must lie in [0, 1]".into()));
        }
        Ok(BundleMaskSet {
            grid,
            channels,
            data,
            valid,
        })
    }

    /// All-zero, all-valid masks for the given channel names.
    pub fn zeros(grid: VoxelGrid, channels: Vec<String>) -> Result<Self> {
        let [nx, ny, nz] = grid.shape();
        let c = channels.len();
        Self::new(
            grid,
            channels,
            Array4::zeros((nx, ny, nz, c)),
            vec![true; c],
        )
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn data(&self) -> &Array4<f32> {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, channel: usize) -> bool {
        self.valid[channel]
    }

    pub fn set_valid(&mut self, channel: usize, valid: bool) {
        self.valid[channel] = valid;
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn channel(&self, index: usize) -> ArrayView3<'_, f32> {
        self.data.index_axis(Axis(3), index)
    }

    /// Mutable view of one channel. Callers must keep values in `[0, 1]`.
    pub fn channel_mut(&mut self, index: usize) -> ArrayViewMut3<'_, f32> {
        self.data.index_axis_mut(Axis(3), index)
    }

    pub fn channel_by_name(&self, name: &str) -> Result<ArrayView3<'_, f32>> {
        let i = self
            .channel_index(name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))?;
        Ok(self.channel(i))
    }

    /// Number of voxels at or above 0.5 in a channel.
    pub fn positive_count(&self, index: usize) -> usize {
        self.channel(index).iter().filter(|&&v| v >= 0.5).count()
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn into_parts(self) -> (VoxelGrid, Vec<String>, Array4<f32>, Vec<bool>) {
        (self.grid, self.channels, self.data, self.valid)
    }
}

/// Euclidean norm of one peak vector, accumulated in f64.
pub fn peak_norm(v: [f32; 3]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::Invalid(format!("duplicate channel name `{n}`")));
        }
    }
    Ok(())
}
