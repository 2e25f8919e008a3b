//! Loading and saving typed volumes.
//!
//! Mask sets carry their channel names and validity flags in a JSON sidecar next to
//! the image: `masks.nii.gz` pairs with `masks.labels.json`.

use std::path::{Path, PathBuf};

use ndarray::{Array3, Array4, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::nifti::{self, DataType, NiftiImage};
use crate::volume::{check_unique, PEAK_CHANNELS};
use crate::{BundleMaskSet, Error, PeakVolume, Result, ScalarVolume, VoxelGrid};

/// How the fourth image dimension is to be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeRole {
    Scalar,
    Peaks,
    Masks,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Scalar(ScalarVolume),
    Peaks(PeakVolume),
    Masks(BundleMaskSet),
}

impl Volume {
    pub fn grid(&self) -> &VoxelGrid {
        match self {
            Volume::Scalar(v) => v.grid(),
            Volume::Peaks(v) => v.grid(),
            Volume::Masks(v) => v.grid(),
        }
    }
}

/// Sidecar contents for a mask image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub channels: Vec<String>,
    pub valid: Vec<bool>,
}

impl Labels {
    pub fn parse(text: &str) -> Result<Labels> {
        let labels: Labels =
            serde_json::from_str(text).map_err(|e| Error::format("labels sidecar", e))?;
        if labels.channels.len() != labels.valid.len() {
            return Err(Error::format(
                "labels sidecar",
                format!(
                    "{} channels but {} validity flags",
                    labels.channels.len(),
                    labels.valid.len()
                ),
            ));
        }
        check_unique(&labels.channels)?;
        Ok(labels)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("labels serialize")
    }
}

/// `<dir>/<stem>.labels.json` for `<dir>/<stem>.nii[.gz]`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let name = image
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(&name);
    image.with_file_name(format!("{stem}.labels.json"))
}

fn grid_of(img: &NiftiImage) -> Result<VoxelGrid> {
    VoxelGrid::new(
        [img.dims[0], img.dims[1], img.dims[2]],
        img.pixdim,
        img.origin,
    )
}

fn to_array4(img: NiftiImage) -> Result<Array4<f32>> {
    let d = img.dims;
    let a = Array4::from_shape_vec((d[0], d[1], d[2], d[3]).f(), img.data)
        .map_err(|e| Error::Nifti(e.to_string()))?;
    Ok(a.as_standard_layout().into_owned())
}

fn from_array4(grid: &VoxelGrid, data: &Array4<f32>, datatype: DataType) -> NiftiImage {
    let (nx, ny, nz, nc) = data.dim();
    // File order is x fastest: iterate the reversed axes of a Fortran view.
    let fortran = data.t();
    NiftiImage {
        dims: [nx, ny, nz, nc],
        pixdim: grid.voxel_size(),
        origin: grid.origin(),
        datatype,
        data: fortran.iter().copied().collect(),
    }
}

/// Load an image in the given role. Mask sets require their labels sidecar.
pub fn load_volume(path: &Path, role: VolumeRole) -> Result<Volume> {
    let img = nifti::read_file(path)?;
    let grid = grid_of(&img)?;
    let c = img.dims[3];
    match role {
        VolumeRole::Scalar => {
            if c != 1 {
                return Err(Error::Invalid(format!(
                    "{}: expected a 3-D image, found {c} volumes",
                    path.display()
                )));
            }
            let data = to_array4(img)?;
            let data: Array3<f32> = data.index_axis_move(ndarray::Axis(3), 0);
            Ok(Volume::Scalar(ScalarVolume::new(grid, data)?))
        }
        VolumeRole::Peaks => {
            if c != PEAK_CHANNELS {
                return Err(Error::Invalid(format!(
                    "{}: peak images need {PEAK_CHANNELS} volumes, found {c}",
                    path.display()
                )));
            }
            Ok(Volume::Peaks(PeakVolume::new(grid, to_array4(img)?)?))
        }
        VolumeRole::Masks => {
            let side = sidecar_path(path);
            let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            let labels = Labels::parse(&text)?;
            if labels.channels.len() != c {
                return Err(Error::Invalid(format!(
                    "{}: sidecar names {} channels but image has {c} volumes",
                    path.display(),
                    labels.channels.len()
                )));
            }
            let data = to_array4(img)?;
            Ok(Volume::Masks(BundleMaskSet::new(
                grid,
                labels.channels,
                data,
                labels.valid,
            )?))
        }
    }
}

pub fn load_scalar(path: &Path) -> Result<ScalarVolume> {
    match load_volume(path, VolumeRole::Scalar)? {
        Volume::Scalar(v) => Ok(v),
        _ => unreachable!(),
    }
}

pub fn load_peaks(path: &Path) -> Result<PeakVolume> {
    match load_volume(path, VolumeRole::Peaks)? {
        Volume::Peaks(v) => Ok(v),
        _ => unreachable!(),
    }
}

pub fn load_masks(path: &Path) -> Result<BundleMaskSet> {
    match load_volume(path, VolumeRole::Masks)? {
        Volume::Masks(v) => Ok(v),
        _ => unreachable!(),
    }
}

fn binary(values: impl IntoIterator<Item = f32>) -> bool {
    values.into_iter().all(|v| v == 0.0 || v == 1.0)
}

/// Save a volume. Binary data is written as uint8, anything else as float32.
pub fn save_volume(vol: &Volume, path: &Path) -> Result<()> {
    if vol.grid().n_voxels() == 0 {
        return Err(Error::Invalid("refusing to write an empty volume".into()));
    }
    match vol {
        Volume::Scalar(v) => {
            let dt = if binary(v.data().iter().copied()) {
                DataType::U8
            } else {
                DataType::F32
            };
            let data = v.data().clone().insert_axis(ndarray::Axis(3));
            nifti::write_file(path, &from_array4(v.grid(), &data, dt))
        }
        Volume::Peaks(v) => {
            nifti::write_file(path, &from_array4(v.grid(), v.data(), DataType::F32))
        }
        Volume::Masks(v) => {
            let dt = if v.is_binary() {
                DataType::U8
            } else {
                DataType::F32
            };
            nifti::write_file(path, &from_array4(v.grid(), v.data(), dt))?;
            let labels = Labels {
                channels: v.channels().to_vec(),
                valid: v.valid().to_vec(),
            };
            let side = sidecar_path(path);
            std::fs::write(&side, labels.to_json()).map_err(|e| Error::io(&side, e))
        }
    }
}

pub fn save_scalar(v: &ScalarVolume, path: &Path) -> Result<()> {
    save_volume(&Volume::Scalar(v.clone()), path)
}

pub fn save_peaks(v: &PeakVolume, path: &Path) -> Result<()> {
    save_volume(&Volume::Peaks(v.clone()), path)
}

pub fn save_masks(v: &BundleMaskSet, path: &Path) -> Result<()> {
    save_volume(&Volume::Masks(v.clone()), path)
}
