//! Data model and analysis toolkit for 2D U-Net white-matter bundle segmentation.
//!
//! The crate covers everything around the network itself:
//!
//! * [`volume`], [`nifti`], [`io`], [`resample`], [`pad`]: grid-aware volumes and their
//!   on-disk form.
//! * [`prep`]: peak normalization, mask binarization and axial slice extraction.
//! * [`metrics`]: voxel agreement between predicted and reference masks.
//! * [`tractometry`]: bundle shape measures from masks and streamlines.
//! * [`stats`]: Wilcoxon signed-rank, Benjamini-Hochberg and Cohen's d.
//! * [`bundles`]: bundle catalogs, merge rules and 60-channel atlas assembly.
//! * [`phantom`]: synthetic subjects with analytic ground truth.

pub mod bundles;
pub mod error;
pub mod io;
pub mod metrics;
pub mod morphology;
pub mod nifti;
pub mod pad;
pub mod phantom;
pub mod prep;
pub mod resample;
pub mod stats;
pub mod tractometry;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{BundleMaskSet, PeakVolume, ScalarVolume, VoxelGrid};
