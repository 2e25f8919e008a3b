//! Loading subject directories into memory.

use std::collections::BTreeMap;
use std::path::Path;

use wmseg_core::io::{load_masks, load_peaks, load_scalar, save_masks, save_peaks, save_scalar};
use wmseg_core::prep::{normalize_peaks, prepare_subject, SubjectRecord};
use wmseg_core::resample::{resample_masks, resample_peaks, resample_scalar, Interpolation};
use wmseg_core::{BundleMaskSet, PeakVolume, ScalarVolume};

use crate::config::PreprocessSection;
use crate::error::Result;
use crate::layout::{ensure_dir, list_subjects, SubjectDir, MASKS_FILE, PEAKS_FILE};

fn target(pre: &PreprocessSection) -> Option<[f64; 3]> {
    (pre.voxel_size > 0.0).then_some([pre.voxel_size; 3])
}

/// Peaks with NaN zeroed and norms capped, resampled with cubic interpolation when
/// a target voxel size is set.
pub fn prepare_peaks(peaks: &PeakVolume, pre: &PreprocessSection) -> Result<PeakVolume> {
    let clean = normalize_peaks(peaks);
    Ok(match target(pre) {
        Some(t) if t != peaks.grid().voxel_size() => {
            normalize_peaks(&resample_peaks(&clean, t, Interpolation::Cubic)?)
        }
        _ => clean,
    })
}

pub fn prepare_brain(brain: &ScalarVolume, pre: &PreprocessSection) -> Result<ScalarVolume> {
    Ok(match target(pre) {
        Some(t) if t != brain.grid().voxel_size() => {
            resample_scalar(brain, t, Interpolation::Nearest)?
        }
        _ => brain.clone(),
    })
}

pub fn prepare_masks(masks: &BundleMaskSet, pre: &PreprocessSection) -> Result<BundleMaskSet> {
    Ok(match target(pre) {
        Some(t) if t != masks.grid().voxel_size() => {
            resample_masks(masks, t, Interpolation::Nearest)?
        }
        _ => masks.clone(),
    })
}

/// Full preprocessing of one raw subject directory.
pub fn preprocess_subject(sd: &SubjectDir, pre: &PreprocessSection) -> Result<SubjectRecord> {
    let peaks = prepare_peaks(&load_peaks(&sd.peaks())?, pre)?;
    let masks = prepare_masks(&load_masks(&sd.masks())?, pre)?;
    let brain = match sd.brain().is_file() {
        true => Some(prepare_brain(&load_scalar(&sd.brain())?, pre)?),
        false => None,
    };
    Ok(prepare_subject(
        &sd.id,
        &peaks,
        &masks,
        brain,
        pre.binarize_threshold,
    )?)
}

/// A directory written by [`save_record`], loaded without further processing.
pub fn load_record(sd: &SubjectDir) -> Result<SubjectRecord> {
    Ok(SubjectRecord::new(
        sd.id.clone(),
        load_peaks(&sd.peaks())?,
        load_masks(&sd.masks())?,
        load_scalar(&sd.brain())?,
    )?)
}

pub fn save_record(rec: &SubjectRecord, root: &Path) -> Result<SubjectDir> {
    let sd = SubjectDir::new(root, &rec.subject_id);
    ensure_dir(&sd.dir)?;
    save_peaks(&rec.peaks, &sd.peaks())?;
    save_masks(&rec.masks, &sd.masks())?;
    save_scalar(&rec.brain_mask, &sd.brain())?;
    Ok(sd)
}

/// Training cohort: the preprocessed directory when present, otherwise the data
/// root preprocessed in memory.
pub fn load_cohort(
    preprocessed: &Path,
    data_root: &Path,
    pre: &PreprocessSection,
) -> Result<Vec<SubjectRecord>> {
    if preprocessed.is_dir() {
        list_subjects(preprocessed, PEAKS_FILE)?
            .iter()
            .map(load_record)
            .collect()
    } else {
        list_subjects(data_root, PEAKS_FILE)?
            .iter()
            .map(|sd| preprocess_subject(sd, pre))
            .collect()
    }
}

/// Every `<root>/<subject>/<file>` mask set, keyed by subject.
pub fn load_mask_sets(root: &Path, file: &str) -> Result<BTreeMap<String, BundleMaskSet>> {
    list_subjects(root, file)?
        .into_iter()
        .map(|sd| Ok((sd.id.clone(), load_masks(&sd.dir.join(file))?)))
        .collect()
}

/// Reference masks for evaluation.
pub fn load_references(root: &Path) -> Result<BTreeMap<String, BundleMaskSet>> {
    load_mask_sets(root, MASKS_FILE)
}

/// Write `<root>/<subject>/masks.nii.gz` and its sidecar.
pub fn save_mask_set(root: &Path, subject: &str, masks: &BundleMaskSet) -> Result<()> {
    save_named_masks(root, subject, MASKS_FILE, masks)
}

pub fn save_named_masks(
    root: &Path,
    subject: &str,
    file: &str,
    masks: &BundleMaskSet,
) -> Result<()> {
    let sd = SubjectDir::new(root, subject);
    ensure_dir(&sd.dir)?;
    Ok(save_masks(masks, &sd.dir.join(file))?)
}
