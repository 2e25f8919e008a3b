//! Turning subject volumes into network samples.

use ndarray::{s, Array3, Axis, Zip};

use crate::volume::peak_norm;
use crate::{BundleMaskSet, Error, PeakVolume, Result, ScalarVolume};

/// Volumes whose largest peak norm is within this of 1 are treated as already
/// normalized and returned unchanged, which makes normalization exactly idempotent
/// despite f32 storage.
const UNIT_TOLERANCE: f64 = 1e-6;

/// Replace NaN (and infinite) components with zero, then scale every component by the
/// inverse of the volume-wide maximum peak norm.
pub fn normalize_peaks(peaks: &PeakVolume) -> PeakVolume {
    let mut out = peaks.clone();
    out.data_mut()
        .mapv_inplace(|v| if v.is_finite() { v } else { 0.0 });
    let max = out.max_peak_magnitude();
    if max == 0.0 {
        return out;
    }
    if (max - 1.0).abs() > UNIT_TOLERANCE {
        out.data_mut().mapv_inplace(|v| (v as f64 / max) as f32);
    }
    out
}

/// Threshold masks: values at or above `threshold` become 1, the rest 0.
pub fn binarize_masks(masks: &BundleMaskSet, threshold: f32) -> BundleMaskSet {
    let (grid, channels, mut data, valid) = masks.clone().into_parts();
    data.mapv_inplace(|v| if v >= threshold { 1.0 } else { 0.0 });
    BundleMaskSet::new(grid, channels, data, valid).expect("binarized masks stay valid")
}

/// Brain support: voxels where any peak has nonzero magnitude.
pub fn brain_mask_from_peaks(peaks: &PeakVolume) -> ScalarVolume {
    let data = peaks.data().map_axis(Axis(3), |v| {
        if v.iter().any(|&x| x != 0.0 && !x.is_nan()) {
            1.0
        } else {
            0.0
        }
    });
    ScalarVolume::new(*peaks.grid(), data).expect("shape follows peaks")
}

/// One subject's co-registered inputs and references.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub peaks: PeakVolume,
    pub masks: BundleMaskSet,
    pub brain_mask: ScalarVolume,
}

impl SubjectRecord {
    pub fn new(
        subject_id: impl Into<String>,
        peaks: PeakVolume,
        masks: BundleMaskSet,
        brain_mask: ScalarVolume,
    ) -> Result<Self> {
        let rec = SubjectRecord {
            subject_id: subject_id.into(),
            peaks,
            masks,
            brain_mask,
        };
        rec.check_grids()?;
        Ok(rec)
    }

    pub fn check_grids(&self) -> Result<()> {
        let what = format!("subject {}", self.subject_id);
        self.peaks
            .grid()
            .check_same(self.masks.grid(), &format!("{what} peaks/masks"))?;
        self.peaks
            .grid()
            .check_same(self.brain_mask.grid(), &format!("{what} peaks/brain mask"))
    }
}

/// One axial slice, laid out `[x, y, channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSample {
    pub subject_id: String,
    pub slice_index: usize,
    pub input: Array3<f32>,
    pub target: Array3<f32>,
    pub loss_mask: Array3<f32>,
    pub used_in_training: bool,
}

/// Every axial slice of a subject, in order.
///
/// A slice is training-eligible when its target has at least one positive voxel in
/// a valid channel. The loss mask is the brain mask in valid channels and zero in
/// invalid ones.
pub fn extract_slices(subject: &SubjectRecord) -> Result<Vec<SliceSample>> {
    subject.check_grids()?;
    let [nx, ny, nz] = subject.peaks.grid().shape();
    let masks = &subject.masks;
    let c = masks.n_channels();
    if subject.peaks.data().iter().any(|v| v.is_nan()) {
        return Err(Error::Invalid(format!(
            "subject {}: peaks contain NaN; normalize first",
            subject.subject_id
        )));
    }

    let mut out = Vec::with_capacity(nz);
    for z in 0..nz {
        let input = subject.peaks.data().slice(s![.., .., z, ..]).to_owned();
        let target = masks.data().slice(s![.., .., z, ..]).to_owned();
        let brain = subject.brain_mask.data().slice(s![.., .., z]);
        let mut loss_mask = Array3::<f32>::zeros((nx, ny, c));
        for ch in (0..c).filter(|&ch| masks.is_valid(ch)) {
            Zip::from(loss_mask.index_axis_mut(Axis(2), ch))
                .and(&brain)
                .for_each(|m, &b| *m = if b >= 0.5 { 1.0 } else { 0.0 });
        }
        let used_in_training = (0..c)
            .filter(|&ch| masks.is_valid(ch))
            .any(|ch| target.index_axis(Axis(2), ch).iter().any(|&v| v >= 0.5));
        out.push(SliceSample {
            subject_id: subject.subject_id.clone(),
            slice_index: z,
            input,
            target,
            loss_mask,
            used_in_training,
        });
    }
    Ok(out)
}

/// Peak normalization plus mask binarization, with the brain mask derived from peak
/// support when none is given.
pub fn prepare_subject(
    subject_id: &str,
    peaks: &PeakVolume,
    masks: &BundleMaskSet,
    brain_mask: Option<ScalarVolume>,
    threshold: f32,
) -> Result<SubjectRecord> {
    let peaks = normalize_peaks(peaks);
    let masks = binarize_masks(masks, threshold);
    let brain = match brain_mask {
        Some(b) => b,
        None => brain_mask_from_peaks(&peaks),
    };
    SubjectRecord::new(subject_id, peaks, masks, brain)
}

/// Largest peak norm of one voxel.
pub fn voxel_peak_magnitude(v: &[f32]) -> f64 {
    (0..3)
        .map(|p| peak_norm([v[3 * p], v[3 * p + 1], v[3 * p + 2]]))
        .fold(0.0, f64::max)
}
