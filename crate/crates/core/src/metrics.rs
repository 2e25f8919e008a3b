//! Voxel agreement between predicted and reference bundle masks.
//!
//! Voxels at or above 0.5 count as positive. Every metric returns `None` when its
//! denominator is empty; undefined values are never reported as zero.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{ArrayView3, Zip};
use serde::Serialize;

use crate::morphology::{dilate_cube, to_bool};
use crate::stats::MetricTable;
use crate::{BundleMaskSet, Error, Result};

/// Names of the four agreement metrics, in CSV column order.
pub const METRIC_NAMES: [&str; 4] = ["dice", "overlap", "overreach", "adjacency"];

/// Set sizes shared by all four metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OverlapCounts {
    pub pred: usize,
    pub reference: usize,
    pub intersection: usize,
    pub pred_outside_ref: usize,
    pub pred_near_ref: usize,
}

impl OverlapCounts {
    pub fn dice(&self) -> Option<f64> {
        let denom = self.pred + self.reference;
        (denom > 0).then(|| 2.0 * self.intersection as f64 / denom as f64)
    }

    pub fn overlap(&self) -> Option<f64> {
        (self.reference > 0).then(|| self.intersection as f64 / self.reference as f64)
    }

    pub fn overreach(&self) -> Option<f64> {
        (self.reference > 0).then(|| self.pred_outside_ref as f64 / self.reference as f64)
    }

    pub fn adjacency(&self) -> Option<f64> {
        (self.pred > 0).then(|| self.pred_near_ref as f64 / self.pred as f64)
    }
}

fn check_shapes(pred: &ArrayView3<f32>, reference: &ArrayView3<f32>) -> Result<()> {
    if pred.dim() != reference.dim() {
        return Err(Error::GridMismatch(format!(
            "prediction {:?} vs reference {:?}",
            pred.dim(),
            reference.dim()
        )));
    }
    Ok(())
}

/// Count everything the metrics need in one pass.
///
/// `adjacency_radius` is the Chebyshev radius of the reference dilation used for
/// adjacency (1 = 26-connected neighbors).
pub fn overlap_counts(
    pred: ArrayView3<f32>,
    reference: ArrayView3<f32>,
    adjacency_radius: usize,
) -> Result<OverlapCounts> {
    check_shapes(&pred, &reference)?;
    let near = dilate_cube(&to_bool(reference), adjacency_radius);
    let mut c = OverlapCounts::default();
    Zip::from(&pred)
        .and(&reference)
        .and(&near)
        .for_each(|&p, &g, &n| {
            let (p, g) = (p >= 0.5, g >= 0.5);
            c.pred += p as usize;
            c.reference += g as usize;
            c.intersection += (p && g) as usize;
            c.pred_outside_ref += (p && !g) as usize;
            c.pred_near_ref += (p && n) as usize;
        });
    Ok(c)
}

/// `2|P∩G| / (|P|+|G|)`.
pub fn dice(pred: ArrayView3<f32>, reference: ArrayView3<f32>) -> Result<Option<f64>> {
    check_shapes(&pred, &reference)?;
    let (mut p, mut g, mut i) = (0usize, 0usize, 0usize);
    Zip::from(&pred).and(&reference).for_each(|&a, &b| {
        let (a, b) = (a >= 0.5, b >= 0.5);
        p += a as usize;
        g += b as usize;
        i += (a && b) as usize;
    });
    let denom = p + g;
    Ok((denom > 0).then(|| 2.0 * i as f64 / denom as f64))
}

/// Fraction of the reference covered by the prediction, `|P∩G| / |G|`.
pub fn volume_overlap(pred: ArrayView3<f32>, reference: ArrayView3<f32>) -> Result<Option<f64>> {
    Ok(overlap_counts(pred, reference, 0)?.overlap())
}

/// Prediction spill outside the reference, relative to reference size: `|P\G| / |G|`.
pub fn volume_overreach(pred: ArrayView3<f32>, reference: ArrayView3<f32>) -> Result<Option<f64>> {
    Ok(overlap_counts(pred, reference, 0)?.overreach())
}

/// Fraction of predicted voxels within one voxel (26-connectivity) of the reference.
pub fn adjacency(pred: ArrayView3<f32>, reference: ArrayView3<f32>) -> Result<Option<f64>> {
    Ok(overlap_counts(pred, reference, 1)?.adjacency())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskComparison {
    pub subject: String,
    pub bundle: String,
    pub dice: Option<f64>,
    pub overlap: Option<f64>,
    pub overreach: Option<f64>,
    pub adjacency: Option<f64>,
}

impl MaskComparison {
    pub fn values(&self) -> [Option<f64>; 4] {
        [self.dice, self.overlap, self.overreach, self.adjacency]
    }
}

/// Compare one subject's predicted and reference channel.
pub fn compare_masks(
    subject: &str,
    bundle: &str,
    pred: ArrayView3<f32>,
    reference: ArrayView3<f32>,
    adjacency_radius: usize,
) -> Result<MaskComparison> {
    let c = overlap_counts(pred, reference, adjacency_radius)?;
    Ok(MaskComparison {
        subject: subject.to_string(),
        bundle: bundle.to_string(),
        dice: c.dice(),
        overlap: c.overlap(),
        overreach: c.overreach(),
        adjacency: c.adjacency(),
    })
}

/// One row per `(subject, bundle)` whose reference channel exists and is valid.
///
/// A prediction channel flagged invalid (the method produced nothing) is scored as an
/// empty prediction. A bundle missing from a prediction set is an error.
pub fn evaluate_cohort(
    preds: &BTreeMap<String, BundleMaskSet>,
    refs: &BTreeMap<String, BundleMaskSet>,
    bundles: &[String],
    adjacency_radius: usize,
) -> Result<Vec<MaskComparison>> {
    if preds.keys().ne(refs.keys()) {
        let only_pred: Vec<_> = preds.keys().filter(|k| !refs.contains_key(*k)).collect();
        let only_ref: Vec<_> = refs.keys().filter(|k| !preds.contains_key(*k)).collect();
        return Err(Error::Invalid(format!(
            "subject sets differ: only predicted {only_pred:?}, only referenced {only_ref:?}"
        )));
    }
    let mut rows = Vec::new();
    for (subject, reference) in refs {
        let pred = &preds[subject];
        reference
            .grid()
            .check_same(pred.grid(), &format!("subject {subject}"))?;
        for bundle in bundles {
            let Some(ri) = reference.channel_index(bundle) else {
                continue;
            };
            if !reference.is_valid(ri) {
                continue;
            }
            let pi = pred.channel_index(bundle).ok_or_else(|| {
                Error::MissingChannel(format!("{bundle} (prediction for {subject})"))
            })?;
            let row = if pred.is_valid(pi) {
                compare_masks(
                    subject,
                    bundle,
                    pred.channel(pi),
                    reference.channel(ri),
                    adjacency_radius,
                )?
            } else {
                let empty = ndarray::Array3::<f32>::zeros(reference.channel(ri).dim());
                compare_masks(
                    subject,
                    bundle,
                    empty.view(),
                    reference.channel(ri),
                    adjacency_radius,
                )?
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Cohort rows as a generic metric table keyed by `(subject, bundle)`.
pub fn comparisons_to_table(rows: &[MaskComparison]) -> MetricTable {
    let mut t = MetricTable::new(METRIC_NAMES.iter().map(|s| s.to_string()).collect());
    for r in rows {
        t.insert(&r.subject, &r.bundle, r.values().to_vec())
            .expect("four metrics per row");
    }
    t
}

/// Write `subject,bundle,dice,overlap,overreach,adjacency` with empty cells for
/// undefined values.
pub fn write_cohort_csv<W: Write>(rows: &[MaskComparison], out: W) -> Result<()> {
    comparisons_to_table(rows).write_csv(out)
}
