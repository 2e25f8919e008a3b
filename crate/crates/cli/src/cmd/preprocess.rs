use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::layout::{list_subjects, OutputLayout, PEAKS_FILE};
use crate::subjects::{preprocess_subject, save_record};

#[derive(Debug, Clone, Serialize)]
pub struct PreprocessedSubject {
    pub id: String,
    pub shape: [usize; 3],
    /// Axial slices with at least one positive reference voxel.
    pub training_slices: usize,
}

/// Resample, normalize and binarize every subject of the data root into
/// `<output>/preprocessed`.
pub fn preprocess(cfg: &PipelineConfig) -> Result<Vec<PreprocessedSubject>> {
    let out = OutputLayout::new(&cfg.paths.output_root).preprocessed();
    let mut done = Vec::new();
    for sd in list_subjects(&cfg.paths.data_root, PEAKS_FILE)? {
        let rec = preprocess_subject(&sd, &cfg.preprocess)?;
        let training_slices = wmseg_core::prep::extract_slices(&rec)?
            .iter()
            .filter(|s| s.used_in_training)
            .count();
        save_record(&rec, &out)?;
        done.push(PreprocessedSubject {
            id: rec.subject_id.clone(),
            shape: rec.peaks.grid().shape(),
            training_slices,
        });
    }
    Ok(done)
}
