use std::path::{Path, PathBuf};

use serde::Serialize;
use wmseg_core::io::{load_peaks, load_scalar};
use wmseg_core::prep::brain_mask_from_peaks;
use wmseg_train::{infer_peaks, FoldPlan};
use wmseg_unet::Checkpoint;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::layout::{list_subjects, read_text, OutputLayout, PEAKS_FILE};
use crate::subjects::{prepare_brain, prepare_peaks, save_mask_set};

#[derive(Debug, Clone, Default)]
pub struct InferArgs {
    /// Defaults to the fold checkpoint with the highest validation Dice.
    pub checkpoint: Option<PathBuf>,
    /// Directory of subject directories; defaults to the data root.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InferSummary {
    pub checkpoint: PathBuf,
    pub subjects: Vec<String>,
}

/// Best fold by validation Dice; ties go to the lower fold.
pub fn best_checkpoint(out: &OutputLayout) -> Result<PathBuf> {
    let plan = FoldPlan::load(&out.folds())?;
    let mut best: Option<(f64, PathBuf)> = None;
    for k in 0..plan.k {
        let path = out.checkpoint(k);
        let dice = Checkpoint::load(&path)?
            .val_dice
            .unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(d, _)| dice > *d) {
            best = Some((dice, path));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| CliError::Usage("no trained folds; run `train` first".into()))
}

fn channel_names(out: &OutputLayout, n: usize) -> Result<Vec<String>> {
    let path = out.channels();
    let names: Vec<String> = if path.is_file() {
        serde_json::from_str(&read_text(&path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        (0..n).map(|c| format!("channel_{c}")).collect()
    };
    if names.len() != n {
        return Err(CliError::Config(format!(
            "{} lists {} channels but the model predicts {n}",
            path.display(),
            names.len()
        )));
    }
    Ok(names)
}

/// Predict masks for every subject directory with a peaks image. Peaks go through
/// the same normalization and resampling as training data.
pub fn infer(cfg: &PipelineConfig, args: &InferArgs) -> Result<InferSummary> {
    let out = OutputLayout::new(&cfg.paths.output_root);
    let checkpoint = match &args.checkpoint {
        Some(p) => p.clone(),
        None => best_checkpoint(&out)?,
    };
    let net = Checkpoint::load(&checkpoint)?.into_model()?;
    let names = channel_names(&out, net.config().out_channels)?;
    let input: &Path = args.input.as_deref().unwrap_or(&cfg.paths.data_root);
    let mut subjects = Vec::new();
    for sd in list_subjects(input, PEAKS_FILE)? {
        let peaks = prepare_peaks(&load_peaks(&sd.peaks())?, &cfg.preprocess)?;
        let brain = match sd.brain().is_file() {
            true => prepare_brain(&load_scalar(&sd.brain())?, &cfg.preprocess)?,
            false => brain_mask_from_peaks(&peaks),
        };
        let pred = infer_peaks(&net, &peaks, Some(&brain), names.clone())?;
        save_mask_set(&out.inference(), &sd.id, &pred)?;
        subjects.push(sd.id);
    }
    Ok(InferSummary {
        checkpoint,
        subjects,
    })
}
