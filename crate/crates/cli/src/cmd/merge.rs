use std::path::PathBuf;

use serde::Serialize;
use wmseg_core::bundles::{assemble_60, merge_tractseg_masks, parse_merge_rules, BundleCatalog};
use wmseg_core::io::load_masks;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::layout::{list_subjects, read_text, OutputLayout, TRACTSEG_FILE};
use crate::subjects::{save_mask_set, save_named_masks};

pub const ATLAS_FILE: &str = "atlas60.nii.gz";

#[derive(Debug, Clone, Default)]
pub struct MergeArgs {
    /// JSON merge rules; defaults to the built-in equivalence map.
    pub rules: Option<PathBuf>,
    /// Directory of subject directories with TractSeg outputs; defaults to the data root.
    pub input: Option<PathBuf>,
    /// Also stack each subject's expert masks with the 44 appended TractSeg bundles.
    pub assemble_60: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MergedSubject {
    pub id: String,
    pub channels: usize,
    pub atlas_channels: Option<usize>,
}

/// Merge every subject's TractSeg output into expert-equivalent bundles under
/// `<output>/merged`.
pub fn merge(cfg: &PipelineConfig, args: &MergeArgs) -> Result<Vec<MergedSubject>> {
    let catalog = BundleCatalog::builtin();
    let rules = match &args.rules {
        Some(p) => parse_merge_rules(&read_text(p)?)?,
        None => catalog.merge_rules.clone(),
    };
    let out = OutputLayout::new(&cfg.paths.output_root).merged();
    let input = args.input.as_deref().unwrap_or(&cfg.paths.data_root);
    let mut done = Vec::new();
    for sd in list_subjects(input, TRACTSEG_FILE)? {
        let raw = load_masks(&sd.tractseg())?;
        let merged = merge_tractseg_masks(&raw, &rules)?;
        save_mask_set(&out, &sd.id, &merged)?;
        let atlas_channels = if args.assemble_60 {
            let atlas = assemble_60(&load_masks(&sd.masks())?, &raw, &catalog)?;
            save_named_masks(&out, &sd.id, ATLAS_FILE, &atlas)?;
            Some(atlas.n_channels())
        } else {
            None
        };
        done.push(MergedSubject {
            id: sd.id,
            channels: merged.n_channels(),
            atlas_channels,
        });
    }
    Ok(done)
}
