use std::path::Path;

use ndarray::{s, Array4};
use serde::Serialize;
use wmseg_core::bundles::BundleCatalog;
use wmseg_core::io::{save_masks, save_peaks, save_scalar};
use wmseg_core::phantom::{
    default_spec, expert_spec, generate_cohort, generate_streamlines, CohortMember, CohortOptions,
};
use wmseg_core::tractometry::write_streamlines;
use wmseg_core::BundleMaskSet;

use crate::config::{PhantomLayout, PipelineConfig};
use crate::error::{CliError, Result};
use crate::layout::{create_file, ensure_dir, write_text, SubjectDir};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct ManifestSubject {
    pub id: String,
    pub seed: u64,
    /// Bundles removed from this subject's references.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub shape: [usize; 3],
    pub voxel_size: [f64; 3],
    pub bundles: Vec<String>,
    pub subjects: Vec<ManifestSubject>,
}

/// Write `n_subjects` phantom subjects under the data root.
pub fn generate_phantom(cfg: &PipelineConfig) -> Result<Manifest> {
    let p = &cfg.phantom;
    if p.n_subjects == 0 {
        return Err(CliError::Usage(
            "generate-phantom needs at least one subject".into(),
        ));
    }
    let catalog = BundleCatalog::builtin();
    let mut base = match p.layout {
        PhantomLayout::Tubes => default_spec(p.seed),
        PhantomLayout::Expert => expert_spec(&catalog.expert_16, p.seed)?,
    };
    base.noise_sigma = p.noise_sigma;
    let members = generate_cohort(
        &base,
        &CohortOptions {
            n_subjects: p.n_subjects,
            seed: p.seed,
            control_jitter: p.control_jitter,
            drops: p.drops.clone(),
        },
    )?;

    let root = &cfg.paths.data_root;
    ensure_dir(root)?;
    let mut subjects = Vec::with_capacity(members.len());
    for m in &members {
        write_member(m, root, cfg, &catalog)?;
        let masks = &m.record.masks;
        subjects.push(ManifestSubject {
            id: m.record.subject_id.clone(),
            seed: m.spec.seed,
            dropped: (0..masks.n_channels())
                .filter(|&c| !masks.is_valid(c))
                .map(|c| masks.channels()[c].clone())
                .collect(),
        });
    }
    let manifest = Manifest {
        seed: p.seed,
        shape: base.grid.shape(),
        voxel_size: base.grid.voxel_size(),
        bundles: base.bundle_names(),
        subjects,
    };
    write_text(
        &root.join(MANIFEST_FILE),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}

fn write_member(
    m: &CohortMember,
    root: &Path,
    cfg: &PipelineConfig,
    catalog: &BundleCatalog,
) -> Result<()> {
    let rec = &m.record;
    let sd = SubjectDir::new(root, &rec.subject_id);
    ensure_dir(&sd.dir)?;
    save_peaks(&rec.peaks, &sd.peaks())?;
    save_masks(&rec.masks, &sd.masks())?;
    save_scalar(&rec.brain_mask, &sd.brain())?;
    for (b, name) in m.spec.bundle_names().iter().enumerate() {
        let c = rec.masks.channel_index(name).expect("phantom channel");
        if !rec.masks.is_valid(c) {
            continue;
        }
        let lines = generate_streamlines(
            &m.spec,
            b,
            cfg.phantom.streamlines_per_bundle,
            cfg.phantom.streamline_jitter,
        )?;
        let path = sd.streamlines(name);
        let mut out = create_file(&path)?;
        write_streamlines(&lines, &mut out).map_err(|e| CliError::io(&path, e))?;
    }
    if cfg.phantom.tractseg {
        save_masks(&synthetic_tractseg(&rec.masks, catalog)?, &sd.tractseg())?;
    }
    Ok(())
}

/// A stand-in comparison method: every phantom bundle that a merge rule targets is
/// reproduced, shifted one voxel along x, in that rule's first source channel.
/// All other TractSeg channels are empty.
pub fn synthetic_tractseg(masks: &BundleMaskSet, catalog: &BundleCatalog) -> Result<BundleMaskSet> {
    let mut names: Vec<String> = Vec::new();
    for n in catalog
        .merge_rules
        .iter()
        .flat_map(|r| &r.sources)
        .chain(&catalog.tractseg_44)
    {
        if !names.contains(n) {
            names.push(n.clone());
        }
    }
    let [nx, ny, nz] = masks.grid().shape();
    let mut data = Array4::<f32>::zeros((nx, ny, nz, names.len()));
    for rule in &catalog.merge_rules {
        let Some(src) = masks.channel_index(&rule.target) else {
            continue;
        };
        let dst = names
            .iter()
            .position(|n| *n == rule.sources[0])
            .expect("source listed");
        data.slice_mut(s![1.., .., .., dst])
            .assign(&masks.channel(src).slice(s![..nx - 1, .., ..]));
    }
    let valid = vec![true; names.len()];
    Ok(BundleMaskSet::new(*masks.grid(), names, data, valid)?)
}
