//! Pipeline configuration.
//!
//! Values resolve as command-line flag, then environment (for the two roots),
//! then config file, then built-in default. The resolved configuration is
//! written next to each command's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wmseg_core::phantom::DropRule;
use wmseg_core::stats::{Alternative, CompareOptions, FdrFamily};
use wmseg_train::TrainHyper;
use wmseg_unet::UNetConfig;

use crate::error::{CliError, Result};

pub const ENV_DATA_ROOT: &str = "WMSEG_DATA_ROOT";
pub const ENV_OUTPUT_ROOT: &str = "WMSEG_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub phantom: PhantomSection,
    pub preprocess: PreprocessSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_root: PathBuf,
    pub output_root: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_root: PathBuf::from("data"),
            output_root: PathBuf::from("output"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomLayout {
    /// Three tubes with distinct orientations.
    Tubes,
    /// Sixteen thin tubes named after the expert catalog.
    Expert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub n_subjects: usize,
    pub seed: u64,
    pub layout: PhantomLayout,
    pub control_jitter: f64,
    pub noise_sigma: f64,
    pub streamlines_per_bundle: usize,
    pub streamline_jitter: f64,
    pub drops: Vec<DropRule>,
    /// Also write a synthetic TractSeg-style output per subject.
    pub tractseg: bool,
}

impl Default for PhantomSection {
    fn default() -> Self {
        PhantomSection {
            n_subjects: 10,
            seed: 7,
            layout: PhantomLayout::Tubes,
            control_jitter: 1.0,
            noise_sigma: 0.1,
            streamlines_per_bundle: 20,
            streamline_jitter: 0.5,
            drops: Vec::new(),
            tractseg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    /// Target isotropic voxel size in millimeters; `0` keeps the native grid.
    pub voxel_size: f64,
    pub binarize_threshold: f32,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            voxel_size: 1.0,
            binarize_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub base_width: usize,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = UNetConfig::default();
        ModelSection {
            base_width: d.base_width,
            seed: d.seed,
        }
    }
}

impl ModelSection {
    pub fn unet(&self, out_channels: usize) -> UNetConfig {
        UNetConfig {
            in_channels: 9,
            out_channels,
            base_width: self.base_width,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub k: usize,
    pub fold_seed: u64,
    pub lr: f32,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let h = TrainHyper::default();
        TrainingSection {
            k: 5,
            fold_seed: 0,
            lr: h.lr,
            max_epochs: h.max_epochs,
            patience: h.patience,
            min_delta: h.min_delta,
            batch_size: h.batch_size,
            shuffle_seed: h.seed,
        }
    }
}

impl TrainingSection {
    pub fn hyper(&self) -> TrainHyper {
        TrainHyper {
            lr: self.lr,
            max_epochs: self.max_epochs,
            patience: self.patience,
            min_delta: self.min_delta,
            batch_size: self.batch_size,
            seed: self.shuffle_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    PerMetric,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternativeName {
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub alpha: f64,
    pub fdr_family: FamilyName,
    pub alternative: AlternativeName,
    pub adjacency_radius: usize,
    /// Bundles missing in more than this fraction of subjects are excluded.
    pub cohort_exclusion_fraction: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            alpha: 0.05,
            fdr_family: FamilyName::PerMetric,
            alternative: AlternativeName::TwoSided,
            adjacency_radius: 1,
            cohort_exclusion_fraction: 1.0 / 3.0,
        }
    }
}

impl EvaluationSection {
    pub fn compare_options(&self) -> CompareOptions {
        CompareOptions {
            alpha: self.alpha,
            family: match self.fdr_family {
                FamilyName::PerMetric => FdrFamily::PerMetric,
                FamilyName::Global => FdrFamily::Global,
            },
            alternative: match self.alternative {
                AlternativeName::TwoSided => Alternative::TwoSided,
                AlternativeName::Greater => Alternative::Greater,
                AlternativeName::Less => Alternative::Less,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Metric shown in the box plot.
    pub box_metric: String,
    pub title: String,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            box_metric: "dice".into(),
            title: "Bundle segmentation".into(),
        }
    }
}


impl PipelineConfig {
    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        PipelineConfig::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// File config (or defaults), then environment overrides for the roots.
    pub fn resolve(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<PipelineConfig> {
        let mut cfg = match file {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = env(ENV_DATA_ROOT).filter(|v| !v.is_empty()) {
            cfg.paths.data_root = PathBuf::from(v);
        }
        if let Some(v) = env(ENV_OUTPUT_ROOT).filter(|v| !v.is_empty()) {
            cfg.paths.output_root = PathBuf::from(v);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.preprocess.voxel_size >= 0.0 && self.preprocess.voxel_size.is_finite()) {
            return bad(format!(
                "preprocess.voxel_size must be ≥ 0, got {}",
                self.preprocess.voxel_size
            ));
        }
        if !(0.0..=1.0).contains(&self.preprocess.binarize_threshold) {
            return bad(format!(
                "preprocess.binarize_threshold must be in [0, 1], got {}",
                self.preprocess.binarize_threshold
            ));
        }
        if !(self.evaluation.alpha > 0.0 && self.evaluation.alpha < 1.0) {
            return bad(format!(
                "evaluation.alpha must be in (0, 1), got {}",
                self.evaluation.alpha
            ));
        }
        if !(0.0..=1.0).contains(&self.evaluation.cohort_exclusion_fraction) {
            return bad("evaluation.cohort_exclusion_fraction must be in [0, 1]".into());
        }
        if self.training.k < 2 {
            return bad(format!(
                "training.k must be at least 2, got {}",
                self.training.k
            ));
        }
        self.model
            .unet(1)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.training
            .hyper()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Apply `section.key=value` overrides. Values are read as TOML and fall back
    /// to plain strings.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<()> {
        if sets.is_empty() {
            return Ok(());
        }
        let mut doc = toml::Table::try_from(&*self).map_err(|e| CliError::Config(e.to_string()))?;
        for set in sets {
            let (key, raw) = set
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{set}` is not key=value")))?;
            let (section, field) = key.trim().split_once('.').ok_or_else(|| {
                CliError::Config(format!("override key `{key}` is not section.key"))
            })?;
            let value = parse_value(raw.trim());
            let table = doc
                .get_mut(section)
                .and_then(|t| t.as_table_mut())
                .ok_or_else(|| CliError::Config(format!("unknown config section `{section}`")))?;
            table.insert(field.to_string(), value);
        }
        *self = PipelineConfig::parse(
            &toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?,
        )?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Write the effective configuration of `command` under the output root, with
    /// the invocation as a leading comment.
    pub fn persist(&self, command: &str, invocation: &str) -> Result<PathBuf> {
        let dir = self.paths.output_root.join("config");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let path = dir.join(format!("{command}.toml"));
        let text = format!("# {}\n{}", invocation.replace('\n', " "), self.to_toml());
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
