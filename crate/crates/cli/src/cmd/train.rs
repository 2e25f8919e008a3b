use std::io::Write;

use serde::{Deserialize, Serialize};
use wmseg_train::{
    mean_dice, run_with_plan, CvObserver, EpochReport, FoldPlan, FoldResult, TrainHyper,
    TrainRecord,
};
use wmseg_unet::{Checkpoint, UNetConfig};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::layout::{ensure_dir, open_file, read_text, write_text, OutputLayout};
use crate::subjects::{load_cohort, save_mask_set};

/// Everything that must match for a finished fold to be reused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub model: UNetConfig,
    pub hyper: TrainHyper,
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub held_out: Vec<String>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_dice: Option<f64>,
    pub resumed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub folds: Vec<FoldSummary>,
    /// Mean Dice over every (subject, valid bundle) pair of the held-out predictions.
    pub cv_dice: Option<f64>,
}

struct Observer<'a, 'p> {
    out: &'a OutputLayout,
    settings: &'a RunSettings,
    reuse: bool,
    resumed: Vec<usize>,
    progress: Option<&'p mut dyn Write>,
}

impl CvObserver for Observer<'_, '_> {
    fn on_epoch(&mut self, fold: usize, r: &EpochReport) {
        if let Some(w) = self.progress.as_mut() {
            let dice = r.val_dice.map_or("-".to_string(), |d| format!("{d:.4}"));
            let _ = writeln!(
                w,
                "fold {fold} epoch {:3} loss {:.5} val_dice {dice}",
                r.epoch, r.loss
            );
        }
    }

    fn cached_fold(&mut self, fold: usize) -> wmseg_train::Result<Option<FoldResult>> {
        let (ckpt, log) = (self.out.checkpoint(fold), self.out.train_log(fold));
        if !self.reuse || !ckpt.is_file() || !log.is_file() {
            return Ok(None);
        }
        let Ok(ck) = Checkpoint::load(&ckpt) else {
            return Ok(None);
        };
        let record = std::fs::File::open(&log)
            .ok()
            .and_then(|f| TrainRecord::read_csv(std::io::BufReader::new(f)).ok());
        match record {
            Some(record) if ck.config == self.settings.model => {
                self.resumed.push(fold);
                Ok(Some(FoldResult {
                    weights: ck.weights,
                    record,
                }))
            }
            _ => Ok(None),
        }
    }

    fn on_fold_done(&mut self, fold: usize, r: &FoldResult) -> wmseg_train::Result<()> {
        let dir = self.out.fold_dir(fold);
        let log = self.out.train_log(fold);
        let io = |path: &std::path::Path| {
            let path = path.to_path_buf();
            move |source| wmseg_train::Error::Io { path, source }
        };
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let f = std::fs::File::create(&log).map_err(io(&log))?;
        r.record.write_csv(std::io::BufWriter::new(f))?;
        Checkpoint {
            config: self.settings.model,
            epoch: r.record.best_epoch,
            val_dice: r.record.best_val_dice(),
            weights: r.weights.clone(),
        }
        .save(&self.out.checkpoint(fold))?;
        Ok(())
    }
}

/// Subject-level cross-validation over the cohort. Folds whose checkpoint and log
/// exist from an identical earlier run are reused instead of retrained.
pub fn train(cfg: &PipelineConfig, progress: Option<&mut dyn Write>) -> Result<TrainSummary> {
    let out = OutputLayout::new(&cfg.paths.output_root);
    let subjects = load_cohort(&out.preprocessed(), &cfg.paths.data_root, &cfg.preprocess)?;
    let channels = subjects[0].masks.channels().to_vec();
    let ids: Vec<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
    if ids.len() < cfg.training.k {
        return Err(CliError::Usage(format!(
            "{} subjects cannot fill {} folds",
            ids.len(),
            cfg.training.k
        )));
    }
    let plan = wmseg_train::make_folds(&ids, cfg.training.k, cfg.training.fold_seed)?;
    let settings = RunSettings {
        model: cfg.model.unet(channels.len()),
        hyper: cfg.training.hyper(),
        channels,
    };

    let settings_path = out.train().join("settings.json");
    let same_plan =
        out.folds().is_file() && FoldPlan::load(&out.folds()).ok().as_ref() == Some(&plan);
    let same_settings = settings_path.is_file()
        && serde_json::from_str::<RunSettings>(&read_text(&settings_path)?)
            .ok()
            .as_ref()
            == Some(&settings);
    let reuse = same_plan && same_settings;
    if !reuse {
        // Stale folds from another configuration must not be picked up.
        remove_fold_dirs(&out)?;
    }
    ensure_dir(&out.train())?;
    plan.save(&out.folds())?;
    write_text(
        &settings_path,
        &serde_json::to_string_pretty(&settings).expect("settings serialize"),
    )?;
    write_text(
        &out.channels(),
        &serde_json::to_string_pretty(&settings.channels).expect("names serialize"),
    )?;

    let mut obs = Observer {
        out: &out,
        settings: &settings,
        reuse,
        resumed: Vec::new(),
        progress,
    };
    let outcome = run_with_plan(&subjects, &plan, settings.model, &settings.hyper, &mut obs)?;
    let resumed = obs.resumed;

    for (id, pred) in &outcome.predictions {
        save_mask_set(&out.predictions(), id, pred)?;
    }
    let pairs: Vec<_> = subjects
        .iter()
        .map(|s| (&outcome.predictions[&s.subject_id], &s.masks))
        .collect();
    let summary = TrainSummary {
        folds: outcome
            .folds
            .iter()
            .enumerate()
            .map(|(k, r)| FoldSummary {
                fold: k,
                held_out: plan.fold_members(k),
                best_epoch: r.record.best_epoch,
                stopped_epoch: r.record.stopped_epoch,
                best_val_dice: r.record.best_val_dice(),
                resumed: resumed.contains(&k),
            })
            .collect(),
        cv_dice: mean_dice(&pairs)?,
    };
    write_text(
        &out.train().join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

fn remove_fold_dirs(out: &OutputLayout) -> Result<()> {
    let dir = out.train();
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in std::fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))? {
        let path = entry.map_err(|e| CliError::io(&dir, e))?.path();
        let is_fold = path
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with("fold-"));
        if is_fold && path.is_dir() {
            std::fs::remove_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

/// Per-fold training logs of a finished run.
pub fn read_train_logs(out: &OutputLayout) -> Result<Vec<TrainRecord>> {
    let plan = FoldPlan::load(&out.folds())?;
    (0..plan.k)
        .map(|k| Ok(TrainRecord::read_csv(open_file(&out.train_log(k))?)?))
        .collect()
}
