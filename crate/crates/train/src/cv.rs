//! Subject-level k-fold cross-validation.

use std::collections::BTreeMap;

use wmseg_core::prep::SubjectRecord;
use wmseg_core::BundleMaskSet;
use wmseg_unet::{UNet, UNetConfig};

use crate::fold::{train_fold, EpochReport, FoldResult, TrainHyper};
use crate::folds::{assert_no_leakage, make_folds, FoldPlan};
use crate::infer::infer_subject;
use crate::{Error, Result};

/// Hooks for progress reporting and per-fold resumption.
pub trait CvObserver {
    fn on_epoch(&mut self, _fold: usize, _report: &EpochReport) {}

    /// A previously completed fold, if one is available; training is skipped.
    fn cached_fold(&mut self, _fold: usize) -> Result<Option<FoldResult>> {
        Ok(None)
    }

    fn on_fold_done(&mut self, _fold: usize, _result: &FoldResult) -> Result<()> {
        Ok(())
    }
}

/// No-op observer.
impl CvObserver for () {}

/// Which subjects trained and which were predicted by one fold's model.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAudit {
    pub fold: usize,
    pub training: Vec<String>,
    pub predicted: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub plan: FoldPlan,
    pub predictions: BTreeMap<String, BundleMaskSet>,
    pub folds: Vec<FoldResult>,
    pub audits: Vec<FoldAudit>,
}

/// Fold `f` shuffles slices with `hyper.seed + f`.
pub fn fold_hyper(hyper: &TrainHyper, fold: usize) -> TrainHyper {
    TrainHyper {
        seed: hyper.seed.wrapping_add(fold as u64),
        ..hyper.clone()
    }
}

pub fn run_cross_validation(
    subjects: &[SubjectRecord],
    cfg: UNetConfig,
    hyper: &TrainHyper,
    k: usize,
    seed: u64,
    observer: &mut dyn CvObserver,
) -> Result<CvOutcome> {
    let ids: Vec<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
    let plan = make_folds(&ids, k, seed)?;
    run_with_plan(subjects, &plan, cfg, hyper, observer)
}

/// Cross-validation over an existing fold plan, which must name exactly the
/// given subjects.
pub fn run_with_plan(
    subjects: &[SubjectRecord],
    plan: &FoldPlan,
    cfg: UNetConfig,
    hyper: &TrainHyper,
    observer: &mut dyn CvObserver,
) -> Result<CvOutcome> {
    plan.validate()?;
    let by_id: BTreeMap<&str, &SubjectRecord> = subjects
        .iter()
        .map(|s| (s.subject_id.as_str(), s))
        .collect();
    if by_id.len() != subjects.len() {
        return Err(Error::Invalid("duplicate subject ids".into()));
    }
    if by_id.len() != plan.assignments.len()
        || plan
            .assignments
            .keys()
            .any(|id| !by_id.contains_key(id.as_str()))
    {
        return Err(Error::Invalid(
            "fold plan does not list exactly the given subjects".into(),
        ));
    }
    let pick = |ids: &[String]| -> Vec<&SubjectRecord> {
        ids.iter().map(|id| by_id[id.as_str()]).collect()
    };

    let mut predictions = BTreeMap::new();
    let mut folds = Vec::with_capacity(plan.k);
    let mut audits = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let training = plan.training_members(fold);
        let held_out = plan.fold_members(fold);
        assert_no_leakage(fold, &training, &held_out)?;
        let result = match observer.cached_fold(fold)? {
            Some(r) => r,
            None => {
                let r = train_fold(
                    &pick(&training),
                    &pick(&held_out),
                    cfg,
                    &fold_hyper(hyper, fold),
                    &mut |rep| observer.on_epoch(fold, rep),
                )?;
                observer.on_fold_done(fold, &r)?;
                r
            }
        };
        let net = UNet::from_weights(cfg, result.weights.clone())?;
        for s in pick(&held_out) {
            if predictions
                .insert(s.subject_id.clone(), infer_subject(&net, s)?)
                .is_some()
            {
                return Err(Error::Leakage(format!(
                    "subject `{}` predicted by two folds",
                    s.subject_id
                )));
            }
        }
        audits.push(FoldAudit {
            fold,
            training,
            predicted: held_out,
        });
        folds.push(result);
    }
    Ok(CvOutcome {
        plan: plan.clone(),
        predictions,
        folds,
        audits,
    })
}
