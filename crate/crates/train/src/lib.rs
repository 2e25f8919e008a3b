//! Subject-level cross-validated training of the segmentation network, and
//! reconstruction of 3D bundle masks from slice predictions.

pub mod cv;
mod error;
pub mod fold;
pub mod folds;
pub mod infer;
pub mod stopping;

pub use cv::{run_cross_validation, run_with_plan, CvObserver, CvOutcome, FoldAudit};
pub use error::{Error, Result};
pub use fold::{
    mean_dice, train_fold, validation_dice, EpochReport, FoldResult, TrainHyper, TrainRecord,
    MAX_EPOCHS,
};
pub use folds::{assert_no_leakage, make_folds, FoldPlan};
pub use infer::{infer_peaks, infer_subject, predict_probabilities};
pub use stopping::EarlyStopping;
