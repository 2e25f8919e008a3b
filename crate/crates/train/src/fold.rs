//! Training one fold: seeded slice batching, Adamax, validation Dice on
//! reconstructed volumes, best-checkpoint selection and early stopping.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use ndarray::{Array4, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wmseg_core::metrics::dice;
use wmseg_core::pad::pad_to_multiple;
use wmseg_core::prep::SubjectRecord;
use wmseg_core::prep::{extract_slices, SliceSample};
use wmseg_core::BundleMaskSet;
use wmseg_unet::{train_step, Adamax, ModelWeights, UNet, UNetConfig, SIZE_MULTIPLE};

use crate::infer::infer_subject;
use crate::stopping::EarlyStopping;
use crate::{Error, Result};

/// Hard cap on training length.
pub const MAX_EPOCHS: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub lr: f32,
    pub max_epochs: usize,
    pub patience: usize,
    /// Smallest loss decrease that counts as an improvement.
    pub min_delta: f64,
    pub batch_size: usize,
    /// Seeds the per-epoch slice shuffle.
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 1e-3,
            max_epochs: MAX_EPOCHS,
            patience: 25,
            min_delta: 1e-6,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Invalid(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.max_epochs == 0 || self.max_epochs > MAX_EPOCHS {
            return Err(Error::Invalid(format!(
                "max_epochs must be in 1..={MAX_EPOCHS}, got {}",
                self.max_epochs
            )));
        }
        if self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Invalid(
                "patience and batch_size must be at least 1".into(),
            ));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(Error::Invalid(format!(
                "min_delta must be ≥ 0, got {}",
                self.min_delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    pub val_dice: Option<f64>,
    /// Validation Dice strictly improved and the weights were kept.
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub loss: Vec<f64>,
    /// `None` where no (subject, bundle) pair had a defined Dice.
    pub val_dice: Vec<Option<f64>>,
    /// 1-based epoch of the first maximum of `val_dice`; the last epoch when no
    /// validation Dice was ever defined.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainRecord {
    pub fn from_series(loss: Vec<f64>, val_dice: Vec<Option<f64>>) -> Result<TrainRecord> {
        if loss.is_empty() || loss.len() != val_dice.len() || loss.len() > MAX_EPOCHS {
            return Err(Error::Invalid(format!(
                "training log with {} losses and {} validation values",
                loss.len(),
                val_dice.len()
            )));
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in val_dice.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i + 1, v));
                }
            }
        }
        let stopped_epoch = loss.len();
        Ok(TrainRecord {
            best_epoch: best.map_or(stopped_epoch, |(e, _)| e),
            stopped_epoch,
            loss,
            val_dice,
        })
    }

    pub fn best_val_dice(&self) -> Option<f64> {
        self.val_dice[self.best_epoch - 1]
    }

    /// `epoch,loss,val_dice`; an undefined Dice is an empty cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt = |e: csv::Error| Error::Format {
            what: "training log",
            detail: e.to_string(),
        };
        w.write_record(["epoch", "loss", "val_dice"]).map_err(fmt)?;
        for (i, (l, v)) in self.loss.iter().zip(&self.val_dice).enumerate() {
            let v = v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([(i + 1).to_string(), l.to_string(), v])
                .map_err(fmt)?;
        }
        w.flush().map_err(|e| Error::Format {
            what: "training log",
            detail: e.to_string(),
        })
    }

    pub fn read_csv<R: Read>(input: R) -> Result<TrainRecord> {
        let bad = |detail: String| Error::Format {
            what: "training log",
            detail,
        };
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["epoch", "loss", "val_dice"] {
            return Err(bad(format!(
                "unexpected header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let (mut loss, mut val) = (Vec::new(), Vec::new());
        for (i, row) in r.records().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("row {}: `{s}` is not a finite number", i + 1)))
            };
            if row.get(0).and_then(|e| e.parse::<usize>().ok()) != Some(i + 1) {
                return Err(bad(format!("row {} is not epoch {}", i + 1, i + 1)));
            }
            loss.push(num(&row[1])?);
            val.push(match &row[2] {
                "" => None,
                s => Some(num(s)?),
            });
        }
        TrainRecord::from_series(loss, val).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub weights: ModelWeights,
    pub record: TrainRecord,
}

/// Mean Dice over (subject, bundle) pairs whose reference channel is valid,
/// skipping pairs where both masks are empty.
pub fn mean_dice(pairs: &[(&BundleMaskSet, &BundleMaskSet)]) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (pred, reference) in pairs {
        for (c, name) in reference.channels().iter().enumerate() {
            if !reference.is_valid(c) {
                continue;
            }
            let p = pred.channel_by_name(name)?;
            if let Some(d) = dice(p, reference.channel(c))? {
                total += d;
                n += 1;
            }
        }
    }
    Ok((n > 0).then(|| total / n as f64))
}

pub fn validation_dice(net: &UNet, subjects: &[&SubjectRecord]) -> Result<Option<f64>> {
    let preds = subjects
        .iter()
        .map(|s| infer_subject(net, s))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = preds
        .iter()
        .zip(subjects)
        .map(|(p, s)| (p, &s.masks))
        .collect();
    mean_dice(&pairs)
}

fn check_inputs(train: &[&SubjectRecord], val: &[&SubjectRecord], cfg: &UNetConfig) -> Result<()> {
    let mut ids = BTreeSet::new();
    for s in train {
        if !ids.insert(s.subject_id.as_str()) {
            return Err(Error::Invalid(format!(
                "training subject `{}` listed twice",
                s.subject_id
            )));
        }
    }
    if let Some(s) = val.iter().find(|s| ids.contains(s.subject_id.as_str())) {
        return Err(Error::Leakage(format!(
            "subject `{}` is in both the training and validation sets",
            s.subject_id
        )));
    }
    let Some(first) = train.first() else {
        return Err(Error::Invalid("no training subjects".into()));
    };
    let channels = first.masks.channels();
    for s in train.iter().chain(val) {
        s.check_grids()?;
        if s.masks.channels() != channels {
            return Err(Error::Invalid(format!(
                "subject `{}` has channels {:?}, expected {:?}",
                s.subject_id,
                s.masks.channels(),
                channels
            )));
        }
        if s.peaks.data().dim().3 != cfg.in_channels {
            return Err(Error::Invalid(format!(
                "subject `{}` has {} input channels, model expects {}",
                s.subject_id,
                s.peaks.data().dim().3,
                cfg.in_channels
            )));
        }
    }
    if channels.len() != cfg.out_channels {
        return Err(Error::Invalid(format!(
            "subjects have {} bundle channels, model predicts {}",
            channels.len(),
            cfg.out_channels
        )));
    }
    Ok(())
}

/// Padded `(x, target, mask)` arrays for a batch of same-shape slices.
fn assemble_batch(samples: &[&SliceSample]) -> Result<(Array4<f32>, Array4<f32>, Array4<f32>)> {
    let mut out: Option<(Array4<f32>, Array4<f32>, Array4<f32>)> = None;
    for (b, s) in samples.iter().enumerate() {
        let (x, _) = pad_to_multiple(s.input.view(), SIZE_MULTIPLE)?;
        let (t, _) = pad_to_multiple(s.target.view(), SIZE_MULTIPLE)?;
        let (m, _) = pad_to_multiple(s.loss_mask.view(), SIZE_MULTIPLE)?;
        let (bx, bt, bm) = out.get_or_insert_with(|| {
            let n = samples.len();
            let (h, w, _) = x.dim();
            (
                Array4::zeros((n, h, w, x.dim().2)),
                Array4::zeros((n, h, w, t.dim().2)),
                Array4::zeros((n, h, w, m.dim().2)),
            )
        });
        bx.index_axis_mut(Axis(0), b).assign(&x);
        bt.index_axis_mut(Axis(0), b).assign(&t);
        bm.index_axis_mut(Axis(0), b).assign(&m);
    }
    out.ok_or_else(|| Error::Invalid("empty batch".into()))
}

/// Shuffled batches; slices are grouped by padded shape so each batch stacks.
fn epoch_batches(
    samples: &[SliceSample],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    let key = |s: &SliceSample| {
        let (h, w, _) = s.input.dim();
        (
            wmseg_core::pad::next_multiple(h, SIZE_MULTIPLE),
            wmseg_core::pad::next_multiple(w, SIZE_MULTIPLE),
        )
    };
    let mut open: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut batches = Vec::new();
    for i in order {
        let bucket = open.entry(key(&samples[i])).or_default();
        bucket.push(i);
        if bucket.len() == batch_size {
            batches.push(std::mem::take(bucket));
        }
    }
    batches.extend(open.into_values().filter(|b| !b.is_empty()));
    batches
}

/// Train one model. Returns the weights from the epoch with the highest
/// validation Dice (first on ties) and the per-epoch record.
pub fn train_fold(
    train: &[&SubjectRecord],
    val: &[&SubjectRecord],
    cfg: UNetConfig,
    hyper: &TrainHyper,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<FoldResult> {
    hyper.validate()?;
    cfg.validate()?;
    check_inputs(train, val, &cfg)?;

    let mut samples = Vec::new();
    for s in train {
        samples.extend(
            extract_slices(s)?
                .into_iter()
                .filter(|x| x.used_in_training),
        );
    }
    if samples.is_empty() {
        return Err(Error::Invalid(
            "no training-eligible slices (every target is empty)".into(),
        ));
    }

    let mut net = UNet::new(cfg)?;
    let mut opt = Adamax::new(hyper.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut stopper = EarlyStopping::new(hyper.patience, hyper.min_delta);
    let (mut losses, mut dices) = (Vec::new(), Vec::new());
    let mut best: Option<(f64, ModelWeights)> = None;

    for epoch in 1..=hyper.max_epochs {
        let mut sum = 0.0;
        for batch in epoch_batches(&samples, hyper.batch_size, &mut rng) {
            let picked: Vec<&SliceSample> = batch.iter().map(|&i| &samples[i]).collect();
            let (x, t, m) = assemble_batch(&picked)?;
            let loss = train_step(&mut net, &mut opt, x.view(), t.view(), m.view())?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}")));
            }
            sum += loss * picked.len() as f64;
        }
        let loss = sum / samples.len() as f64;
        let val_dice = validation_dice(&net, val)?;
        let improved = match (val_dice, &best) {
            (Some(_), None) => true,
            (Some(v), Some((b, _))) => v > *b,
            (None, _) => false,
        };
        if improved {
            best = Some((
                val_dice.expect("improved implies defined"),
                net.weights().clone(),
            ));
        }
        losses.push(loss);
        dices.push(val_dice);
        on_epoch(&EpochReport {
            epoch,
            loss,
            val_dice,
            improved,
        });
        if stopper.observe(epoch, loss) {
            break;
        }
    }

    let record = TrainRecord::from_series(losses, dices)?;
    let weights = match best {
        Some((_, w)) => w,
        None => net.weights().clone(),
    };
    Ok(FoldResult { weights, record })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_best_is_first_maximum() {
        let r = TrainRecord::from_series(
            vec![1.0, 0.9, 0.8, 0.7],
            vec![Some(0.2), Some(0.6), None, Some(0.6)],
        )
        .unwrap();
        assert_eq!((r.best_epoch, r.stopped_epoch), (2, 4));
        assert_eq!(r.best_val_dice(), Some(0.6));
        let none = TrainRecord::from_series(vec![1.0, 0.5], vec![None, None]).unwrap();
        assert_eq!(none.best_epoch, 2);
        assert!(TrainRecord::from_series(vec![], vec![]).is_err());
        assert!(TrainRecord::from_series(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn record_csv_round_trip() {
        let r =
            TrainRecord::from_series(vec![0.9, 0.123456789012345], vec![None, Some(0.75)]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,loss,val_dice\n1,0.9,\n"));
        assert_eq!(TrainRecord::read_csv(&buf[..]).unwrap(), r);
        assert!(TrainRecord::read_csv(&b"epoch,loss,val_dice\n2,0.5,\n"[..]).is_err());
        assert!(TrainRecord::read_csv(&b"epoch,loss,val_dice\n1,NaN,\n"[..]).is_err());
        assert!(TrainRecord::read_csv(&b"e,l\n"[..]).is_err());
    }

    #[test]
    fn hyper_validation() {
        assert!(TrainHyper::default().validate().is_ok());
        for bad in [
            TrainHyper {
                max_epochs: 251,
                ..Default::default()
            },
            TrainHyper {
                max_epochs: 0,
                ..Default::default()
            },
            TrainHyper {
                lr: 0.0,
                ..Default::default()
            },
            TrainHyper {
                batch_size: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn batches_cover_every_slice_once() {
        let mk = |h: usize, w: usize| SliceSample {
            subject_id: "s".into(),
            slice_index: 0,
            input: ndarray::Array3::zeros((h, w, 9)),
            target: ndarray::Array3::zeros((h, w, 1)),
            loss_mask: ndarray::Array3::zeros((h, w, 1)),
            used_in_training: true,
        };
        let samples: Vec<_> = (0..23)
            .map(|i| if i % 3 == 0 { mk(20, 20) } else { mk(16, 16) })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batches = epoch_batches(&samples, 4, &mut rng);
        let mut all: Vec<usize> = batches.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for b in &batches {
            assert!(b.len() <= 4);
            let shape = samples[b[0]].input.dim();
            assert!(b.iter().all(|&i| samples[i].input.dim() == shape));
            let (x, _, _) =
                assemble_batch(&b.iter().map(|&i| &samples[i]).collect::<Vec<_>>()).unwrap();
            assert_eq!(x.dim().1 % 16, 0);
        }
    }
}
