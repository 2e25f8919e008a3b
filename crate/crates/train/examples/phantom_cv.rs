//! Cross-validated training on a synthetic tube cohort.
//!
//! `cargo run --release -p wmseg-train --example phantom_cv -- [subjects] [k] [max_epochs] [batch]`

use std::time::Instant;

use wmseg_core::phantom::{default_spec, generate_cohort, CohortOptions};
use wmseg_train::{mean_dice, run_cross_validation, CvObserver, EpochReport, TrainHyper};
use wmseg_unet::UNetConfig;

struct Progress(Instant);

impl CvObserver for Progress {
    fn on_epoch(&mut self, fold: usize, r: &EpochReport) {
        println!(
            "fold {fold} epoch {:3} loss {:.4} val_dice {} [{:.0?}]",
            r.epoch,
            r.loss,
            r.val_dice.map_or("-".into(), |d| format!("{d:.4}")),
            self.0.elapsed()
        );
    }
}

fn main() {
    let arg = |i: usize, d: usize| {
        std::env::args()
            .nth(i)
            .map_or(d, |v| v.parse().expect("integer argument"))
    };
    let (n, k, epochs, batch) = (arg(1, 10), arg(2, 5), arg(3, 30), arg(4, 8));
    let spec = default_spec(7);
    let cohort = generate_cohort(
        &spec,
        &CohortOptions {
            n_subjects: n,
            seed: 11,
            control_jitter: 1.0,
            drops: vec![],
        },
    )
    .expect("cohort");
    let subjects: Vec<_> = cohort.into_iter().map(|m| m.record).collect();
    let cfg = UNetConfig {
        in_channels: 9,
        out_channels: spec.bundles.len(),
        base_width: 8,
        seed: 1,
    };
    let hyper = TrainHyper {
        max_epochs: epochs,
        batch_size: batch,
        ..Default::default()
    };
    let start = Instant::now();
    let out = run_cross_validation(&subjects, cfg, &hyper, k, 3, &mut Progress(start)).expect("cv");
    let pairs: Vec<_> = subjects
        .iter()
        .map(|s| (&out.predictions[&s.subject_id], &s.masks))
        .collect();
    println!(
        "cross-validated dice {:?} in {:.1?}",
        mean_dice(&pairs).unwrap(),
        start.elapsed()
    );
}
