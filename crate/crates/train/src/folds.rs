//! Subject-level fold assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldPlan {
    pub seed: u64,
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
}

/// Shuffle the sorted ids with a seeded generator and deal them round-robin.
pub fn make_folds(subject_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {k}")));
    }
    if subject_ids.len() < k {
        return Err(Error::Invalid(format!(
            "{} subjects cannot fill {k} folds",
            subject_ids.len()
        )));
    }
    let mut ids = subject_ids.to_vec();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Invalid(format!("duplicate subject id `{}`", w[0])));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignments = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % k))
        .collect();
    Ok(FoldPlan {
        seed,
        k,
        assignments,
    })
}

impl FoldPlan {
    /// Subjects held out in `fold`, sorted.
    pub fn fold_members(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Subjects used to train the model for `fold`, sorted.
    pub fn training_members(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.assignments.len() < self.k {
            return Err(Error::Invalid(format!(
                "fold plan with k={} over {} subjects",
                self.k,
                self.assignments.len()
            )));
        }
        if let Some((id, f)) = self.assignments.iter().find(|(_, &f)| f >= self.k) {
            return Err(Error::Invalid(format!(
                "subject `{id}` assigned to fold {f} of {}",
                self.k
            )));
        }
        let sizes = self.fold_sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(Error::Invalid(format!("unbalanced fold sizes {sizes:?}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serializes")
    }

    pub fn from_json(text: &str) -> Result<FoldPlan> {
        let plan: FoldPlan = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "fold plan",
            detail: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<FoldPlan> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FoldPlan::from_json(&text)
    }
}

/// Errors unless the predicted and training subject sets are disjoint.
pub fn assert_no_leakage<'a>(
    fold: usize,
    training: impl IntoIterator<Item = &'a String>,
    predicted: impl IntoIterator<Item = &'a String>,
) -> Result<()> {
    let train: BTreeSet<&String> = training.into_iter().collect();
    let shared: Vec<&String> = predicted
        .into_iter()
        .filter(|id| train.contains(id))
        .collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(Error::Leakage(format!(
            "fold {fold}: subjects {shared:?} are both trained on and predicted"
        )))
    }
}
