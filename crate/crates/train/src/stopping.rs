//! Patience-based early stopping on the training loss.

/// A loss counts as improved when it is at least `min_delta` below the best so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: f64,
    last_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            best: f64::INFINITY,
            last_improvement: 0,
        }
    }

    /// Record the loss of 1-based `epoch`; returns true when training should stop.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if self.best == f64::INFINITY || loss <= self.best - self.min_delta {
            self.best = loss;
            self.last_improvement = epoch;
        }
        epoch - self.last_improvement >= self.patience
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }

    pub fn last_improvement(&self) -> usize {
        self.last_improvement
    }
}
