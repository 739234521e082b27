use serde::{Deserialize, Serialize};

/// Reduce-on-plateau learning-rate schedule; lower metric is better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauState {
    pub best_metric: f64,
    pub epochs_since_improve: usize,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_delta: f64,
}

impl Default for PlateauState {
    fn default() -> Self {
        Self::new(0.1, 10, 1e-6, 1e-4)
    }
}

impl PlateauState {
    pub fn new(factor: f64, patience: usize, min_lr: f64, min_delta: f64) -> Self {
        assert!(factor > 0.0 && factor < 1.0, "factor must lie in (0,1)");
        assert!(patience > 0, "patience must be positive");
        Self {
            best_metric: f64::INFINITY,
            epochs_since_improve: 0,
            factor,
            patience,
            min_lr,
            min_delta,
        }
    }

    /// Records one epoch's metric and returns the learning rate to use next.
    pub fn step(&mut self, metric: f64, current_lr: f64) -> f64 {
        if metric < self.best_metric - self.min_delta {
            self.best_metric = metric;
            self.epochs_since_improve = 0;
            return current_lr;
        }
        self.epochs_since_improve += 1;
        if self.epochs_since_improve >= self.patience {
            self.epochs_since_improve = 0;
            return (current_lr * self.factor).max(self.min_lr).min(current_lr);
        }
        current_lr
    }
}

/// Patience-based early stopping; lower metric is better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopState {
    pub best_metric: f64,
    pub epochs_since_improve: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub stopped: bool,
}

impl Default for EarlyStopState {
    fn default() -> Self {
        Self::new(25)
    }
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        assert!(patience > 0, "patience must be positive");
        Self {
            best_metric: f64::INFINITY,
            epochs_since_improve: 0,
            patience,
            min_delta: 0.0,
            stopped: false,
        }
    }

    /// Returns `true` once `patience` consecutive epochs fail to improve.
    pub fn step(&mut self, metric: f64) -> bool {
        if self.stopped {
            return true;
        }
        if metric < self.best_metric - self.min_delta {
            self.best_metric = metric;
            self.epochs_since_improve = 0;
        } else {
            self.epochs_since_improve += 1;
        }
        self.stopped = self.epochs_since_improve >= self.patience;
        self.stopped
    }
}
