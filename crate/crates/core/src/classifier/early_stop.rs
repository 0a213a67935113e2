/// Stops training once the monitored metric has not strictly improved on
/// its best value for `patience` consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epochs_seen: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self { patience, best: f64::NEG_INFINITY, best_epoch: 0, epochs_seen: 0, stale: 0 }
    }

    /// Records one epoch's metric; returns `true` when training should stop
    /// after this epoch.
    pub fn update(&mut self, metric: f64) -> bool {
        self.epochs_seen += 1;
        if metric > self.best {
            self.best = metric;
            self.best_epoch = self.epochs_seen;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// 1-based epoch of the best metric so far (0 before any update).
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Number of epochs a run lasts for a given per-epoch metric sequence.
pub fn epochs_run(metrics: &[f64], patience: usize, max_epochs: usize) -> usize {
    let mut es = EarlyStopping::new(patience);
    for (i, &m) in metrics.iter().take(max_epochs).enumerate() {
        if es.update(m) {
            return i + 1;
        }
    }
    metrics.len().min(max_epochs)
}
