//! Adaptive SNR curriculum: the maximum allowed SNR rises in fixed steps
//! whenever validation loss stops improving.

pub const SNR_FLOOR_DB: f64 = -10.0;
pub const SNR_STEP_DB: f64 = 5.0;
pub const SNR_CAP_DB: f64 = 30.0;
pub const DEFAULT_PATIENCE: usize = 2;
pub const DEFAULT_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SnrCurriculum {
    pub max_snr_db: f64,
    pub floor_db: f64,
    pub step_db: f64,
    pub cap_db: f64,
    /// Epochs without improvement that count as a plateau.
    pub patience: usize,
    /// Relative improvement a new best loss must achieve.
    pub rel_tol: f64,
    /// Index into the validation-loss history where the current level began.
    pub level_start: usize,
}

impl SnrCurriculum {
    pub fn new(patience: usize, rel_tol: f64) -> Self {
        Self {
            max_snr_db: SNR_FLOOR_DB,
            floor_db: SNR_FLOOR_DB,
            step_db: SNR_STEP_DB,
            cap_db: SNR_CAP_DB,
            patience: patience.max(1),
            rel_tol,
            level_start: 0,
        }
    }

    /// SNR levels clips may currently be drawn from.
    pub fn choices(&self) -> Vec<f64> {
        let n = ((self.max_snr_db - self.floor_db) / self.step_db).round() as usize;
        (0..=n).map(|i| self.floor_db + self.step_db * i as f64).collect()
    }

    pub fn at_cap(&self) -> bool {
        self.max_snr_db >= self.cap_db
    }
}

/// Epochs since the last relative improvement of at least `rel_tol`.
fn epochs_since_best(losses: &[f64], rel_tol: f64) -> usize {
    let Some((&first, rest)) = losses.split_first() else {
        return 0;
    };
    let mut best = first;
    let mut since = 0;
    for &l in rest {
        if l < best - rel_tol * best.abs() {
            best = l;
            since = 0;
        } else {
            since += 1;
        }
    }
    since
}

/// Raises the maximum SNR by one step when the losses recorded since the
/// current level began have plateaued for `patience` epochs.
pub fn adaptive_snr_update(c: &SnrCurriculum, val_loss_history: &[f64]) -> SnrCurriculum {
    let mut next = c.clone();
    if c.at_cap() {
        return next;
    }
    let start = c.level_start.min(val_loss_history.len());
    if epochs_since_best(&val_loss_history[start..], c.rel_tol) >= c.patience {
        next.max_snr_db = (c.max_snr_db + c.step_db).min(c.cap_db);
        next.level_start = val_loss_history.len();
    }
    next
}
