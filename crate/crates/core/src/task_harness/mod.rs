//! Synthetic classification tasks, the training loop, the SNR curriculum
//! and evaluation metrics.

mod curriculum;
mod dataset;
mod metrics;
mod run_dir;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use curriculum::{
    adaptive_snr_update, SnrCurriculum, DEFAULT_PATIENCE, DEFAULT_REL_TOL, SNR_CAP_DB, SNR_FLOOR_DB, SNR_STEP_DB,
};
pub use dataset::{derive_seed, make_dataset, Dataset, DatasetSizes, Item, Split, TaskKind, TaskSpec};
pub use metrics::{argmax, binary_auc, evaluate_metrics, per_class_f1, Metrics};
pub use run_dir::{RunDir, CHECKPOINT_DIR, CONFIG_FILE, MANIFEST_FILE, METRICS_FILE, SNAPSHOT_DIR};

pub use crate::diffengine::BackendModel;
use crate::audio_io::AudioClip;
use crate::diffengine::{
    backward_with, cosine_annealing_lr, evaluate, mask_active_bounds, BackwardOptions, Checkpoint, Group, Model,
    Objective, OptimizerState, DEFAULT_HIDDEN, DEFAULT_LR_MAX, DEFAULT_LR_MIN,
};
use crate::error::{LeafError, Result};
use crate::exec::ExecMode;
use crate::filterbank::{GaborFilterbank, DEFAULT_KERNEL_WIDTH};
use crate::frontend::{FrontendParams, DEFAULT_LP_WIDTH, DEFAULT_STRIDE, PCEN_EPS};
use crate::initializers::{build_filterbank, InitStrategy};

/// Whether the Gabor filterbank is updated during training. PCEN, the
/// lowpass widths and the backend are trained in both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainable {
    FixedFb,
    LearnableFb,
}

impl Trainable {
    pub fn as_str(self) -> &'static str {
        match self {
            Trainable::FixedFb => "fixed",
            Trainable::LearnableFb => "learn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    /// Cosine period in epochs; the schedule also restarts whenever the
    /// curriculum raises the SNR.
    pub period_epochs: usize,
    pub seed: u64,
    pub trainable: Trainable,
    pub hidden: usize,
    pub kernel_width: usize,
    pub stride: usize,
    pub lp_width: usize,
    pub pcen_eps: f64,
    pub curriculum: bool,
    pub patience: usize,
    pub rel_tol: f64,
    pub mode: ExecMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 8,
            lr_max: DEFAULT_LR_MAX,
            lr_min: DEFAULT_LR_MIN,
            period_epochs: 30,
            seed: 0,
            trainable: Trainable::LearnableFb,
            hidden: DEFAULT_HIDDEN,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            stride: DEFAULT_STRIDE,
            lp_width: DEFAULT_LP_WIDTH,
            pcen_eps: PCEN_EPS,
            curriculum: false,
            patience: DEFAULT_PATIENCE,
            rel_tol: DEFAULT_REL_TOL,
            mode: ExecMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(LeafError::Spec("batch size must be at least 1".into()));
        }
        if self.period_epochs == 0 {
            return Err(LeafError::Spec("cosine period must be at least one epoch".into()));
        }
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return Err(LeafError::Spec(format!(
                "learning rates must satisfy 0 <= lr_min <= lr_max, 0 < lr_max (got {}, {})",
                self.lr_min, self.lr_max
            )));
        }
        if self.hidden == 0 {
            return Err(LeafError::Spec("hidden width must be at least 1".into()));
        }
        if !(self.pcen_eps > 0.0) {
            return Err(LeafError::Spec("PCEN epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub metrics: Metrics,
    pub lr: f64,
    pub max_snr_db: f64,
}

pub const METRICS_HEADER: &str = "epoch,split,loss,accuracy,f1,auc,lr,max_snr_db";

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(rows: &[MetricsRow]) -> String {
        let mut out = format!("{METRICS_HEADER}\n");
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.epoch,
                r.split.as_str(),
                r.loss,
                r.metrics.accuracy,
                opt_field(r.metrics.f1),
                opt_field(r.metrics.auc),
                r.lr,
                r.max_snr_db
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Vec<MetricsRow>> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == METRICS_HEADER => {}
            _ => return Err(LeafError::Format("metrics CSV lacks its header".into())),
        }
        lines
            .map(|(i, line)| {
                let bad = || LeafError::Format(format!("metrics line {}: `{line}`", i + 1));
                let f: Vec<&str> = line.trim().split(',').collect();
                if f.len() != 8 {
                    return Err(bad());
                }
                fn num<T: FromStr>(s: &str, bad: impl Fn() -> LeafError) -> Result<T> {
                    s.parse().map_err(|_| bad())
                }
                let opt = |s: &str| -> Result<Option<f64>> {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        num(s, bad).map(Some)
                    }
                };
                Ok(MetricsRow {
                    epoch: num(f[0], bad)?,
                    split: f[1].parse()?,
                    loss: num(f[2], bad)?,
                    metrics: Metrics {
                        accuracy: num(f[3], bad)?,
                        f1: opt(f[4])?,
                        auc: opt(f[5])?,
                    },
                    lr: num(f[6], bad)?,
                    max_snr_db: num(f[7], bad)?,
                })
            })
            .collect()
    }
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub init: InitStrategy,
    pub trainable: Trainable,
    /// Filterbank after each epoch; entry 0 is the initialization.
    pub snapshots: Vec<GaborFilterbank>,
    pub metrics: Vec<MetricsRow>,
    pub model: Model,
    pub fs_hz: u32,
}

impl TrainingRun {
    pub fn rows(&self, split: Split) -> impl Iterator<Item = &MetricsRow> {
        self.metrics.iter().filter(move |r| r.split == split)
    }

    /// Validation accuracy after the last epoch.
    pub fn final_val_accuracy(&self) -> Option<f64> {
        self.rows(Split::Val).last().map(|r| r.metrics.accuracy)
    }
}

/// Builds the untrained model for `init`.
pub fn initial_model(dataset: &Dataset, init: &InitStrategy, cfg: &TrainConfig) -> Result<Model> {
    let fs = dataset.spec.sample_rate_hz;
    let fb = build_filterbank(init, fs, cfg.kernel_width)?;
    let mut frontend = FrontendParams::with_defaults(fb, cfg.stride, cfg.lp_width)?;
    frontend.pcen.eps = cfg.pcen_eps;
    let backend = BackendModel::random(
        frontend.n_channels(),
        cfg.hidden,
        dataset.n_classes(),
        derive_seed(cfg.seed, 0xbacc),
    )?;
    Model::new(frontend, backend, fs)
}

struct Rendered {
    clips: Vec<AudioClip>,
    labels: Vec<usize>,
}

fn render(dataset: &Dataset, items: &[Item], choices: &[f64], salt: Option<u64>, mode: ExecMode) -> Result<Rendered> {
    let clips = mode
        .map_slice(items, |it| {
            let snr = Dataset::pick_snr(it, choices, salt.unwrap_or(0));
            dataset.render(it, snr)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Rendered {
        clips,
        labels: items.iter().map(|i| i.label).collect(),
    })
}

fn eval_split(model: &Model, data: &Rendered, n_classes: usize, mode: ExecMode) -> Result<(f64, Metrics)> {
    let refs: Vec<&AudioClip> = data.clips.iter().collect();
    let evals = evaluate(model, &refs, &data.labels, Objective::CrossEntropy, mode)?;
    let loss = evals.iter().map(|e| e.loss).sum::<f64>() / evals.len() as f64;
    let probs: Vec<Vec<f64>> = evals.into_iter().map(|e| e.probs).collect();
    Ok((loss, evaluate_metrics(&probs, &data.labels, n_classes)?))
}

/// Trains a model on `dataset` starting from the `init` filterbank. With a
/// run directory, snapshots, metrics and the checkpoint are written after
/// every epoch, so an aborted run keeps everything up to its last good
/// epoch.
pub fn train(dataset: &Dataset, init: &InitStrategy, cfg: &TrainConfig, out: Option<&RunDir>) -> Result<TrainingRun> {
    cfg.validate()?;
    let fs = dataset.spec.sample_rate_hz;
    let n_classes = dataset.n_classes();
    let mut model = initial_model(dataset, init, cfg)?;
    let mut opt = OptimizerState::new(model.layout().len());
    let comments = vec![init.comment(), format!("trainable={}", cfg.trainable.as_str())];

    let mut curriculum = cfg
        .curriculum
        .then(|| SnrCurriculum::new(cfg.patience, cfg.rel_tol));
    let choices = |c: &Option<SnrCurriculum>| match c {
        Some(c) => c.choices(),
        None => vec![dataset.spec.snr_db],
    };
    let max_snr = |c: &Option<SnrCurriculum>| c.as_ref().map_or(dataset.spec.snr_db, |c| c.max_snr_db);

    let train_items = dataset.split(Split::Train);
    let val_items = dataset.split(Split::Val);
    let steps_per_epoch = train_items.len().div_ceil(cfg.batch_size) as u64;
    let period = cfg.period_epochs as u64 * steps_per_epoch;
    let bw = BackwardOptions {
        objective: Objective::CrossEntropy,
        mode: cfg.mode,
        filterbank_grads: cfg.trainable == Trainable::LearnableFb,
    };

    let mut snapshots = vec![model.frontend.filterbank.clone()];
    let mut rows = Vec::new();
    let mut lr = cosine_annealing_lr(0, period, cfg.lr_max, cfg.lr_min);
    let val = render(dataset, &val_items, &choices(&curriculum), None, cfg.mode)?;
    let (val_loss, val_metrics) = eval_split(&model, &val, n_classes, cfg.mode)?;
    rows.push(MetricsRow {
        epoch: 0,
        split: Split::Val,
        loss: val_loss,
        metrics: val_metrics,
        lr,
        max_snr_db: max_snr(&curriculum),
    });
    if let Some(dir) = out {
        dir.write_snapshot(0, &snapshots[0], fs, &comments)?;
        dir.write_metrics(&rows)?;
    }

    let mut sched_step = 0u64;
    let mut val_history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let level = choices(&curriculum);
        let epoch_snr = max_snr(&curriculum);
        let train_data = render(dataset, &train_items, &level, Some(epoch as u64), cfg.mode)?;
        let mut order: Vec<usize> = (0..train_items.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64)));

        let mut loss_sum = 0.0;
        let mut probs = vec![Vec::new(); order.len()];
        for batch in order.chunks(cfg.batch_size) {
            lr = cosine_annealing_lr(sched_step, period, cfg.lr_max, cfg.lr_min);
            let clips: Vec<&AudioClip> = batch.iter().map(|&i| &train_data.clips[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train_data.labels[i]).collect();
            let mut g = backward_with(&model, &clips, &labels, &bw)?;
            if cfg.trainable == Trainable::FixedFb {
                g.grad.group_mut(Group::Eta).fill(0.0);
                g.grad.group_mut(Group::SigmaBw).fill(0.0);
            }
            mask_active_bounds(&model, &mut g.grad);
            opt.adam_step(&mut model, &g.grad, lr)?;
            sched_step += 1;
            loss_sum += g.loss * batch.len() as f64;
            for (&i, e) in batch.iter().zip(g.clips) {
                probs[i] = e.probs;
            }
        }
        rows.push(MetricsRow {
            epoch,
            split: Split::Train,
            loss: loss_sum / order.len() as f64,
            metrics: evaluate_metrics(&probs, &train_data.labels, n_classes)?,
            lr,
            max_snr_db: epoch_snr,
        });

        let val = render(dataset, &val_items, &level, None, cfg.mode)?;
        let (val_loss, val_metrics) = eval_split(&model, &val, n_classes, cfg.mode)?;
        rows.push(MetricsRow {
            epoch,
            split: Split::Val,
            loss: val_loss,
            metrics: val_metrics,
            lr,
            max_snr_db: epoch_snr,
        });
        val_history.push(val_loss);
        snapshots.push(model.frontend.filterbank.clone());

        if let Some(c) = &curriculum {
            let next = adaptive_snr_update(c, &val_history);
            if next.max_snr_db > c.max_snr_db {
                sched_step = 0;
            }
            curriculum = Some(next);
        }
        if epoch == cfg.epochs {
            let test_items = dataset.split(Split::Test);
            let test = render(dataset, &test_items, &level, None, cfg.mode)?;
            let (test_loss, test_metrics) = eval_split(&model, &test, n_classes, cfg.mode)?;
            rows.push(MetricsRow {
                epoch,
                split: Split::Test,
                loss: test_loss,
                metrics: test_metrics,
                lr,
                max_snr_db: epoch_snr,
            });
        }

        if let Some(dir) = out {
            dir.write_snapshot(epoch, &model.frontend.filterbank, fs, &comments)?;
            dir.write_metrics(&rows)?;
            let mut state = BTreeMap::new();
            state.insert("sched_step".to_string(), sched_step.to_string());
            if let Some(c) = &curriculum {
                state.insert("max_snr_db".to_string(), c.max_snr_db.to_string());
                state.insert("level_start".to_string(), c.level_start.to_string());
            }
            dir.write_checkpoint(&Checkpoint {
                epoch,
                model: model.clone(),
                optimizer: opt.clone(),
                rng_seed: cfg.seed,
                state,
            })?;
        }
    }

    Ok(TrainingRun {
        init: init.clone(),
        trainable: cfg.trainable,
        snapshots,
        metrics: rows,
        model,
        fs_hz: fs,
    })
}

#[cfg(test)]
mod tests;
