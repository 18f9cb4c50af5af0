//! `key = value` experiment configuration with dotted section prefixes.
//! Every key has a default, unknown keys are rejected, and
//! [`ExperimentConfig::to_text`] round-trips through
//! [`ExperimentConfig::parse`].

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::audio_io::NoiseKind;
use crate::error::{LeafError, Result};
use crate::filterbank::DEFAULT_KERNEL_WIDTH;
use crate::frontend::{DEFAULT_LP_WIDTH, DEFAULT_STRIDE, PCEN_EPS};
use crate::initializers::{InitKind, InitStrategy};
use crate::sensitivity::{ResponseKind, DEFAULT_BINS};
use crate::task_harness::{DatasetSizes, TaskKind, TaskSpec, TrainConfig, Trainable};

/// Curriculum switch; `Auto` defers to the task's default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Toggle {
    Auto,
    On,
    Off,
}

impl Toggle {
    fn as_str(self) -> &'static str {
        match self {
            Toggle::Auto => "auto",
            Toggle::On => "on",
            Toggle::Off => "off",
        }
    }
}

impl FromStr for Toggle {
    type Err = LeafError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Toggle::Auto),
            "on" | "true" => Ok(Toggle::On),
            "off" | "false" => Ok(Toggle::Off),
            other => Err(LeafError::Config(format!("expected auto, on or off, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub noise: NoiseKind,
    pub snr_db: f64,
    /// `None` takes the task's default split sizes.
    pub train_size: Option<usize>,
    pub val_size: Option<usize>,
    pub test_size: Option<usize>,
    pub data_seed: u64,

    pub init: InitStrategy,

    pub kernel_width: usize,
    pub stride: usize,
    pub lp_width: usize,
    pub eps: f64,

    pub epochs: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub period_epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub seed: u64,
    pub fixed_fb: bool,
    pub curriculum: Toggle,
    pub patience: usize,
    pub rel_tol: f64,

    pub bins: usize,
    pub response: ResponseKind,

    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let task = TaskSpec::new(TaskKind::Band4);
        let train = TrainConfig::default();
        Self {
            task: task.kind,
            sample_rate_hz: task.sample_rate_hz,
            duration_s: task.duration_s,
            noise: task.noise,
            snr_db: task.snr_db,
            train_size: None,
            val_size: None,
            test_size: None,
            data_seed: 0,
            init: InitStrategy::new(InitKind::Mel),
            kernel_width: DEFAULT_KERNEL_WIDTH,
            stride: DEFAULT_STRIDE,
            lp_width: DEFAULT_LP_WIDTH,
            eps: PCEN_EPS,
            epochs: train.epochs,
            lr_max: train.lr_max,
            lr_min: train.lr_min,
            period_epochs: train.period_epochs,
            batch_size: train.batch_size,
            hidden: train.hidden,
            seed: train.seed,
            fixed_fb: false,
            curriculum: Toggle::Auto,
            patience: train.patience,
            rel_tol: train.rel_tol,
            bins: DEFAULT_BINS,
            response: ResponseKind::Magnitude,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "auto".to_string(), |n| n.to_string())
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| LeafError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_opt(key: &str, v: &str) -> Result<Option<usize>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_value(key, v).map(Some)
    }
}

impl ExperimentConfig {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("task.name", self.task.to_string());
        kv("task.sample_rate_hz", self.sample_rate_hz.to_string());
        kv("task.duration_s", self.duration_s.to_string());
        kv("task.noise", self.noise.as_str().to_string());
        kv("task.snr_db", self.snr_db.to_string());
        kv("task.train_size", opt_usize(self.train_size));
        kv("task.val_size", opt_usize(self.val_size));
        kv("task.test_size", opt_usize(self.test_size));
        kv("task.seed", self.data_seed.to_string());
        kv("init.kind", self.init.kind.to_string());
        kv("init.seed", self.init.seed.to_string());
        kv("init.f_min_hz", self.init.f_min_hz.to_string());
        kv("init.f_max_hz", self.init.f_max_hz.to_string());
        kv("init.n_filters", self.init.n_filters.to_string());
        kv("frontend.kernel_width", self.kernel_width.to_string());
        kv("frontend.stride", self.stride.to_string());
        kv("frontend.lp_width", self.lp_width.to_string());
        kv("frontend.eps", self.eps.to_string());
        kv("train.epochs", self.epochs.to_string());
        kv("train.lr_max", self.lr_max.to_string());
        kv("train.lr_min", self.lr_min.to_string());
        kv("train.period_epochs", self.period_epochs.to_string());
        kv("train.batch_size", self.batch_size.to_string());
        kv("train.hidden", self.hidden.to_string());
        kv("train.seed", self.seed.to_string());
        kv("train.fixed_fb", self.fixed_fb.to_string());
        kv("train.curriculum", self.curriculum.as_str().to_string());
        kv("train.patience", self.patience.to_string());
        kv("train.rel_tol", self.rel_tol.to_string());
        kv("sensitivity.bins", self.bins.to_string());
        kv("sensitivity.response", self.response.as_str().to_string());
        kv("output.dir", self.out_dir.display().to_string());
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LeafError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(LeafError::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
            c.set(k, v)?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LeafError::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "task.name" => self.task = v.parse()?,
            "task.sample_rate_hz" => self.sample_rate_hz = parse_value(k, v)?,
            "task.duration_s" => self.duration_s = parse_value(k, v)?,
            "task.noise" => self.noise = v.parse()?,
            "task.snr_db" => self.snr_db = parse_value(k, v)?,
            "task.train_size" => self.train_size = parse_opt(k, v)?,
            "task.val_size" => self.val_size = parse_opt(k, v)?,
            "task.test_size" => self.test_size = parse_opt(k, v)?,
            "task.seed" => self.data_seed = parse_value(k, v)?,
            "init.kind" => self.init.kind = v.parse()?,
            "init.seed" => self.init.seed = parse_value(k, v)?,
            "init.f_min_hz" => self.init.f_min_hz = parse_value(k, v)?,
            "init.f_max_hz" => self.init.f_max_hz = parse_value(k, v)?,
            "init.n_filters" => self.init.n_filters = parse_value(k, v)?,
            "frontend.kernel_width" => self.kernel_width = parse_value(k, v)?,
            "frontend.stride" => self.stride = parse_value(k, v)?,
            "frontend.lp_width" => self.lp_width = parse_value(k, v)?,
            "frontend.eps" => self.eps = parse_value(k, v)?,
            "train.epochs" => self.epochs = parse_value(k, v)?,
            "train.lr_max" => self.lr_max = parse_value(k, v)?,
            "train.lr_min" => self.lr_min = parse_value(k, v)?,
            "train.period_epochs" => self.period_epochs = parse_value(k, v)?,
            "train.batch_size" => self.batch_size = parse_value(k, v)?,
            "train.hidden" => self.hidden = parse_value(k, v)?,
            "train.seed" => self.seed = parse_value(k, v)?,
            "train.fixed_fb" => self.fixed_fb = parse_value(k, v)?,
            "train.curriculum" => self.curriculum = v.parse()?,
            "train.patience" => self.patience = parse_value(k, v)?,
            "train.rel_tol" => self.rel_tol = parse_value(k, v)?,
            "sensitivity.bins" => self.bins = parse_value(k, v)?,
            "sensitivity.response" => self.response = v.parse()?,
            "output.dir" => self.out_dir = PathBuf::from(v),
            other => return Err(LeafError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec {
            kind: self.task,
            sample_rate_hz: self.sample_rate_hz,
            duration_s: self.duration_s,
            noise: self.noise,
            snr_db: self.snr_db,
            ..TaskSpec::new(self.task)
        }
    }

    pub fn sizes(&self) -> DatasetSizes {
        let d = self.task.default_sizes();
        DatasetSizes::new(
            self.train_size.unwrap_or(d.train),
            self.val_size.unwrap_or(d.val),
            self.test_size.unwrap_or(d.test),
        )
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_max: self.lr_max,
            lr_min: self.lr_min,
            period_epochs: self.period_epochs,
            seed: self.seed,
            trainable: if self.fixed_fb {
                Trainable::FixedFb
            } else {
                Trainable::LearnableFb
            },
            hidden: self.hidden,
            kernel_width: self.kernel_width,
            stride: self.stride,
            lp_width: self.lp_width,
            pcen_eps: self.eps,
            curriculum: match self.curriculum {
                Toggle::Auto => self.task.default_curriculum(),
                Toggle::On => true,
                Toggle::Off => false,
            },
            patience: self.patience,
            rel_tol: self.rel_tol,
            ..TrainConfig::default()
        }
    }
}
