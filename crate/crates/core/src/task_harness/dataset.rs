//! Synthetic band-detection tasks. Items are stored as seeds and rendered
//! on demand, so a dataset is a few bytes per clip until it is used.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio_io::{synthesize_scene, AudioClip, Band, NoiseKind, SceneSpec};
use crate::error::{LeafError, Result};

/// Mixes two words into a well-spread seed (splitmix64 finalizer).
pub fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Tones in 300-3400 Hz versus background only.
    Band2,
    /// Which of four bands carries the tones.
    Band4,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Band2 => "band2",
            TaskKind::Band4 => "band4",
        }
    }

    pub fn class_bands(self) -> Vec<Option<Band>> {
        match self {
            TaskKind::Band2 => vec![None, Some(Band::new(300.0, 3400.0))],
            TaskKind::Band4 => vec![
                Some(Band::new(300.0, 1000.0)),
                Some(Band::new(1000.0, 2500.0)),
                Some(Band::new(2500.0, 5000.0)),
                Some(Band::new(5000.0, 7800.0)),
            ],
        }
    }

    pub fn n_classes(self) -> usize {
        self.class_bands().len()
    }

    pub fn default_sizes(self) -> DatasetSizes {
        match self {
            TaskKind::Band2 => DatasetSizes::new(180, 20, 40),
            TaskKind::Band4 => DatasetSizes::new(140, 30, 30),
        }
    }

    /// Whether the SNR curriculum is used unless configured otherwise.
    pub fn default_curriculum(self) -> bool {
        matches!(self, TaskKind::Band2)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = LeafError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "band2" => Ok(TaskKind::Band2),
            "band4" => Ok(TaskKind::Band4),
            other => Err(LeafError::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

impl FromStr for Split {
    type Err = LeafError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(LeafError::Format(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl DatasetSizes {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        Self { train, val, test }
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Rendering settings shared by every item of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub noise: NoiseKind,
    /// SNR used when no curriculum is active.
    pub snr_db: f64,
    pub tone_count: usize,
    pub tone_duration_s: (f64, f64),
    pub target_dbfs: f64,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        Self {
            kind,
            sample_rate_hz: 16_000,
            duration_s: 0.5,
            noise: NoiseKind::White,
            snr_db: 10.0,
            tone_count: 2,
            tone_duration_s: (0.1, 0.3),
            target_dbfs: -6.0,
        }
    }

    pub fn scene(&self, label: usize, snr_db: f64) -> SceneSpec {
        SceneSpec {
            sample_rate_hz: self.sample_rate_hz,
            duration_s: self.duration_s,
            class_bands: self.kind.class_bands(),
            label: Some(label),
            tone_count: self.tone_count,
            tone_duration_s: self.tone_duration_s,
            noise: self.noise,
            snr_db,
            target_dbfs: self.target_dbfs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Item {
    pub split: Split,
    pub index: usize,
    /// Rendering seed; the top byte encodes the split, so seed ranges of
    /// different splits never overlap.
    pub seed: u64,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: TaskSpec,
    pub seed: u64,
    pub items: Vec<Item>,
}

const INDEX_BITS: u32 = 24;

pub fn make_dataset(spec: &TaskSpec, sizes: DatasetSizes, seed: u64) -> Result<Dataset> {
    let c = spec.kind.n_classes();
    if sizes.total() < 10 * c {
        return Err(LeafError::Spec(format!(
            "{} items in total; {} needs at least {}",
            sizes.total(),
            spec.kind,
            10 * c
        )));
    }
    for split in Split::ALL {
        let n = sizes.get(split);
        if n < c {
            return Err(LeafError::Spec(format!(
                "{} split has {n} items, fewer than the {c} classes",
                split.as_str()
            )));
        }
        if n >= 1 << INDEX_BITS {
            return Err(LeafError::Spec(format!("{} split is too large", split.as_str())));
        }
    }
    spec.scene(0, spec.snr_db).validate()?;
    let base = (seed & 0xFFFF_FFFF) << INDEX_BITS;
    let mut items = Vec::with_capacity(sizes.total());
    for split in Split::ALL {
        for index in 0..sizes.get(split) {
            items.push(Item {
                split,
                index,
                seed: (split.tag() << 56) | base | index as u64,
                label: index % c,
            });
        }
    }
    Ok(Dataset {
        spec: spec.clone(),
        seed,
        items,
    })
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.spec.kind.n_classes()
    }

    pub fn split(&self, split: Split) -> Vec<Item> {
        self.items.iter().filter(|i| i.split == split).copied().collect()
    }

    pub fn render(&self, item: &Item, snr_db: f64) -> Result<AudioClip> {
        Ok(synthesize_scene(&self.spec.scene(item.label, snr_db), item.seed)?.clip)
    }

    /// Draws an SNR for `item` from `choices`, keyed by `salt`.
    pub fn pick_snr(item: &Item, choices: &[f64], salt: u64) -> f64 {
        if choices.len() == 1 {
            return choices[0];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(item.seed, salt));
        choices[rng.random_range(0..choices.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band2_sizes_and_balance() {
        let ds = make_dataset(&TaskSpec::new(TaskKind::Band2), DatasetSizes::new(200, 40, 40), 7).unwrap();
        assert_eq!(ds.items.len(), 280);
        for split in Split::ALL {
            let items = ds.split(split);
            let ones = items.iter().filter(|i| i.label == 1).count();
            assert!((ones as isize - (items.len() - ones) as isize).abs() <= 1);
        }
    }

    #[test]
    fn deterministic_and_disjoint() {
        let spec = TaskSpec::new(TaskKind::Band4);
        let a = make_dataset(&spec, DatasetSizes::new(40, 8, 8), 3).unwrap();
        assert_eq!(a, make_dataset(&spec, DatasetSizes::new(40, 8, 8), 3).unwrap());
        let seeds: std::collections::HashSet<u64> = a.items.iter().map(|i| i.seed).collect();
        assert_eq!(seeds.len(), a.items.len());
        let train_max = a.split(Split::Train).iter().map(|i| i.seed).max().unwrap();
        let test_min = a.split(Split::Test).iter().map(|i| i.seed).min().unwrap();
        assert!(train_max < test_min);
        let item = a.items[0];
        assert_eq!(a.render(&item, -5.0).unwrap(), a.render(&item, -5.0).unwrap());
    }

    #[test]
    fn invalid_sizes_rejected() {
        let spec = TaskSpec::new(TaskKind::Band4);
        assert!(matches!(
            make_dataset(&spec, DatasetSizes::new(20, 8, 8), 1),
            Err(LeafError::Spec(_))
        ));
        assert!(make_dataset(&spec, DatasetSizes::new(60, 2, 8), 1).is_err());
    }

    #[test]
    fn snr_pick_is_deterministic_and_in_set() {
        let ds = make_dataset(&TaskSpec::new(TaskKind::Band2), DatasetSizes::new(20, 2, 2), 1).unwrap();
        let choices = [-10.0, -5.0, 0.0];
        for item in &ds.items {
            let s = Dataset::pick_snr(item, &choices, 4);
            assert!(choices.contains(&s));
            assert_eq!(s, Dataset::pick_snr(item, &choices, 4));
        }
    }
}
