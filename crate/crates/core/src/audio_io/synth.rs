//! Deterministic desk-scale scene synthesis: band-limited chirps over
//! white or pink background noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{mix_at_snr, normalize_dbfs, AudioClip};
use crate::error::{LeafError, Result};

const PINK_ROWS: usize = 16;
const FADE_S: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = LeafError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            other => Err(LeafError::Config(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub const fn new(lo_hz: f64, hi_hz: f64) -> Self {
        Self { lo_hz, hi_hz }
    }
}

/// Recipe for one synthetic clip.
///
/// Each class owns a band of tone frequencies; a `None` band is a
/// background-only class.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub class_bands: Vec<Option<Band>>,
    /// Class to render; drawn from the seed when absent.
    pub label: Option<usize>,
    pub tone_count: usize,
    pub tone_duration_s: (f64, f64),
    pub noise: NoiseKind,
    pub snr_db: f64,
    pub target_dbfs: f64,
}

impl SceneSpec {
    pub fn n_classes(&self) -> usize {
        self.class_bands.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(LeafError::Spec("sample rate must be positive".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(LeafError::Spec("clip duration must be positive".into()));
        }
        if self.class_bands.is_empty() {
            return Err(LeafError::Spec("scene needs at least one class".into()));
        }
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        for (c, band) in self.class_bands.iter().enumerate() {
            if let Some(b) = band {
                if !(b.lo_hz > 0.0 && b.lo_hz < b.hi_hz) {
                    return Err(LeafError::Spec(format!(
                        "class {c}: band [{}, {}] Hz is not an increasing positive interval",
                        b.lo_hz, b.hi_hz
                    )));
                }
                if b.hi_hz > nyquist {
                    return Err(LeafError::Spec(format!(
                        "class {c}: band edge {} Hz lies above Nyquist ({nyquist} Hz)",
                        b.hi_hz
                    )));
                }
            }
        }
        if let Some(label) = self.label {
            if label >= self.class_bands.len() {
                return Err(LeafError::Spec(format!(
                    "label {label} out of range for {} classes",
                    self.class_bands.len()
                )));
            }
        }
        let (lo, hi) = self.tone_duration_s;
        if !(lo > 0.0 && lo <= hi) {
            return Err(LeafError::Spec("invalid tone duration range".into()));
        }
        Ok(())
    }
}

/// Output of [`synthesize_scene`].
#[derive(Debug, Clone)]
pub struct Scene {
    pub clip: AudioClip,
    pub label: usize,
    pub active_mask: Vec<bool>,
    pub clipped_samples: usize,
}

/// Gaussian white noise with standard deviation 0.25.
pub fn white_noise(len: usize, seed: u64, sample_rate_hz: u32) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len)
        .map(|_| 0.25 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    AudioClip {
        samples,
        sample_rate_hz,
    }
}

/// Pink noise by the Voss-McCartney row-update scheme.
pub fn pink_noise(len: usize, seed: u64, sample_rate_hz: u32) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: [f64; PINK_ROWS] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let mut running: f64 = rows.iter().sum();
    let scale = 0.25 / ((PINK_ROWS + 1) as f64).sqrt();
    let samples = (0..len)
        .map(|i| {
            let counter = i as u64 + 1;
            let row = counter.trailing_zeros() as usize;
            if row < PINK_ROWS {
                let fresh: f64 = rng.sample(StandardNormal);
                running += fresh - rows[row];
                rows[row] = fresh;
            }
            let white: f64 = rng.sample(StandardNormal);
            scale * (running + white)
        })
        .collect();
    AudioClip {
        samples,
        sample_rate_hz,
    }
}

/// Renders a deterministic scene from `(spec, seed)`.
pub fn synthesize_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let fs = spec.sample_rate_hz as f64;
    let len = (spec.duration_s * fs).round() as usize;
    if len == 0 {
        return Err(LeafError::Spec("clip duration rounds to zero samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = match spec.label {
        Some(l) => l,
        None => rng.random_range(0..spec.n_classes()),
    };
    let noise_seed: u64 = rng.random();
    let noise = match spec.noise {
        NoiseKind::White => white_noise(len, noise_seed, spec.sample_rate_hz),
        NoiseKind::Pink => pink_noise(len, noise_seed, spec.sample_rate_hz),
    };

    let mut signal = vec![0.0; len];
    let mut mask = vec![false; len];
    if let Some(band) = spec.class_bands[label] {
        let fade = ((FADE_S * fs).round() as usize).max(1);
        for _ in 0..spec.tone_count {
            let (dmin, dmax) = spec.tone_duration_s;
            let dur = if dmax > dmin {
                rng.random_range(dmin..=dmax)
            } else {
                dmin
            };
            let tone_len = ((dur * fs).round() as usize).clamp(1, len);
            let start = rng.random_range(0..=len - tone_len);
            let f0 = rng.random_range(band.lo_hz..=band.hi_hz);
            let f1 = rng.random_range(band.lo_hz..=band.hi_hz);
            let phase0 = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..=1.0);
            let mut phase = phase0;
            for k in 0..tone_len {
                let frac = k as f64 / tone_len as f64;
                let f = f0 + (f1 - f0) * frac;
                let ramp = fade_gain(k, tone_len, fade);
                signal[start + k] += amp * ramp * phase.sin();
                mask[start + k] = true;
                phase += 2.0 * PI * f / fs;
            }
        }
    }

    let signal = AudioClip {
        samples: signal,
        sample_rate_hz: spec.sample_rate_hz,
    };
    let (mixed, clipped_samples) = if mask.iter().any(|&m| m) {
        let mix = mix_at_snr(&signal, &noise, spec.snr_db, &mask, 0)?;
        (mix.clip, mix.clipped_samples)
    } else {
        (noise, 0)
    };
    let clip = normalize_dbfs(&mixed, spec.target_dbfs)?;
    Ok(Scene {
        clip,
        label,
        active_mask: mask,
        clipped_samples,
    })
}

fn fade_gain(k: usize, len: usize, fade: usize) -> f64 {
    let fade = fade.min(len / 2).max(1);
    let edge = k.min(len - 1 - k);
    if edge >= fade {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos()
    }
}
