//! Audio ingestion, level normalization, noise mixing and scene synthesis.

mod synth;
mod wav;

pub use synth::{pink_noise, synthesize_scene, white_noise, Band, NoiseKind, Scene, SceneSpec};
pub use wav::{load_wav, write_wav_f32, write_wav_pcm16};

use crate::error::{LeafError, Result};

/// Mono PCM clip with amplitudes nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(LeafError::Spec("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(LeafError::Param(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }
}

/// Linear amplitude for a level expressed in dB relative to full scale.
pub fn dbfs_to_amplitude(dbfs: f64) -> f64 {
    10f64.powf(dbfs / 20.0)
}

/// Scales the clip so its peak absolute amplitude sits at `target_dbfs`.
pub fn normalize_dbfs(clip: &AudioClip, target_dbfs: f64) -> Result<AudioClip> {
    if !(target_dbfs <= 0.0) {
        return Err(LeafError::Domain(format!(
            "target level {target_dbfs} dBFS must be <= 0"
        )));
    }
    let peak = clip.peak();
    if peak == 0.0 {
        return Err(LeafError::DegenerateSignal(
            "cannot normalize an all-zero clip".into(),
        ));
    }
    let gain = dbfs_to_amplitude(target_dbfs) / peak;
    Ok(AudioClip {
        samples: clip.samples.iter().map(|s| s * gain).collect(),
        sample_rate_hz: clip.sample_rate_hz,
    })
}

/// Result of [`mix_at_snr`].
#[derive(Debug, Clone)]
pub struct Mix {
    pub clip: AudioClip,
    /// Amplitude gain applied to the cropped noise.
    pub noise_gain: f64,
    /// Number of output samples that were clipped to [-1, 1].
    pub clipped_samples: usize,
}

/// Adds `noise` to `signal` so that the signal power over the active samples
/// relative to the noise power over the whole crop equals `snr_db`.
///
/// The noise is cropped to the signal length starting at `noise_offset`.
pub fn mix_at_snr(
    signal: &AudioClip,
    noise: &AudioClip,
    snr_db: f64,
    active_mask: &[bool],
    noise_offset: usize,
) -> Result<Mix> {
    if signal.sample_rate_hz != noise.sample_rate_hz {
        return Err(LeafError::Spec(format!(
            "sample rate mismatch: signal {} Hz, noise {} Hz",
            signal.sample_rate_hz, noise.sample_rate_hz
        )));
    }
    let n = signal.len();
    if active_mask.len() != n {
        return Err(LeafError::Spec(format!(
            "mask length {} does not match signal length {n}",
            active_mask.len()
        )));
    }
    if noise_offset + n > noise.len() {
        return Err(LeafError::Spec(format!(
            "noise of {} samples cannot be cropped to {n} samples at offset {noise_offset}",
            noise.len()
        )));
    }
    let active = active_mask.iter().filter(|&&a| a).count();
    if active == 0 {
        return Err(LeafError::DegenerateSignal("activity mask is empty".into()));
    }
    let signal_power = signal
        .samples
        .iter()
        .zip(active_mask)
        .filter(|(_, &a)| a)
        .map(|(s, _)| s * s)
        .sum::<f64>()
        / active as f64;
    let crop = &noise.samples[noise_offset..noise_offset + n];
    let noise_power = crop.iter().map(|s| s * s).sum::<f64>() / n as f64;
    if noise_power == 0.0 {
        return Err(LeafError::DegenerateSignal("noise has zero power".into()));
    }
    let noise_gain = (signal_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut clipped_samples = 0;
    let samples = signal
        .samples
        .iter()
        .zip(crop)
        .map(|(s, v)| {
            let y = s + noise_gain * v;
            if y.abs() > 1.0 {
                clipped_samples += 1;
                y.clamp(-1.0, 1.0)
            } else {
                y
            }
        })
        .collect();
    Ok(Mix {
        clip: AudioClip {
            samples,
            sample_rate_hz: signal.sample_rate_hz,
        },
        noise_gain,
        clipped_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 16_000).unwrap()
    }

    #[test]
    fn normalize_to_minus_six() {
        let c = clip(vec![0.2, -1.0, 0.5]);
        let out = normalize_dbfs(&c, -6.0).unwrap();
        // 10^(-6/20)
        assert!((out.peak() - 0.501_187_233_627_272_3).abs() < 1e-9);
        assert!((out.samples[0] / out.samples[2] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn normalize_to_full_scale() {
        let c = clip(vec![0.25, -0.1]);
        let out = normalize_dbfs(&c, 0.0).unwrap();
        assert!((out.peak() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_silence_and_positive_targets() {
        let c = clip(vec![0.0; 8]);
        assert!(matches!(
            normalize_dbfs(&c, -6.0),
            Err(LeafError::DegenerateSignal(_))
        ));
        let c = clip(vec![0.5; 8]);
        assert!(matches!(normalize_dbfs(&c, 3.0), Err(LeafError::Domain(_))));
    }

    #[test]
    fn zero_db_equal_power_has_unit_gain() {
        let s = clip(vec![0.5, -0.5, 0.5, -0.5]);
        let n = clip(vec![-0.5, 0.5, 0.5, -0.5]);
        let mix = mix_at_snr(&s, &n, 0.0, &[true; 4], 0).unwrap();
        assert!((mix.noise_gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twenty_db_equal_power_gain() {
        let s = clip(vec![0.3, -0.3, 0.3, -0.3]);
        let n = clip(vec![0.3, 0.3, -0.3, -0.3]);
        let mix = mix_at_snr(&s, &n, 20.0, &[true; 4], 0).unwrap();
        // sqrt(10^(-20/10))
        assert!((mix.noise_gain - 0.1).abs() < 1e-12);
    }

    #[test]
    fn masked_power_changes_gain_by_sqrt_two() {
        // First half carries all the energy: masked power is twice the global power.
        let mut s = vec![0.0; 8];
        for v in s.iter_mut().take(4) {
            *v = 0.4;
        }
        let s = clip(s);
        let n = clip(vec![0.1, -0.2, 0.3, -0.1, 0.2, -0.3, 0.1, 0.05]);
        let half: Vec<bool> = (0..8).map(|i| i < 4).collect();
        let full = mix_at_snr(&s, &n, 5.0, &[true; 8], 0).unwrap();
        let masked = mix_at_snr(&s, &n, 5.0, &half, 0).unwrap();
        let global = s.samples.iter().map(|x| x * x).sum::<f64>() / 8.0;
        let active = s.samples[..4].iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!((active / global - 2.0).abs() < 1e-12);
        assert!((masked.noise_gain / full.noise_gain - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mix_degenerate_inputs() {
        let s = clip(vec![0.5; 4]);
        let n = clip(vec![0.1; 4]);
        assert!(matches!(
            mix_at_snr(&s, &n, 0.0, &[false; 4], 0),
            Err(LeafError::DegenerateSignal(_))
        ));
        let z = clip(vec![0.0; 4]);
        assert!(matches!(
            mix_at_snr(&s, &z, 0.0, &[true; 4], 0),
            Err(LeafError::DegenerateSignal(_))
        ));
    }

    #[test]
    fn mix_crops_noise_at_offset_and_reports_clipping() {
        let s = clip(vec![0.9, 0.9]);
        let n = clip(vec![0.0, 0.0, 1.0, 1.0]);
        let mix = mix_at_snr(&s, &n, 0.0, &[true; 2], 2).unwrap();
        assert_eq!(mix.clipped_samples, 2);
        assert!(mix.clip.samples.iter().all(|v| *v == 1.0));
        assert!(mix_at_snr(&s, &n, 0.0, &[true; 2], 3).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(
            samples in proptest::collection::vec(-1.0f64..1.0, 1..64),
            target in -40.0f64..0.0,
        ) {
            prop_assume!(samples.iter().any(|s| s.abs() > 1e-6));
            let c = clip(samples);
            let once = normalize_dbfs(&c, target).unwrap();
            let twice = normalize_dbfs(&once, target).unwrap();
            for (a, b) in once.samples.iter().zip(&twice.samples) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn measured_snr_matches_request(
            seed in 0u64..1000,
            snr in -10.0f64..30.0,
        ) {
            let s = white_noise(512, seed, 16_000);
            let n = pink_noise(600, seed + 1, 16_000);
            let mask: Vec<bool> = (0..512).map(|i| (i / 64) % 2 == 0).collect();
            let mix = mix_at_snr(&s, &n, snr, &mask, 37).unwrap();
            let ps = s.samples.iter().zip(&mask).filter(|(_, &m)| m).map(|(x, _)| x * x).sum::<f64>()
                / mask.iter().filter(|&&m| m).count() as f64;
            let pn = n.samples[37..37 + 512].iter().map(|x| (x * mix.noise_gain).powi(2)).sum::<f64>() / 512.0;
            let measured = 10.0 * (ps / pn).log10();
            prop_assert!((measured - snr).abs() < 0.01);
        }
    }
}
