use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioClip;
use crate::error::{LeafError, Result};

/// Reads a RIFF/WAVE file (PCM16 or float32), averaging channels to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(LeafError::Format("zero channels in header".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (format, bits) => {
            return Err(LeafError::Unsupported(format!(
                "{}: {bits}-bit {format:?} samples (expected PCM16 or float32)",
                path.display()
            )))
        }
    };
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(samples, spec.sample_rate)
}

fn map_hound(path: &Path, err: hound::Error) -> LeafError {
    match err {
        hound::Error::IoError(e)
            if matches!(
                e.kind(),
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied
            ) =>
        {
            LeafError::io(path, e)
        }
        hound::Error::IoError(e) => LeafError::Format(format!("{}: {e}", path.display())),
        hound::Error::Unsupported => {
            LeafError::Unsupported(format!("{}: unsupported WAVE encoding", path.display()))
        }
        other => LeafError::Format(format!("{}: {other}", path.display())),
    }
}

/// Writes a mono 16-bit PCM file, clamping samples to [-1, 1].
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    write_with(path.as_ref(), spec, |w| {
        for s in &clip.samples {
            w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
        }
        Ok(())
    })
}

/// Writes a mono IEEE float32 file.
pub fn write_wav_f32(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    write_with(path.as_ref(), spec, |w| {
        for s in &clip.samples {
            w.write_sample(*s as f32)?;
        }
        Ok(())
    })
}

fn write_with<F>(path: &Path, spec: WavSpec, body: F) -> Result<()>
where
    F: FnOnce(&mut WavWriter<std::io::BufWriter<std::fs::File>>) -> hound::Result<()>,
{
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    body(&mut writer).map_err(|e| map_hound(path, e))?;
    writer.finalize().map_err(|e| map_hound(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, spec: WavSpec, samples: &[i32]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for s in samples {
            match spec.bits_per_sample {
                16 => w.write_sample(*s as i16).unwrap(),
                _ => w.write_sample(*s).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    fn pcm16(channels: u16) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        }
    }

    #[test]
    fn pcm16_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_raw(&path, pcm16(1), &[32767, 0, -32768]);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.sample_rate_hz, 16_000);
        assert!((clip.samples[0] - 32767.0 / 32768.0).abs() < 1e-12);
        assert_eq!(clip.samples[1], 0.0);
        assert_eq!(clip.samples[2], -1.0);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        write_raw(&path, pcm16(2), &[16384, -16384, 8192, 0]);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples, vec![0.0, 0.125]);
    }

    #[test]
    fn float_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let clip = AudioClip::new(vec![0.25, -0.5, 0.75], 8_000).unwrap();
        write_wav_f32(&path, &clip).unwrap();
        assert_eq!(load_wav(&path).unwrap(), clip);
    }

    #[test]
    fn rejects_other_encodings_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("24.wav");
        let spec = WavSpec {
            bits_per_sample: 24,
            ..pcm16(1)
        };
        write_raw(&path, spec, &[1, 2, 3]);
        assert!(matches!(load_wav(&path), Err(LeafError::Unsupported(_))));

        let bad = dir.path().join("bad.wav");
        std::fs::write(&bad, b"RIFF\x10\x00\x00\x00WAVEjunkjunk").unwrap();
        let err = load_wav(&bad).unwrap_err();
        assert!(matches!(err, LeafError::Format(_)), "{err:?}");
    }
}
