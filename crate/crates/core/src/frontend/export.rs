//! TFRep serialization: long-form CSV and a compact little-endian binary.

use std::fmt::Write as _;

use super::TFRep;
use crate::error::{LeafError, Result};

impl TFRep {
    /// CSV with columns `frame,channel,value`; the frame rate is kept in a
    /// leading comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 24);
        let _ = writeln!(out, "# frame_rate_hz={}", self.frame_rate_hz);
        out.push_str("frame,channel,value\n");
        for t in 0..self.n_frames {
            for n in 0..self.n_channels {
                let _ = writeln!(out, "{t},{n},{}", self.get(t, n));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut frame_rate_hz = None;
        let mut rows: Vec<(usize, usize, f64)> = Vec::new();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("frame_rate_hz=") {
                    frame_rate_hz = Some(v.parse::<f64>().map_err(|_| bad(i, line))?);
                }
                continue;
            }
            if !header {
                if line != "frame,channel,value" {
                    return Err(bad(i, line));
                }
                header = true;
                continue;
            }
            let mut it = line.split(',');
            let (Some(t), Some(n), Some(v), None) = (it.next(), it.next(), it.next(), it.next())
            else {
                return Err(bad(i, line));
            };
            rows.push((
                t.parse().map_err(|_| bad(i, line))?,
                n.parse().map_err(|_| bad(i, line))?,
                v.parse().map_err(|_| bad(i, line))?,
            ));
        }
        let frame_rate_hz =
            frame_rate_hz.ok_or_else(|| LeafError::Format("missing frame_rate_hz".into()))?;
        let n_frames = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n_channels = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n_frames * n_channels {
            return Err(LeafError::Format(format!(
                "{} rows do not fill a {n_frames} x {n_channels} grid",
                rows.len()
            )));
        }
        let mut tf = TFRep::zeros(n_frames, n_channels, frame_rate_hz);
        for (t, n, v) in rows {
            tf.data[t * n_channels + n] = v;
        }
        Ok(tf)
    }

    /// Header of two u64 (frames, channels) followed by `frames * channels`
    /// f32 values, all little-endian, row-major by frame.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(&(self.n_frames as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_channels as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    /// Parses [`TFRep::to_bytes`] output. The binary layout carries no frame
    /// rate, so it is supplied by the caller.
    pub fn from_bytes(bytes: &[u8], frame_rate_hz: f64) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(LeafError::Format("binary TFRep shorter than its header".into()));
        }
        let n_frames = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let n_channels = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() != 4 * n_frames * n_channels {
            return Err(LeafError::Format(format!(
                "binary TFRep body is {} bytes, expected {}",
                body.len(),
                4 * n_frames * n_channels
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(TFRep {
            n_frames,
            n_channels,
            frame_rate_hz,
            data,
        })
    }
}

fn bad(i: usize, line: &str) -> LeafError {
    LeafError::Format(format!("line {}: cannot parse `{line}`", i + 1))
}
