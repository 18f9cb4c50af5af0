//! Forward pass of the learnable frontend: complex Gabor band-pass
//! filtering, squared modulus, per-channel Gaussian lowpass with strided
//! decimation, and PCEN compression.

pub(crate) mod conv;
mod export;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use conv::ConvPlan;

use crate::audio_io::AudioClip;
use crate::error::{LeafError, Result};
use crate::exec::ExecMode;
use crate::filterbank::{check_kernel_width, gabor_kernel, GaborFilterbank};

/// Guard constant added to the smoothed energy before the AGC division.
pub const PCEN_EPS: f64 = 1e-6;
pub const DEFAULT_STRIDE: usize = 160;
pub const DEFAULT_LP_WIDTH: usize = 401;
pub const SIGMA_LP_MIN: f64 = 1.0;

pub const DEFAULT_PCEN_ALPHA: f64 = 0.96;
pub const DEFAULT_PCEN_DELTA: f64 = 2.0;
pub const DEFAULT_PCEN_R: f64 = 0.5;
pub const DEFAULT_PCEN_S: f64 = 0.04;

/// Time-frequency representation, `n_frames x n_channels`, stored row-major
/// by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TFRep {
    pub n_frames: usize,
    pub n_channels: usize,
    pub frame_rate_hz: f64,
    pub data: Vec<f64>,
}

impl TFRep {
    pub fn zeros(n_frames: usize, n_channels: usize, frame_rate_hz: f64) -> Self {
        Self {
            n_frames,
            n_channels,
            frame_rate_hz,
            data: vec![0.0; n_frames * n_channels],
        }
    }

    pub fn from_channels(channels: &[Vec<f64>], frame_rate_hz: f64) -> Self {
        let n_channels = channels.len();
        let n_frames = channels.first().map_or(0, Vec::len);
        let mut data = vec![0.0; n_frames * n_channels];
        for (n, ch) in channels.iter().enumerate() {
            debug_assert_eq!(ch.len(), n_frames);
            for (t, v) in ch.iter().enumerate() {
                data[t * n_channels + n] = *v;
            }
        }
        Self {
            n_frames,
            n_channels,
            frame_rate_hz,
            data,
        }
    }

    pub fn get(&self, frame: usize, channel: usize) -> f64 {
        self.data[frame * self.n_channels + channel]
    }

    pub fn channel(&self, n: usize) -> Vec<f64> {
        (0..self.n_frames).map(|t| self.get(t, n)).collect()
    }

    pub fn channels(&self) -> Vec<Vec<f64>> {
        (0..self.n_channels).map(|n| self.channel(n)).collect()
    }

    /// Mean over frames for every channel.
    pub fn mean_pool(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_channels];
        for row in self.data.chunks_exact(self.n_channels) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let inv = 1.0 / self.n_frames.max(1) as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-channel PCEN parameters, stored in unconstrained form:
/// `alpha = exp(log_alpha)`, `delta = exp(log_delta)`, `r = sigmoid(r_logit)`,
/// `s = sigmoid(s_logit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcenParams {
    pub log_alpha: Vec<f64>,
    pub log_delta: Vec<f64>,
    pub r_logit: Vec<f64>,
    pub s_logit: Vec<f64>,
    pub eps: f64,
}

impl PcenParams {
    /// Builds parameters from constrained values, identical across channels.
    pub fn uniform(n: usize, alpha: f64, delta: f64, r: f64, s: f64) -> Result<Self> {
        if !(alpha >= 0.0 && delta > 0.0 && r > 0.0 && r <= 1.0 && s > 0.0 && s <= 1.0) {
            return Err(LeafError::Param(format!(
                "PCEN values out of range: alpha {alpha}, delta {delta}, r {r}, s {s}"
            )));
        }
        Ok(Self {
            log_alpha: vec![alpha.ln(); n],
            log_delta: vec![delta.ln(); n],
            r_logit: vec![logit(r); n],
            s_logit: vec![logit(s); n],
            eps: PCEN_EPS,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.log_alpha.len()
    }

    pub fn alpha(&self, n: usize) -> f64 {
        self.log_alpha[n].exp()
    }

    pub fn delta(&self, n: usize) -> f64 {
        self.log_delta[n].exp()
    }

    pub fn r(&self, n: usize) -> f64 {
        sigmoid(self.r_logit[n])
    }

    pub fn s(&self, n: usize) -> f64 {
        sigmoid(self.s_logit[n])
    }
}

/// Complete trainable frontend state.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendParams {
    pub filterbank: GaborFilterbank,
    pub sigma_lp: Vec<f64>,
    pub pcen: PcenParams,
    pub stride: usize,
    pub lp_width: usize,
}

impl FrontendParams {
    pub fn new(
        filterbank: GaborFilterbank,
        sigma_lp: Vec<f64>,
        pcen: PcenParams,
        stride: usize,
        lp_width: usize,
    ) -> Result<Self> {
        let n = filterbank.n_filters();
        if sigma_lp.len() != n || pcen.n_channels() != n {
            return Err(LeafError::Spec(format!(
                "channel count mismatch: {n} filters, {} lowpass widths, {} PCEN channels",
                sigma_lp.len(),
                pcen.n_channels()
            )));
        }
        if stride == 0 {
            return Err(LeafError::Spec("stride must be at least 1".into()));
        }
        check_kernel_width(lp_width)?;
        if let Some(s) = sigma_lp.iter().find(|s| !(**s > 0.0)) {
            return Err(LeafError::Param(format!("lowpass sigma {s} must be positive")));
        }
        Ok(Self {
            filterbank,
            sigma_lp,
            pcen,
            stride,
            lp_width,
        })
    }

    /// Frontend with the conventional LEAF starting values for the lowpass
    /// and PCEN stages.
    pub fn with_defaults(filterbank: GaborFilterbank, stride: usize, lp_width: usize) -> Result<Self> {
        let n = filterbank.n_filters();
        let sigma_lp = default_sigma_lp(lp_width);
        let pcen = PcenParams::uniform(
            n,
            DEFAULT_PCEN_ALPHA,
            DEFAULT_PCEN_DELTA,
            DEFAULT_PCEN_R,
            DEFAULT_PCEN_S,
        )?;
        Self::new(filterbank, vec![sigma_lp; n], pcen, stride, lp_width)
    }

    pub fn n_channels(&self) -> usize {
        self.filterbank.n_filters()
    }
}

/// Starting lowpass width: 0.4 of the kernel half-width, clamped.
pub fn default_sigma_lp(lp_width: usize) -> f64 {
    project_sigma_lp(0.4 * (lp_width / 2) as f64, lp_width)
}

pub fn sigma_lp_max(lp_width: usize) -> f64 {
    ((lp_width / 2) as f64 / 2.0).max(SIGMA_LP_MIN)
}

/// Clamps a lowpass width into `[SIGMA_LP_MIN, (lp_width - 1) / 4]`.
pub fn project_sigma_lp(sigma: f64, lp_width: usize) -> f64 {
    if sigma.is_nan() {
        return SIGMA_LP_MIN;
    }
    sigma.clamp(SIGMA_LP_MIN, sigma_lp_max(lp_width))
}

/// Number of frames produced by strided decimation of `len` samples.
pub fn n_frames(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

pub(crate) fn check_input(len: usize, kernel_width: usize) -> Result<()> {
    if len < kernel_width {
        return Err(LeafError::InputTooShort { len, kernel_width });
    }
    Ok(())
}

/// Squared modulus of each band-pass output, at the input rate.
pub fn band_energies(clip: &AudioClip, fb: &GaborFilterbank) -> Result<TFRep> {
    check_input(clip.len(), fb.kernel_width)?;
    let plan = ConvPlan::new(clip.len(), fb.kernel_width);
    let x_spec = plan.signal_spectrum(&clip.samples);
    let kernels = (0..fb.n_filters())
        .map(|n| fb.kernel(n))
        .collect::<Result<Vec<_>>>()?;
    let channels = ExecMode::default().map_slice(&kernels, |k| {
        let y = plan.convolve(&x_spec, &plan.kernel_spectrum(k));
        y.iter().map(Complex64::norm_sqr).collect::<Vec<f64>>()
    });
    Ok(TFRep::from_channels(&channels, clip.sample_rate_hz as f64))
}

/// Gaussian lowpass kernel with the normalizing amplitude `1/(sqrt(2 pi) sigma)`.
pub(crate) fn lowpass_kernel(sigma: f64, lp_width: usize) -> Vec<f64> {
    let half = (lp_width / 2) as isize;
    let amp = 1.0 / ((2.0 * PI).sqrt() * sigma);
    let inv = 1.0 / (2.0 * sigma * sigma);
    (-half..=half)
        .map(|u| amp * (-(u * u) as f64 * inv).exp())
        .collect()
}

/// `z(k) = sum_u e(k*stride - u) phi(u)` with zero padding.
pub(crate) fn lowpass_channel(e: &[f64], kernel: &[f64], stride: usize) -> Vec<f64> {
    let half = (kernel.len() / 2) as isize;
    let len = e.len() as isize;
    (0..n_frames(e.len(), stride))
        .map(|k| {
            let centre = (k * stride) as isize;
            let lo = (-half).max(centre - len + 1);
            let hi = half.min(centre);
            (lo..=hi)
                .map(|u| kernel[(u + half) as usize] * e[(centre - u) as usize])
                .sum()
        })
        .collect()
}

/// Convolves every channel with its own Gaussian and keeps every
/// `stride`-th sample.
pub fn lowpass_downsample(
    tf: &TFRep,
    sigma_lp: &[f64],
    stride: usize,
    lp_width: usize,
) -> Result<TFRep> {
    if sigma_lp.len() != tf.n_channels {
        return Err(LeafError::Spec(format!(
            "{} lowpass widths for {} channels",
            sigma_lp.len(),
            tf.n_channels
        )));
    }
    if stride == 0 {
        return Err(LeafError::Spec("stride must be at least 1".into()));
    }
    check_kernel_width(lp_width)?;
    if let Some(s) = sigma_lp.iter().find(|s| !(**s > 0.0)) {
        return Err(LeafError::Param(format!("lowpass sigma {s} must be positive")));
    }
    let channels = tf.channels();
    let out = ExecMode::default().map_indexed(tf.n_channels, |n| {
        lowpass_channel(&channels[n], &lowpass_kernel(sigma_lp[n], lp_width), stride)
    });
    Ok(TFRep::from_channels(&out, tf.frame_rate_hz / stride as f64))
}

/// `M(0) = E(0)`, `M(t) = (1 - s) M(t-1) + s E(t)`.
pub(crate) fn smooth_channel(e: &[f64], s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(e.len());
    let mut m = match e.first() {
        Some(&v) => v,
        None => return out,
    };
    out.push(m);
    for &v in &e[1..] {
        m = (1.0 - s) * m + s * v;
        out.push(m);
    }
    out
}

/// First-order recursive smoother along time, one coefficient per channel.
pub fn pcen_smoother(e: &TFRep, s: &[f64]) -> Result<TFRep> {
    if s.len() != e.n_channels {
        return Err(LeafError::Spec(format!(
            "{} smoother coefficients for {} channels",
            s.len(),
            e.n_channels
        )));
    }
    if let Some(v) = s.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(LeafError::Param(format!("smoother coefficient {v} outside (0, 1]")));
    }
    let out: Vec<Vec<f64>> = e
        .channels()
        .iter()
        .zip(s)
        .map(|(ch, &s)| smooth_channel(ch, s))
        .collect();
    Ok(TFRep::from_channels(&out, e.frame_rate_hz))
}

pub(crate) fn pcen_channel(e: &[f64], m: &[f64], alpha: f64, delta: f64, r: f64, eps: f64) -> Vec<f64> {
    let floor = delta.powf(r);
    e.iter()
        .zip(m)
        .map(|(&e, &m)| (e * (m + eps).powf(-alpha) + delta).powf(r) - floor)
        .collect()
}

/// `((E / (M + eps)^alpha) + delta)^r - delta^r` per channel.
pub fn pcen_forward(e: &TFRep, p: &PcenParams) -> Result<TFRep> {
    if p.n_channels() != e.n_channels {
        return Err(LeafError::Spec(format!(
            "{} PCEN channels for {} input channels",
            p.n_channels(),
            e.n_channels
        )));
    }
    let out: Vec<Vec<f64>> = e
        .channels()
        .iter()
        .enumerate()
        .map(|(n, ch)| {
            let m = smooth_channel(ch, p.s(n));
            pcen_channel(ch, &m, p.alpha(n), p.delta(n), p.r(n), p.eps)
        })
        .collect();
    Ok(TFRep::from_channels(&out, e.frame_rate_hz))
}

/// Full frontend: band energies, lowpass decimation, then PCEN.
pub fn forward(clip: &AudioClip, fp: &FrontendParams) -> Result<TFRep> {
    check_input(clip.len(), fp.filterbank.kernel_width)?;
    let plan = ConvPlan::new(clip.len(), fp.filterbank.kernel_width);
    forward_with_plan(clip, fp, &plan, ExecMode::default())
}

/// [`forward`] with a caller-supplied convolution plan for the clip length.
pub fn forward_with_plan(
    clip: &AudioClip,
    fp: &FrontendParams,
    plan: &ConvPlan,
    mode: ExecMode,
) -> Result<TFRep> {
    check_input(clip.len(), fp.filterbank.kernel_width)?;
    let fb = &fp.filterbank;
    let x_spec = plan.signal_spectrum(&clip.samples);
    let channels = mode.map_indexed(fb.n_filters(), |n| -> Result<Vec<f64>> {
        let kernel = gabor_kernel(fb.eta[n], fb.sigma_bw[n], fb.kernel_width)?;
        let y = plan.convolve(&x_spec, &plan.kernel_spectrum(&kernel));
        let e: Vec<f64> = y.iter().map(Complex64::norm_sqr).collect();
        let z = lowpass_channel(&e, &lowpass_kernel(fp.sigma_lp[n], fp.lp_width), fp.stride);
        let m = smooth_channel(&z, fp.pcen.s(n));
        Ok(pcen_channel(
            &z,
            &m,
            fp.pcen.alpha(n),
            fp.pcen.delta(n),
            fp.pcen.r(n),
            fp.pcen.eps,
        ))
    });
    let channels = channels.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TFRep::from_channels(
        &channels,
        clip.sample_rate_hz as f64 / fp.stride as f64,
    ))
}
