//! Per-clip forward pass that keeps its intermediates, and the matching
//! hand-derived reverse pass.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Group, Model, ParamVector};
use crate::audio_io::AudioClip;
use crate::error::{LeafError, Result};
use crate::exec::ExecMode;
use crate::filterbank::gabor_kernel;
use crate::frontend::{check_input, lowpass_channel, lowpass_kernel, smooth_channel, ConvPlan};

/// Training objective evaluated on each clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Softmax cross-entropy of the backend output.
    #[default]
    CrossEntropy,
    /// Half the mean squared frontend output; bypasses the backend.
    FeatureSquares,
}

#[derive(Debug, Clone, Copy)]
pub struct BackwardOptions {
    pub objective: Objective,
    pub mode: ExecMode,
    /// When false the band-pass stage is not differentiated and the
    /// filterbank gradient is left at zero.
    pub filterbank_grads: bool,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        Self {
            objective: Objective::CrossEntropy,
            mode: ExecMode::default(),
            filterbank_grads: true,
        }
    }
}

/// Forward result for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipEval {
    pub loss: f64,
    /// Class probabilities (empty for [`Objective::FeatureSquares`]).
    pub probs: Vec<f64>,
    /// Which hidden units were active; used to spot ReLU kinks.
    pub active: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct BatchGrad {
    /// Mean loss over the batch.
    pub loss: f64,
    /// Gradient of the mean loss.
    pub grad: ParamVector,
    pub clips: Vec<ClipEval>,
}

struct ChannelTape {
    kernel: Vec<Complex64>,
    y: Vec<Complex64>,
    e: Vec<f64>,
    lp: Vec<f64>,
    z: Vec<f64>,
    m: Vec<f64>,
    out: Vec<f64>,
}

struct ClipTape {
    channels: Vec<ChannelTape>,
    feat: Vec<f64>,
    eval: ClipEval,
    backend: Option<super::BackendForward>,
}

fn plans_for(model: &Model, clips: &[&AudioClip]) -> Result<HashMap<usize, ConvPlan>> {
    let w = model.frontend.filterbank.kernel_width;
    let mut plans = HashMap::new();
    for c in clips {
        check_input(c.len(), w)?;
        plans.entry(c.len()).or_insert_with(|| ConvPlan::new(c.len(), w));
    }
    Ok(plans)
}

fn check_batch(clips: &[&AudioClip], labels: &[usize], model: &Model, objective: Objective) -> Result<()> {
    if clips.is_empty() {
        return Err(LeafError::Spec("empty batch".into()));
    }
    if clips.len() != labels.len() {
        return Err(LeafError::Spec(format!(
            "{} clips but {} labels",
            clips.len(),
            labels.len()
        )));
    }
    if objective == Objective::CrossEntropy {
        if let Some(l) = labels.iter().find(|l| **l >= model.backend.classes) {
            return Err(LeafError::Spec(format!(
                "label {l} outside 0..{}",
                model.backend.classes
            )));
        }
    }
    Ok(())
}

fn clip_forward(
    model: &Model,
    clip: &AudioClip,
    label: usize,
    objective: Objective,
    plan: &ConvPlan,
    keep: bool,
) -> Result<ClipTape> {
    let fp = &model.frontend;
    let fb = &fp.filterbank;
    let x_spec = plan.signal_spectrum(&clip.samples);
    let mut channels = Vec::with_capacity(fb.n_filters());
    for n in 0..fb.n_filters() {
        let kernel = gabor_kernel(fb.eta[n], fb.sigma_bw[n], fb.kernel_width)?;
        let y = plan.convolve(&x_spec, &plan.kernel_spectrum(&kernel));
        let e: Vec<f64> = y.iter().map(Complex64::norm_sqr).collect();
        let lp = lowpass_kernel(fp.sigma_lp[n], fp.lp_width);
        let z = lowpass_channel(&e, &lp, fp.stride);
        let m = smooth_channel(&z, fp.pcen.s(n));
        let (alpha, delta, r) = (fp.pcen.alpha(n), fp.pcen.delta(n), fp.pcen.r(n));
        let floor = delta.powf(r);
        let out = z
            .iter()
            .zip(&m)
            .map(|(&z, &m)| (z * (m + fp.pcen.eps).powf(-alpha) + delta).powf(r) - floor)
            .collect();
        channels.push(ChannelTape {
            kernel,
            y: if keep { y } else { Vec::new() },
            e,
            lp,
            z,
            m,
            out,
        });
    }
    let n_frames = channels[0].out.len() as f64;
    let feat: Vec<f64> = channels
        .iter()
        .map(|c| c.out.iter().sum::<f64>() / n_frames)
        .collect();
    if !feat.iter().all(|v| v.is_finite()) {
        return Err(LeafError::Numerics { stage: "frontend" });
    }
    let (eval, backend) = match objective {
        Objective::CrossEntropy => {
            let f = model.backend.forward(&feat);
            let loss = super::cross_entropy(&f.logits, label);
            let eval = ClipEval {
                loss,
                probs: f.probs.clone(),
                active: f.pre.iter().map(|p| *p > 0.0).collect(),
            };
            (eval, Some(f))
        }
        Objective::FeatureSquares => {
            let count = channels.len() as f64 * n_frames;
            let loss = 0.5
                * channels
                    .iter()
                    .map(|c| c.out.iter().map(|v| v * v).sum::<f64>())
                    .sum::<f64>()
                / count;
            let eval = ClipEval {
                loss,
                probs: Vec::new(),
                active: Vec::new(),
            };
            (eval, None)
        }
    };
    if !eval.loss.is_finite() {
        return Err(LeafError::Numerics { stage: "loss" });
    }
    Ok(ClipTape {
        channels,
        feat,
        eval,
        backend,
    })
}

/// Gradients for one channel, in the order eta, sigma_bw, sigma_lp,
/// log_alpha, log_delta, r_logit, s_logit.
fn channel_backward(
    model: &Model,
    n: usize,
    tape: &ChannelTape,
    gout: &[f64],
    plan: &ConvPlan,
    x_spec: Option<&[Complex64]>,
) -> [f64; 7] {
    let fp = &model.frontend;
    let p = &fp.pcen;
    let (alpha, delta, r, s, eps) = (p.alpha(n), p.delta(n), p.r(n), p.s(n), p.eps);
    let k_len = tape.z.len();

    // Compression and gain control.
    let delta_r = delta.powf(r);
    let d_floor = r * delta_r / delta;
    let floor_log = delta_r * delta.ln();
    let mut gz = vec![0.0; k_len];
    let mut gm = vec![0.0; k_len];
    let (mut g_alpha, mut g_delta, mut g_r) = (0.0, 0.0, 0.0);
    for k in 0..k_len {
        let g = gout[k];
        if g == 0.0 {
            continue;
        }
        let me = tape.m[k] + eps;
        let inv = me.powf(-alpha);
        let q = tape.z[k] * inv;
        let base = q + delta;
        let pow = base.powf(r);
        let d_base = r * pow / base;
        let gq = g * d_base;
        g_delta += g * (d_base - d_floor);
        g_r += g * (pow * base.ln() - floor_log);
        gz[k] += gq * inv;
        gm[k] -= gq * alpha * q / me;
        g_alpha -= gq * q * me.ln();
    }

    // Smoother recurrence, newest frame first.
    let mut g_s = 0.0;
    for k in (1..k_len).rev() {
        g_s += gm[k] * (tape.z[k] - tape.m[k - 1]);
        gz[k] += s * gm[k];
        gm[k - 1] += (1.0 - s) * gm[k];
    }
    gz[0] += gm[0];

    // Strided Gaussian lowpass.
    let half = (tape.lp.len() / 2) as isize;
    let len = tape.e.len() as isize;
    let mut g_phi = vec![0.0; tape.lp.len()];
    let mut g_e = vec![0.0; tape.e.len()];
    for (k, &g) in gz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let centre = (k * fp.stride) as isize;
        let lo = (-half).max(centre - len + 1);
        let hi = half.min(centre);
        for u in lo..=hi {
            let t = (centre - u) as usize;
            let j = (u + half) as usize;
            g_e[t] += g * tape.lp[j];
            g_phi[j] += g * tape.e[t];
        }
    }
    let sigma = fp.sigma_lp[n];
    let g_sigma_lp: f64 = g_phi
        .iter()
        .zip(&tape.lp)
        .enumerate()
        .map(|(j, (g, phi))| {
            let u = (j as isize - half) as f64;
            g * phi * (u * u / (sigma * sigma * sigma) - 1.0 / sigma)
        })
        .sum();

    // Squared modulus and the complex band-pass kernel.
    let (mut g_eta, mut g_sigma_bw) = (0.0, 0.0);
    if let Some(x_spec) = x_spec {
        let gy: Vec<Complex64> = tape.y.iter().zip(&g_e).map(|(y, g)| y * (2.0 * g)).collect();
        let big_g = plan.correlate(&gy, x_spec);
        let sb = fp.filterbank.sigma_bw[n];
        let kh = (tape.kernel.len() / 2) as isize;
        for (i, (gk, phi)) in big_g.iter().zip(&tape.kernel).enumerate() {
            let tau = (i as isize - kh) as f64;
            g_eta += PI * tau * (gk.im * phi.re - gk.re * phi.im);
            g_sigma_bw += (tau * tau / (sb * sb * sb) - 1.0 / sb) * (gk.re * phi.re + gk.im * phi.im);
        }
    }

    [
        g_eta,
        g_sigma_bw,
        g_sigma_lp,
        g_alpha * alpha,
        g_delta * delta,
        g_r * r * (1.0 - r),
        g_s * s * (1.0 - s),
    ]
}

const CHANNEL_GROUPS: [Group; 7] = [
    Group::Eta,
    Group::SigmaBw,
    Group::SigmaLp,
    Group::PcenAlpha,
    Group::PcenDelta,
    Group::PcenR,
    Group::PcenS,
];

fn clip_backward(
    model: &Model,
    clip: &AudioClip,
    label: usize,
    opts: &BackwardOptions,
    plan: &ConvPlan,
) -> Result<(ClipEval, ParamVector)> {
    let tape = clip_forward(model, clip, label, opts.objective, plan, opts.filterbank_grads)?;
    let mut grad = ParamVector::zeros(model.layout());
    let n_ch = tape.channels.len();
    let k_len = tape.channels[0].out.len();

    let gouts: Vec<Vec<f64>> = match (&tape.backend, opts.objective) {
        (Some(fwd), Objective::CrossEntropy) => {
            let bg = model.backend.backward(&tape.feat, fwd, label, 1.0);
            grad.group_mut(Group::BackendW1).copy_from_slice(&bg.w1);
            grad.group_mut(Group::BackendB1).copy_from_slice(&bg.b1);
            grad.group_mut(Group::BackendW2).copy_from_slice(&bg.w2);
            grad.group_mut(Group::BackendB2).copy_from_slice(&bg.b2);
            bg.input
                .iter()
                .map(|g| vec![g / k_len as f64; k_len])
                .collect()
        }
        _ => {
            let scale = 1.0 / (n_ch * k_len) as f64;
            tape.channels
                .iter()
                .map(|c| c.out.iter().map(|v| v * scale).collect())
                .collect()
        }
    };

    let x_spec = opts
        .filterbank_grads
        .then(|| plan.signal_spectrum(&clip.samples));
    for (n, ch) in tape.channels.iter().enumerate() {
        let g = channel_backward(model, n, ch, &gouts[n], plan, x_spec.as_deref());
        for (group, v) in CHANNEL_GROUPS.iter().zip(g) {
            grad.group_mut(*group)[n] = v;
        }
    }
    if !grad.is_finite() {
        return Err(LeafError::Numerics { stage: "backward" });
    }
    Ok((tape.eval, grad))
}

/// Mean loss over the batch and its gradient with respect to every entry of
/// the parameter vector.
pub fn backward(model: &Model, clips: &[&AudioClip], labels: &[usize]) -> Result<BatchGrad> {
    backward_with(model, clips, labels, &BackwardOptions::default())
}

pub fn backward_with(
    model: &Model,
    clips: &[&AudioClip],
    labels: &[usize],
    opts: &BackwardOptions,
) -> Result<BatchGrad> {
    check_batch(clips, labels, model, opts.objective)?;
    let plans = plans_for(model, clips)?;
    let per_clip = opts.mode.map_indexed(clips.len(), |i| {
        clip_backward(model, clips[i], labels[i], opts, &plans[&clips[i].len()])
    });
    // Fixed-order reduction keeps results independent of scheduling.
    let mut grad = ParamVector::zeros(model.layout());
    let mut loss = 0.0;
    let mut evals = Vec::with_capacity(clips.len());
    for r in per_clip {
        let (eval, g) = r?;
        loss += eval.loss;
        grad.values.iter_mut().zip(&g.values).for_each(|(a, b)| *a += b);
        evals.push(eval);
    }
    let inv = 1.0 / clips.len() as f64;
    grad.values.iter_mut().for_each(|v| *v *= inv);
    Ok(BatchGrad {
        loss: loss * inv,
        grad,
        clips: evals,
    })
}

/// Forward pass only, one result per clip.
pub fn evaluate(
    model: &Model,
    clips: &[&AudioClip],
    labels: &[usize],
    objective: Objective,
    mode: ExecMode,
) -> Result<Vec<ClipEval>> {
    check_batch(clips, labels, model, objective)?;
    let plans = plans_for(model, clips)?;
    mode.map_indexed(clips.len(), |i| {
        clip_forward(model, clips[i], labels[i], objective, &plans[&clips[i].len()], false)
            .map(|t| t.eval)
    })
    .into_iter()
    .collect()
}
