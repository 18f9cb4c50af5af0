//! Reverse-mode gradients through the frontend and backend, Adam with
//! projection, cosine-annealed learning rates, finite-difference checks and
//! checkpoints.

mod backend;
mod checkpoint;
mod gradcheck;
mod optim;
mod tape;

use std::fmt;
use std::ops::Range;

pub use backend::{cross_entropy, softmax, BackendForward, BackendGrad, BackendModel, DEFAULT_HIDDEN};
pub use checkpoint::{Checkpoint, CHECKPOINT_HEADER};
pub use gradcheck::{grad_check, random_instance, GradCheckOptions, GradCheckReport, GroupReport};
pub use optim::{
    cosine_annealing_lr, mask_active_bounds, AdamConfig, OptimizerState, DEFAULT_LR_MAX, DEFAULT_LR_MIN,
};
pub use tape::{backward, backward_with, evaluate, BackwardOptions, BatchGrad, ClipEval, Objective};

use crate::error::{LeafError, Result};
use crate::filterbank::{project_params, sigma_bw_max, SIGMA_BW_MIN};
use crate::frontend::{project_sigma_lp, sigma_lp_max, FrontendParams, SIGMA_LP_MIN};

/// Named slices of the flat parameter vector, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Eta,
    SigmaBw,
    SigmaLp,
    PcenAlpha,
    PcenDelta,
    PcenR,
    PcenS,
    BackendW1,
    BackendB1,
    BackendW2,
    BackendB2,
}

impl Group {
    pub const ALL: [Group; 11] = [
        Group::Eta,
        Group::SigmaBw,
        Group::SigmaLp,
        Group::PcenAlpha,
        Group::PcenDelta,
        Group::PcenR,
        Group::PcenS,
        Group::BackendW1,
        Group::BackendB1,
        Group::BackendW2,
        Group::BackendB2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::Eta => "filterbank.eta",
            Group::SigmaBw => "filterbank.sigma_bw",
            Group::SigmaLp => "frontend.sigma_lp",
            Group::PcenAlpha => "pcen.log_alpha",
            Group::PcenDelta => "pcen.log_delta",
            Group::PcenR => "pcen.r_logit",
            Group::PcenS => "pcen.s_logit",
            Group::BackendW1 => "backend.w1",
            Group::BackendB1 => "backend.b1",
            Group::BackendW2 => "backend.w2",
            Group::BackendB2 => "backend.b2",
        }
    }

    pub fn is_filterbank(self) -> bool {
        matches!(self, Group::Eta | Group::SigmaBw)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sizes that determine the flat layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_channels: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Layout {
    pub fn group_len(&self, g: Group) -> usize {
        match g {
            Group::BackendW1 => self.hidden * self.n_channels,
            Group::BackendB1 => self.hidden,
            Group::BackendW2 => self.classes * self.hidden,
            Group::BackendB2 => self.classes,
            _ => self.n_channels,
        }
    }

    pub fn range(&self, g: Group) -> Range<usize> {
        let mut start = 0;
        for other in Group::ALL {
            let len = self.group_len(other);
            if other == g {
                return start..start + len;
            }
            start += len;
        }
        unreachable!("every group is listed in Group::ALL")
    }

    pub fn len(&self) -> usize {
        Group::ALL.iter().map(|g| self.group_len(*g)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Group owning flat index `i`, with the offset inside that group.
    pub fn locate(&self, i: usize) -> Option<(Group, usize)> {
        let mut start = 0;
        for g in Group::ALL {
            let len = self.group_len(g);
            if i < start + len {
                return Some((g, i - start));
            }
            start += len;
        }
        None
    }
}

/// Flat view over every trainable value; gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn group(&self, g: Group) -> &[f64] {
        &self.values[self.layout.range(g)]
    }

    pub fn group_mut(&mut self, g: Group) -> &mut [f64] {
        let r = self.layout.range(g);
        &mut self.values[r]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Frontend plus backend, with the sample rate that fixes the projection
/// bounds of the filterbank.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub frontend: FrontendParams,
    pub backend: BackendModel,
    pub fs_hz: u32,
}

impl Model {
    pub fn new(frontend: FrontendParams, backend: BackendModel, fs_hz: u32) -> Result<Self> {
        if backend.n_in != frontend.n_channels() {
            return Err(LeafError::Spec(format!(
                "backend expects {} inputs, frontend has {} channels",
                backend.n_in,
                frontend.n_channels()
            )));
        }
        Ok(Self {
            frontend,
            backend,
            fs_hz,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            n_channels: self.frontend.n_channels(),
            hidden: self.backend.hidden,
            classes: self.backend.classes,
        }
    }

    pub fn to_vector(&self) -> ParamVector {
        let mut v = ParamVector::zeros(self.layout());
        let f = &self.frontend;
        let b = &self.backend;
        v.group_mut(Group::Eta).copy_from_slice(&f.filterbank.eta);
        v.group_mut(Group::SigmaBw).copy_from_slice(&f.filterbank.sigma_bw);
        v.group_mut(Group::SigmaLp).copy_from_slice(&f.sigma_lp);
        v.group_mut(Group::PcenAlpha).copy_from_slice(&f.pcen.log_alpha);
        v.group_mut(Group::PcenDelta).copy_from_slice(&f.pcen.log_delta);
        v.group_mut(Group::PcenR).copy_from_slice(&f.pcen.r_logit);
        v.group_mut(Group::PcenS).copy_from_slice(&f.pcen.s_logit);
        v.group_mut(Group::BackendW1).copy_from_slice(&b.w1);
        v.group_mut(Group::BackendB1).copy_from_slice(&b.b1);
        v.group_mut(Group::BackendW2).copy_from_slice(&b.w2);
        v.group_mut(Group::BackendB2).copy_from_slice(&b.b2);
        v
    }

    /// Writes `v` back into the structured parameters.
    pub fn load_vector(&mut self, v: &ParamVector) -> Result<()> {
        if v.layout != self.layout() || v.values.len() != v.layout.len() {
            return Err(LeafError::Spec(format!(
                "parameter layout {:?} does not match model layout {:?}",
                v.layout,
                self.layout()
            )));
        }
        let f = &mut self.frontend;
        let b = &mut self.backend;
        f.filterbank.eta.copy_from_slice(v.group(Group::Eta));
        f.filterbank.sigma_bw.copy_from_slice(v.group(Group::SigmaBw));
        f.sigma_lp.copy_from_slice(v.group(Group::SigmaLp));
        f.pcen.log_alpha.copy_from_slice(v.group(Group::PcenAlpha));
        f.pcen.log_delta.copy_from_slice(v.group(Group::PcenDelta));
        f.pcen.r_logit.copy_from_slice(v.group(Group::PcenR));
        f.pcen.s_logit.copy_from_slice(v.group(Group::PcenS));
        b.w1.copy_from_slice(v.group(Group::BackendW1));
        b.b1.copy_from_slice(v.group(Group::BackendB1));
        b.w2.copy_from_slice(v.group(Group::BackendW2));
        b.b2.copy_from_slice(v.group(Group::BackendB2));
        Ok(())
    }

    /// Feasible interval of a bounded group, `None` for unconstrained ones.
    pub fn bounds(&self, g: Group) -> Option<(f64, f64)> {
        match g {
            Group::Eta => Some((0.0, 1.0)),
            Group::SigmaBw => Some((
                SIGMA_BW_MIN,
                sigma_bw_max(self.fs_hz, self.frontend.filterbank.kernel_width).max(SIGMA_BW_MIN),
            )),
            Group::SigmaLp => Some((SIGMA_LP_MIN, sigma_lp_max(self.frontend.lp_width))),
            _ => None,
        }
    }

    /// Clamps the filterbank and lowpass widths onto their feasible sets.
    pub fn project(&mut self) {
        let f = &mut self.frontend;
        f.filterbank = project_params(&f.filterbank, self.fs_hz);
        let w = f.lp_width;
        f.sigma_lp.iter_mut().for_each(|s| *s = project_sigma_lp(*s, w));
    }
}

#[cfg(test)]
mod tests;
