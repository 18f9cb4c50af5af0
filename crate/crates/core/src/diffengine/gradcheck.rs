//! Central finite-difference verification of the analytic gradient.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{backward_with, evaluate, BackwardOptions, ClipEval, Objective};
use super::{Group, Model};
use crate::audio_io::AudioClip;
use crate::error::Result;
use crate::exec::ExecMode;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Finite-difference step in stored-parameter units.
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error.
    pub abs_floor: f64,
    /// Coordinates sampled from groups larger than this; smaller groups are
    /// checked in full.
    pub coords_per_group: usize,
    pub seed: u64,
    pub objective: Objective,
    /// Combine central differences at `h` and `h / 2` as
    /// `(4 D(h/2) - D(h)) / 3`, cancelling the `h^2` truncation term.
    pub richardson: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-4,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            coords_per_group: 8,
            seed: 0,
            objective: Objective::CrossEntropy,
            richardson: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: Group,
    pub checked: usize,
    /// Coordinates within one step of a projection bound, or whose
    /// perturbation flips a hidden unit on or off.
    pub skipped: usize,
    pub max_rel_error: f64,
    /// `(index in group, analytic, numeric)` of the largest error.
    pub worst: Option<(usize, f64, f64)>,
}

impl GroupReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed(self.tolerance))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn group(&self, g: Group) -> Option<&GroupReport> {
        self.groups.iter().find(|r| r.group == g)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>7} {:>7} {:>12}  status", "group", "checked", "skipped", "max_rel_err")?;
        for g in &self.groups {
            let status = if g.checked == 0 {
                "SKIPPED"
            } else if g.passed(self.tolerance) {
                "ok"
            } else {
                "FAIL"
            };
            writeln!(
                f,
                "{:<22} {:>7} {:>7} {:>12.3e}  {status}",
                g.group.name(),
                g.checked,
                g.skipped,
                g.max_rel_error
            )?;
        }
        write!(
            f,
            "tolerance {:.1e}: {}",
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn loss_at(model: &Model, clip: &AudioClip, label: usize, objective: Objective) -> Result<ClipEval> {
    let mut out = evaluate(model, &[clip], &[label], objective, ExecMode::Sequential)?;
    Ok(out.remove(0))
}

/// Compares the analytic gradient of the loss on `clip` against central
/// differences on sampled coordinates of every parameter group.
pub fn grad_check(model: &Model, clip: &AudioClip, label: usize, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let bw = BackwardOptions {
        objective: opts.objective,
        mode: ExecMode::Sequential,
        filterbank_grads: true,
    };
    let analytic = backward_with(model, &[clip], &[label], &bw)?;
    let base_active = &analytic.clips[0].active;
    let values = model.to_vector();
    let layout = values.layout;
    let h = opts.step;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = model.clone();
    let mut groups = Vec::new();

    for g in Group::ALL {
        let range = layout.range(g);
        let len = range.len();
        let mut coords: Vec<usize> = if len <= opts.coords_per_group {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, opts.coords_per_group).into_vec()
        };
        coords.sort_unstable();
        let bounds = model.bounds(g);
        let mut report = GroupReport {
            group: g,
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
            worst: None,
        };
        for i in coords {
            let flat = range.start + i;
            let v = values.values[flat];
            if let Some((lo, hi)) = bounds {
                if v - h < lo || v + h > hi {
                    report.skipped += 1;
                    continue;
                }
            }
            let mut central = |step: f64| -> Result<Option<f64>> {
                let mut shifted = values.clone();
                shifted.values[flat] = v + step;
                probe.load_vector(&shifted)?;
                let plus = loss_at(&probe, clip, label, opts.objective)?;
                shifted.values[flat] = v - step;
                probe.load_vector(&shifted)?;
                let minus = loss_at(&probe, clip, label, opts.objective)?;
                if &plus.active != base_active || &minus.active != base_active {
                    return Ok(None);
                }
                Ok(Some((plus.loss - minus.loss) / (2.0 * step)))
            };
            let numeric = match (central(h)?, opts.richardson) {
                (Some(d), false) => d,
                (Some(d), true) => match central(h / 2.0)? {
                    Some(d_half) => (4.0 * d_half - d) / 3.0,
                    None => {
                        report.skipped += 1;
                        continue;
                    }
                },
                (None, _) => {
                    report.skipped += 1;
                    continue;
                }
            };
            let a = analytic.grad.values[flat];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.abs_floor);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((i, a, numeric));
            }
        }
        groups.push(report);
    }
    Ok(GradCheckReport {
        tolerance: opts.tolerance,
        groups,
    })
}

/// Small random problem used by the gradient gate: a 0.1 s noise clip at
/// 16 kHz, 8 channels with 101-tap kernels, stride 40, 41-tap lowpass and
/// an 8-unit, 3-class backend. All bounded parameters are interior.
pub fn random_instance(seed: u64) -> Result<(Model, AudioClip, usize)> {
    use rand::Rng;

    use super::BackendModel;
    use crate::audio_io::{normalize_dbfs, white_noise};
    use crate::filterbank::GaborFilterbank;
    use crate::frontend::{FrontendParams, PcenParams};

    const FS: u32 = 16_000;
    const N: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = white_noise(FS as usize / 10, seed ^ 0x5eed, FS);
    let clip = normalize_dbfs(&noise, -6.0)?;
    let eta = (0..N).map(|_| rng.random_range(0.05..0.95)).collect();
    let sigma_bw = (0..N).map(|_| rng.random_range(2.5..12.0)).collect();
    let fb = GaborFilterbank::new(eta, sigma_bw, 101)?;
    let sigma_lp = (0..N).map(|_| rng.random_range(2.0..8.0)).collect();
    let mut pcen = PcenParams::uniform(N, 0.9, 2.0, 0.5, 0.1)?;
    for n in 0..N {
        pcen.log_alpha[n] = rng.random_range(0.5f64..0.99).ln();
        pcen.log_delta[n] = rng.random_range(0.5f64..3.0).ln();
        pcen.r_logit[n] = rng.random_range(-1.4..1.4);
        pcen.s_logit[n] = rng.random_range(-3.9..0.0);
    }
    let frontend = FrontendParams::new(fb, sigma_lp, pcen, 40, 41)?;
    let backend = BackendModel::random(N, 8, 3, seed.wrapping_add(1))?;
    let label = rng.random_range(0..3);
    Ok((Model::new(frontend, backend, FS)?, clip, label))
}
