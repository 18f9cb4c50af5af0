//! Initial filterbank layouts: linear, mel, bark and seeded random.
//!
//! Mel, bark and linear layouts use `N + 2` equally spaced points on their
//! scale; the outer two are only neighbours. Each filter's bandwidth matches
//! the half-maximum width of the triangle spanning its two neighbours.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LeafError, Result};
use crate::filterbank::{project_params, GaborFilterbank, FWHM_PER_SIGMA};

pub const DEFAULT_F_MIN_HZ: f64 = 60.0;
pub const DEFAULT_F_MAX_HZ: f64 = 7800.0;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Hz,
    Mel,
    Bark,
}

fn hz_to(scale: Scale, f: f64) -> f64 {
    match scale {
        Scale::Hz => f,
        Scale::Mel => 2595.0 * (1.0 + f / 700.0).log10(),
        Scale::Bark => 26.81 * f / (1960.0 + f) - 0.53,
    }
}

fn to_hz(scale: Scale, v: f64) -> f64 {
    match scale {
        Scale::Hz => v,
        Scale::Mel => 700.0 * (10f64.powf(v / 2595.0) - 1.0),
        Scale::Bark => 1960.0 * (v + 0.53) / (26.28 - v),
    }
}

fn check_domain(scale: Scale, v: f64) -> Result<()> {
    let ok = match scale {
        Scale::Hz | Scale::Mel => v >= 0.0 && v.is_finite(),
        Scale::Bark => (-0.53..26.28).contains(&v),
    };
    if ok {
        Ok(())
    } else {
        Err(LeafError::Domain(format!("{v} is outside the {scale:?} scale")))
    }
}

/// Converts between Hz, HTK mel and Traunmüller bark.
pub fn convert_frequency(value: f64, from: Scale, to: Scale) -> Result<f64> {
    check_domain(from, value)?;
    Ok(hz_to(to, to_hz(from, value)))
}

/// Time-domain width (samples) of the Gabor filter whose magnitude response
/// has the given full width at half maximum.
pub fn fwhm_to_sigma_t(fwhm_hz: f64, fs_hz: u32) -> Result<f64> {
    if !(fwhm_hz > 0.0) || !fwhm_hz.is_finite() {
        return Err(LeafError::Domain(format!("FWHM {fwhm_hz} Hz must be positive")));
    }
    if fs_hz == 0 {
        return Err(LeafError::Domain("sample rate must be positive".into()));
    }
    let fwhm_norm = fwhm_hz / (fs_hz as f64 / 2.0);
    Ok(FWHM_PER_SIGMA / (std::f64::consts::PI * fwhm_norm))
}

/// Width at half maximum of the triangle rising from `f_prev`, peaking at
/// `f_center` and falling to `f_next`.
pub fn triangular_fwhm(f_prev: f64, f_center: f64, f_next: f64) -> Result<f64> {
    if !(f_prev < f_center && f_center < f_next) {
        return Err(LeafError::Domain(format!(
            "triangle corners must increase: {f_prev}, {f_center}, {f_next}"
        )));
    }
    Ok((f_next - f_prev) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Linear,
    Mel,
    Bark,
    Random,
}

impl InitKind {
    pub const ALL: [InitKind; 4] = [InitKind::Linear, InitKind::Mel, InitKind::Bark, InitKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            InitKind::Linear => "linear",
            InitKind::Mel => "mel",
            InitKind::Bark => "bark",
            InitKind::Random => "random",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitKind {
    type Err = LeafError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(InitKind::Linear),
            "mel" => Ok(InitKind::Mel),
            "bark" => Ok(InitKind::Bark),
            "random" => Ok(InitKind::Random),
            other => Err(LeafError::Config(format!("unknown init strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitStrategy {
    pub kind: InitKind,
    pub seed: u64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_filters: usize,
}

impl InitStrategy {
    pub fn new(kind: InitKind) -> Self {
        Self {
            kind,
            seed: DEFAULT_SEED,
            f_min_hz: DEFAULT_F_MIN_HZ,
            f_max_hz: DEFAULT_F_MAX_HZ,
            n_filters: crate::filterbank::DEFAULT_N_FILTERS,
        }
    }

    pub fn validate(&self, fs_hz: u32) -> Result<()> {
        if self.n_filters < 2 {
            return Err(LeafError::Spec(format!(
                "need at least 2 filters, got {}",
                self.n_filters
            )));
        }
        let nyquist = fs_hz as f64 / 2.0;
        if !(0.0 <= self.f_min_hz && self.f_min_hz < self.f_max_hz && self.f_max_hz <= nyquist) {
            return Err(LeafError::Spec(format!(
                "frequency range [{}, {}] Hz must satisfy 0 <= f_min < f_max <= {nyquist}",
                self.f_min_hz, self.f_max_hz
            )));
        }
        Ok(())
    }

    /// One-line provenance record, also accepted by [`InitStrategy::from_comment`].
    pub fn comment(&self) -> String {
        format!(
            "strategy kind={} seed={} f_min_hz={} f_max_hz={} n_filters={}",
            self.kind, self.seed, self.f_min_hz, self.f_max_hz, self.n_filters
        )
    }

    pub fn from_comment(line: &str) -> Result<Self> {
        let rest = line
            .trim()
            .strip_prefix("strategy")
            .ok_or_else(|| LeafError::Format(format!("not a strategy record: `{line}`")))?;
        let mut s = InitStrategy::new(InitKind::Linear);
        let bad = |k: &str| LeafError::Format(format!("bad strategy field `{k}`"));
        for kv in rest.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(kv))?;
            match k {
                "kind" => s.kind = v.parse()?,
                "seed" => s.seed = v.parse().map_err(|_| bad(kv))?,
                "f_min_hz" => s.f_min_hz = v.parse().map_err(|_| bad(kv))?,
                "f_max_hz" => s.f_max_hz = v.parse().map_err(|_| bad(kv))?,
                "n_filters" => s.n_filters = v.parse().map_err(|_| bad(kv))?,
                _ => return Err(bad(kv)),
            }
        }
        Ok(s)
    }
}

/// Centre frequencies (Hz) and intended FWHMs (Hz) before projection.
pub fn layout_hz(strategy: &InitStrategy) -> (Vec<f64>, Vec<f64>) {
    let n = strategy.n_filters;
    match strategy.kind {
        InitKind::Linear | InitKind::Mel | InitKind::Bark => {
            let scale = match strategy.kind {
                InitKind::Linear => Scale::Hz,
                InitKind::Mel => Scale::Mel,
                _ => Scale::Bark,
            };
            let lo = hz_to(scale, strategy.f_min_hz);
            let hi = hz_to(scale, strategy.f_max_hz);
            let step = (hi - lo) / (n + 1) as f64;
            let points: Vec<f64> = (0..n + 2)
                .map(|i| to_hz(scale, lo + step * i as f64))
                .collect();
            let centres = points[1..=n].to_vec();
            let fwhm = (1..=n)
                .map(|i| (points[i + 1] - points[i - 1]) / 2.0)
                .collect();
            (centres, fwhm)
        }
        InitKind::Random => {
            let centres = random_centres(strategy);
            let fwhm = (0..n)
                .map(|i| {
                    let left = if i > 0 { centres[i] - centres[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { centres[i + 1] - centres[i] } else { 0.0 };
                    2.0 * left.max(right)
                })
                .collect();
            (centres, fwhm)
        }
    }
}

fn random_centres(strategy: &InitStrategy) -> Vec<f64> {
    let mut seed = strategy.seed;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c: Vec<f64> = (0..strategy.n_filters)
            .map(|_| rng.random_range(strategy.f_min_hz..=strategy.f_max_hz))
            .collect();
        c.sort_by(f64::total_cmp);
        if c.windows(2).all(|w| w[0] < w[1]) {
            return c;
        }
        seed = seed.wrapping_add(1);
    }
}

/// Builds the initial filterbank for `strategy`, projected onto the feasible
/// parameter set.
pub fn build_filterbank(
    strategy: &InitStrategy,
    fs_hz: u32,
    kernel_width: usize,
) -> Result<GaborFilterbank> {
    strategy.validate(fs_hz)?;
    let (centres, fwhm) = layout_hz(strategy);
    let nyquist = fs_hz as f64 / 2.0;
    let eta = centres.iter().map(|f| f / nyquist).collect();
    let sigma = fwhm
        .iter()
        .map(|&w| fwhm_to_sigma_t(w, fs_hz))
        .collect::<Result<Vec<_>>>()?;
    let fb = GaborFilterbank::new(eta, sigma, kernel_width)?;
    Ok(project_params(&fb, fs_hz))
}
