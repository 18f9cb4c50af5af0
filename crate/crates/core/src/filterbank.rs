//! Complex Gabor band-pass filters parameterised by normalized centre
//! frequency and time-domain Gaussian width.
//!
//! Units: `eta` is normalized so that 1.0 is Nyquist (the carrier advances
//! `pi * eta` radians per sample); `sigma_bw` is measured in samples.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{LeafError, Result};

/// Lower clamp for `sigma_bw`, in samples.
pub const SIGMA_BW_MIN: f64 = 2.0;

pub const DEFAULT_KERNEL_WIDTH: usize = 401;
pub const DEFAULT_N_FILTERS: usize = 40;

/// `2 * sqrt(2 ln 2)`: ratio of a Gaussian's FWHM to its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, PartialEq)]
pub struct GaborFilterbank {
    pub kernel_width: usize,
    pub eta: Vec<f64>,
    pub sigma_bw: Vec<f64>,
}

impl GaborFilterbank {
    pub fn new(eta: Vec<f64>, sigma_bw: Vec<f64>, kernel_width: usize) -> Result<Self> {
        if eta.is_empty() {
            return Err(LeafError::Spec("filterbank needs at least one filter".into()));
        }
        if eta.len() != sigma_bw.len() {
            return Err(LeafError::Spec(format!(
                "{} centre frequencies but {} bandwidths",
                eta.len(),
                sigma_bw.len()
            )));
        }
        check_kernel_width(kernel_width)?;
        Ok(Self {
            kernel_width,
            eta,
            sigma_bw,
        })
    }

    pub fn n_filters(&self) -> usize {
        self.eta.len()
    }

    pub fn kernel(&self, n: usize) -> Result<Vec<Complex64>> {
        gabor_kernel(self.eta[n], self.sigma_bw[n], self.kernel_width)
    }

    pub fn centre_hz(&self, n: usize, fs_hz: u32) -> f64 {
        self.eta[n] * fs_hz as f64 / 2.0
    }

    pub fn fwhm_hz(&self, n: usize, fs_hz: u32) -> f64 {
        fwhm_norm_from_sigma(self.sigma_bw[n]) * fs_hz as f64 / 2.0
    }

    /// Serializes to CSV with columns
    /// `filter_index,eta,sigma_bw,centre_hz,fwhm_hz`.
    ///
    /// `comments` are emitted as `# ` lines ahead of the sampling metadata.
    pub fn to_csv(&self, fs_hz: u32, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "# fs_hz={fs_hz} kernel_width={}", self.kernel_width);
        out.push_str("filter_index,eta,sigma_bw,centre_hz,fwhm_hz\n");
        for n in 0..self.n_filters() {
            let _ = writeln!(
                out,
                "{n},{},{},{},{}",
                self.eta[n],
                self.sigma_bw[n],
                self.centre_hz(n, fs_hz),
                self.fwhm_hz(n, fs_hz)
            );
        }
        out
    }

    /// Parses the CSV written by [`GaborFilterbank::to_csv`].
    pub fn from_csv(text: &str) -> Result<ParsedFilterbank> {
        let mut comments = Vec::new();
        let mut fs_hz = None;
        let mut kernel_width = None;
        let mut eta = Vec::new();
        let mut sigma = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                if c.starts_with("fs_hz=") {
                    for kv in c.split_whitespace() {
                        match kv.split_once('=') {
                            Some(("fs_hz", v)) => fs_hz = Some(parse_num::<u32>(v, lineno)?),
                            Some(("kernel_width", v)) => {
                                kernel_width = Some(parse_num::<usize>(v, lineno)?)
                            }
                            _ => {}
                        }
                    }
                } else {
                    comments.push(c.to_string());
                }
                continue;
            }
            if !saw_header {
                if line != "filter_index,eta,sigma_bw,centre_hz,fwhm_hz" {
                    return Err(LeafError::Format(format!(
                        "line {}: unexpected filterbank header `{line}`",
                        lineno + 1
                    )));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(LeafError::Format(format!(
                    "line {}: expected 5 fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let idx: usize = parse_num(fields[0], lineno)?;
            if idx != eta.len() {
                return Err(LeafError::Format(format!(
                    "line {}: filter index {idx} out of sequence",
                    lineno + 1
                )));
            }
            eta.push(parse_num(fields[1], lineno)?);
            sigma.push(parse_num(fields[2], lineno)?);
        }
        let fs_hz = fs_hz.ok_or_else(|| LeafError::Format("missing fs_hz metadata".into()))?;
        let kernel_width = kernel_width
            .ok_or_else(|| LeafError::Format("missing kernel_width metadata".into()))?;
        Ok(ParsedFilterbank {
            filterbank: GaborFilterbank::new(eta, sigma, kernel_width)?,
            fs_hz,
            comments,
        })
    }
}

/// A filterbank read back from CSV together with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFilterbank {
    pub filterbank: GaborFilterbank,
    pub fs_hz: u32,
    pub comments: Vec<String>,
}

fn parse_num<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| LeafError::Format(format!("line {}: bad number `{s}`", lineno + 1)))
}

pub(crate) fn check_kernel_width(w: usize) -> Result<()> {
    if w == 0 || w % 2 == 0 {
        return Err(LeafError::Spec(format!(
            "kernel width {w} must be a positive odd number"
        )));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(LeafError::Param(format!("sigma {sigma} must be positive")));
    }
    Ok(())
}

/// Upper clamp for `sigma_bw`: `F_s / (W + 1)`, taken in samples.
pub fn sigma_bw_max(fs_hz: u32, kernel_width: usize) -> f64 {
    fs_hz as f64 / (kernel_width as f64 + 1.0)
}

/// Frequency-domain standard deviation (eta units) of a time Gaussian with
/// `sigma_bw` samples.
pub fn sigma_f(sigma_bw: f64) -> f64 {
    1.0 / (PI * sigma_bw)
}

/// Full width at half maximum of the magnitude response, in eta units.
pub fn fwhm_norm_from_sigma(sigma_bw: f64) -> f64 {
    FWHM_PER_SIGMA * sigma_f(sigma_bw)
}

/// Samples the Gabor kernel at `t = -(W-1)/2 ..= (W-1)/2`.
pub fn gabor_kernel(eta: f64, sigma_bw: f64, kernel_width: usize) -> Result<Vec<Complex64>> {
    check_sigma(sigma_bw)?;
    check_kernel_width(kernel_width)?;
    let half = (kernel_width / 2) as isize;
    let amp = 1.0 / ((2.0 * PI).sqrt() * sigma_bw);
    let inv2s2 = 1.0 / (2.0 * sigma_bw * sigma_bw);
    Ok((-half..=half)
        .map(|t| {
            let t = t as f64;
            let env = amp * (-t * t * inv2s2).exp();
            Complex64::from_polar(env, PI * eta * t)
        })
        .collect())
}

/// Closed-form magnitude envelope `exp(-(f - eta)^2 / (2 sigma_f^2))`, peak 1.
pub fn analytic_freq_response(eta: f64, sigma_bw: f64, grid: &[f64]) -> Result<Vec<f64>> {
    check_sigma(sigma_bw)?;
    let sf = sigma_f(sigma_bw);
    let inv = 1.0 / (2.0 * sf * sf);
    Ok(grid.iter().map(|f| (-(f - eta).powi(2) * inv).exp()).collect())
}

/// Magnitude of the zero-padded DFT over the non-negative half
/// (`n_fft / 2 + 1` bins; bin `k` sits at `2k / n_fft` in eta units).
pub fn numeric_freq_response(kernel: &[Complex64], n_fft: usize) -> Result<Vec<f64>> {
    let spectrum = padded_dft(kernel, n_fft)?;
    Ok(spectrum[..=n_fft / 2].iter().map(|c| c.norm()).collect())
}

/// Full zero-padded DFT of a kernel (all `n_fft` bins).
pub fn padded_dft(kernel: &[Complex64], n_fft: usize) -> Result<Vec<Complex64>> {
    if !n_fft.is_power_of_two() || n_fft < kernel.len() {
        return Err(LeafError::Param(format!(
            "n_fft {n_fft} must be a power of two no smaller than the kernel ({})",
            kernel.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    buf[..kernel.len()].copy_from_slice(kernel);
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    Ok(buf)
}

/// Clamps `eta` into [0, 1] and `sigma_bw` into
/// `[SIGMA_BW_MIN, F_s / (W + 1)]`.
pub fn project_params(fb: &GaborFilterbank, fs_hz: u32) -> GaborFilterbank {
    let hi = sigma_bw_max(fs_hz, fb.kernel_width).max(SIGMA_BW_MIN);
    GaborFilterbank {
        kernel_width: fb.kernel_width,
        eta: fb.eta.iter().map(|e| clamp_nan(*e, 0.0, 1.0)).collect(),
        sigma_bw: fb
            .sigma_bw
            .iter()
            .map(|s| clamp_nan(*s, SIGMA_BW_MIN, hi))
            .collect(),
    }
}

fn clamp_nan(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

/// Half-maximum offset from the centre, in eta units.
pub fn half_max_offset(sigma_bw: f64) -> f64 {
    (2.0 * LN_2).sqrt() * sigma_f(sigma_bw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_centre_modulus_and_symmetry() {
        let k = gabor_kernel(0.3, 7.5, 61).unwrap();
        assert_eq!(k.len(), 61);
        let expect = 1.0 / ((2.0 * PI).sqrt() * 7.5);
        assert!((k[30].norm() - expect).abs() < 1e-15);
        for t in 0..30 {
            assert!((k[30 - t].norm() - k[30 + t].norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_frequency_kernel_is_real() {
        let k = gabor_kernel(0.0, 4.0, 33).unwrap();
        assert!(k.iter().all(|c| c.im == 0.0));
    }

    #[test]
    fn kernel_rejects_bad_sigma() {
        assert!(matches!(gabor_kernel(0.5, 0.0, 33), Err(LeafError::Param(_))));
        assert!(matches!(gabor_kernel(0.5, -1.0, 33), Err(LeafError::Param(_))));
        assert!(gabor_kernel(0.5, 2.0, 32).is_err());
    }

    #[test]
    fn analytic_response_peak_and_half_max() {
        let (eta, sigma) = (0.4, 12.0);
        let d = half_max_offset(sigma);
        let r = analytic_freq_response(eta, sigma, &[eta, eta - d, eta + d, 0.9]).unwrap();
        assert_eq!(r[0], 1.0);
        assert!((r[1] - 0.5).abs() < 1e-12);
        assert!((r[2] - 0.5).abs() < 1e-12);
        let narrow = analytic_freq_response(eta, 1e4, &[0.9]).unwrap();
        assert!(narrow[0] < 1e-300);
    }

    #[test]
    fn impulse_has_flat_response() {
        let mut k = vec![Complex64::new(0.0, 0.0); 9];
        k[4] = Complex64::new(1.0, 0.0);
        let r = numeric_freq_response(&k, 64).unwrap();
        assert_eq!(r.len(), 33);
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn numeric_peak_bin_location() {
        let k = gabor_kernel(0.5, 20.0, 401).unwrap();
        let n_fft = 1024;
        let r = numeric_freq_response(&k, n_fft).unwrap();
        let peak = r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let expected = 0.5 * n_fft as f64 / 2.0;
        assert!((peak as f64 - expected).abs() <= 1.0);
    }

    #[test]
    fn numeric_matches_analytic_at_peak() {
        for &(eta, sigma) in &[(0.25, 10.0), (0.5, 20.0), (0.7, 40.0)] {
            let w = (8.0 * sigma) as usize | 1;
            let k = gabor_kernel(eta, sigma, w + 2).unwrap();
            let n_fft = 4096;
            let r = numeric_freq_response(&k, n_fft).unwrap();
            let bin = (eta * n_fft as f64 / 2.0).round() as usize;
            let f = 2.0 * bin as f64 / n_fft as f64;
            let a = analytic_freq_response(eta, sigma, &[f]).unwrap()[0];
            assert!(((r[bin] - a) / a).abs() < 0.01, "eta {eta} sigma {sigma}");
        }
    }

    #[test]
    fn numeric_rejects_bad_sizes() {
        let k = gabor_kernel(0.5, 4.0, 33).unwrap();
        assert!(numeric_freq_response(&k, 48).is_err());
        assert!(numeric_freq_response(&k, 16).is_err());
    }

    #[test]
    fn projection_clamps() {
        let fb = GaborFilterbank::new(vec![1.2, -0.1, 0.5], vec![0.0, 100.0, 5.0], 401).unwrap();
        let p = project_params(&fb, 16_000);
        assert_eq!(p.eta, vec![1.0, 0.0, 0.5]);
        assert_eq!(p.sigma_bw[0], SIGMA_BW_MIN);
        assert_eq!(p.sigma_bw[1], 16_000.0 / 402.0);
        assert_eq!(p.sigma_bw[2], 5.0);
    }

    #[test]
    fn csv_roundtrip_is_bitwise() {
        let fb = GaborFilterbank::new(
            vec![0.1, 1.0 / 3.0, 0.987_654_321],
            vec![2.0, 17.123_456_789, 39.8],
            401,
        )
        .unwrap();
        let text = fb.to_csv(16_000, &["strategy kind=linear".to_string()]);
        let parsed = GaborFilterbank::from_csv(&text).unwrap();
        assert_eq!(parsed.filterbank, fb);
        assert_eq!(parsed.fs_hz, 16_000);
        assert_eq!(parsed.comments, vec!["strategy kind=linear".to_string()]);
    }

    #[test]
    fn csv_centre_column() {
        let fb = GaborFilterbank::new(vec![0.5], vec![10.0], 401).unwrap();
        let text = fb.to_csv(16_000, &[]);
        let row = text.lines().last().unwrap();
        assert_eq!(row.split(',').nth(3).unwrap(), "4000");
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_identity_on_feasible(
            eta in proptest::collection::vec(-0.5f64..1.5, 1..10),
            sig in proptest::collection::vec(-5.0f64..80.0, 10),
        ) {
            let n = eta.len();
            let fb = GaborFilterbank::new(eta, sig[..n].to_vec(), 401).unwrap();
            let once = project_params(&fb, 16_000);
            let twice = project_params(&once, 16_000);
            prop_assert_eq!(&once, &twice);
            for i in 0..n {
                prop_assert!((0.0..=1.0).contains(&once.eta[i]));
                if (0.0..=1.0).contains(&fb.eta[i]) {
                    prop_assert_eq!(once.eta[i], fb.eta[i]);
                }
            }
        }
    }
}
