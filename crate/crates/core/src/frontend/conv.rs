//! FFT-backed "same" convolution of a real signal with short complex
//! kernels, plus the matching cross-correlation used for kernel gradients.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Smallest 7-smooth integer no smaller than `n`.
pub(crate) fn smooth_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Plan for convolving signals of a fixed length with kernels of a fixed
/// odd width. Circular convolution of length `fft_len >= len + half` equals
/// the zero-padded linear one on the output range `0..len`.
#[derive(Clone)]
pub struct ConvPlan {
    pub len: usize,
    pub half: usize,
    pub fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ConvPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvPlan")
            .field("len", &self.len)
            .field("half", &self.half)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl ConvPlan {
    pub fn new(len: usize, kernel_width: usize) -> Self {
        let half = kernel_width / 2;
        let fft_len = smooth_len((len + half).max(2 * half + 1));
        let mut planner = FftPlanner::new();
        Self {
            len,
            half,
            fft_len,
            fwd: planner.plan_fft_forward(fft_len),
            inv: planner.plan_fft_inverse(fft_len),
        }
    }

    fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
    }

    pub fn signal_spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.len);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward_in_place(&mut buf);
        buf
    }

    /// Spectrum of a kernel sampled at `tau = -half..=half`, placed
    /// circularly so that `tau = 0` is index 0.
    pub fn kernel_spectrum(&self, kernel: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(kernel.len(), 2 * self.half + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (i, &k) in kernel.iter().enumerate() {
            let tau = i as isize - self.half as isize;
            buf[tau.rem_euclid(self.fft_len as isize) as usize] = k;
        }
        self.forward_in_place(&mut buf);
        buf
    }

    /// `y(t) = sum_tau x(t - tau) k(tau)` for `t in 0..len`.
    pub fn convolve(&self, x_spec: &[Complex64], k_spec: &[Complex64]) -> Vec<Complex64> {
        let scale = 1.0 / self.fft_len as f64;
        let mut buf: Vec<Complex64> = x_spec
            .iter()
            .zip(k_spec)
            .map(|(a, b)| a * b * scale)
            .collect();
        self.inverse_in_place(&mut buf);
        buf.truncate(self.len);
        buf
    }

    /// `G(tau) = sum_t g(t) x(t - tau)` for `tau = -half..=half`, returned in
    /// kernel order. This is the gradient of a loss with respect to the
    /// kernel taps when `g` is the gradient with respect to the output.
    pub fn correlate(&self, g: &[Complex64], x_spec: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(g.len(), self.len);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        buf[..self.len].copy_from_slice(g);
        self.forward_in_place(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        for (b, x) in buf.iter_mut().zip(x_spec) {
            *b = *b * x.conj() * scale;
        }
        self.inverse_in_place(&mut buf);
        (0..=2 * self.half)
            .map(|i| {
                let tau = i as isize - self.half as isize;
                buf[tau.rem_euclid(self.fft_len as isize) as usize]
            })
            .collect()
    }
}
