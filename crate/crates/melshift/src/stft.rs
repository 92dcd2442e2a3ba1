//! Internal STFT machinery shared by feature extraction and Griffin-Lim.
//!
//! Framing convention: the signal is padded by n_fft/2 on each side
//! (multi-bounce reflection), frames start at t * hop_length, and
//! n_frames = floor(len / hop_length) + 1. The inverse transform trims the
//! padding back off, so a round trip returns (n_frames - 1) * hop_length
//! samples.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::config::MelConfig;

/// Frame count for `len` samples under the centered framing rule.
pub(crate) fn frame_count(len: usize, hop_length: usize) -> usize {
    len / hop_length + 1
}

/// Periodic Hann window of length `n`.
pub(crate) fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Reflected sample index for position `pos` in a signal of length `len`,
/// bouncing off both ends as often as needed (edge samples not repeated).
fn reflect_index(pos: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = pos.rem_euclid(period);
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

pub(crate) struct StftPlan {
    n_fft: usize,
    hop_length: usize,
    /// Analysis window, centered inside an n_fft-long buffer.
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub(crate) fn new(config: &MelConfig) -> Self {
        let mut window = vec![0.0f64; config.n_fft];
        let base = hann_periodic(config.win_length);
        let offset = (config.n_fft - config.win_length) / 2;
        window[offset..offset + config.win_length].copy_from_slice(&base);

        let mut planner = FftPlanner::new();
        StftPlan {
            n_fft: config.n_fft,
            hop_length: config.hop_length,
            window,
            forward: planner.plan_fft_forward(config.n_fft),
            inverse: planner.plan_fft_inverse(config.n_fft),
        }
    }

    pub(crate) fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Complex one-sided STFT, frame-major (n_frames x K).
    pub(crate) fn forward(&self, samples: &[f64]) -> Array2<Complex<f64>> {
        let n_frames = frame_count(samples.len(), self.hop_length);
        let k_bins = self.n_bins();
        let pad = self.n_fft / 2;
        let mut spec = Array2::<Complex<f64>>::zeros((n_frames, k_bins));
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];

        for t in 0..n_frames {
            let start = t as isize * self.hop_length as isize - pad as isize;
            for (i, slot) in buf.iter_mut().enumerate() {
                let src = reflect_index(start + i as isize, samples.len());
                *slot = Complex::new(samples[src] * self.window[i], 0.0);
            }
            self.forward.process(&mut buf);
            for k in 0..k_bins {
                spec[[t, k]] = buf[k];
            }
        }
        spec
    }

    /// Magnitude STFT, frame-major (n_frames x K).
    pub(crate) fn magnitude(&self, samples: &[f64]) -> Array2<f64> {
        self.forward(samples).mapv(|c| c.norm())
    }

    /// Inverse STFT by windowed overlap-add with squared-window
    /// normalization; returns (n_frames - 1) * hop_length samples.
    pub(crate) fn inverse(&self, spec: &Array2<Complex<f64>>) -> Vec<f64> {
        let (n_frames, k_bins) = spec.dim();
        assert_eq!(k_bins, self.n_bins(), "spectrum width mismatch");
        let pad = self.n_fft / 2;
        let full_len = (n_frames - 1) * self.hop_length + self.n_fft;
        let mut out = vec![0.0f64; full_len];
        let mut norm = vec![0.0f64; full_len];
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];

        for t in 0..n_frames {
            // Rebuild the two-sided spectrum by conjugate symmetry.
            for k in 0..k_bins {
                buf[k] = spec[[t, k]];
            }
            for k in 1..k_bins - 1 {
                buf[self.n_fft - k] = spec[[t, k]].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * self.hop_length;
            for i in 0..self.n_fft {
                let sample = buf[i].re / self.n_fft as f64;
                out[start + i] += sample * self.window[i];
                norm[start + i] += self.window[i] * self.window[i];
            }
        }

        let trimmed_len = full_len - 2 * pad;
        let mut result = Vec::with_capacity(trimmed_len);
        for i in 0..trimmed_len {
            let j = i + pad;
            let d = norm[j];
            result.push(if d > 1e-10 { out[j] / d } else { 0.0 });
        }
        result
    }
}
