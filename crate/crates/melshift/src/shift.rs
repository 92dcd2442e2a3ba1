//! Pitch shifting in the pseudo-cepstrum domain.
//!
//! Per frame, the mel log-spectrum is lifted to the linear-frequency log
//! spectrum through the filterbank pseudo-inverse and taken to a cepstrum-
//! like representation with the DCT. There, coefficient k corresponds to
//! quefrency k / sample_rate, so the periodic source structure sits above a
//! cutoff index while the spectral envelope stays below it. A liftering-style
//! modification vector rescales and relocates the source region to move the
//! pitch by a semitone factor, and the inverse operators return the frame to
//! the mel domain. The whole pipeline is frame-independent and is applied to
//! unvoiced frames unchanged.

use ndarray::{Array2, ArrayView1};

use crate::config::MelConfig;
use crate::error::{Error, Result};
use crate::features::MelSpectrogram;
use crate::transforms::TransformSet;

/// Frame-major pseudo-cepstrum coefficients (n_frames x K).
///
/// Coefficient 0 carries the spectral mean; coefficient k >= 1 corresponds
/// to quefrency k / sample_rate seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoCepstrum {
    data: Array2<f64>,
    sample_rate: u32,
}

impl PseudoCepstrum {
    pub fn new(data: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(
                "pseudo-cepstrum contains non-finite values".into(),
            ));
        }
        Ok(PseudoCepstrum { data, sample_rate })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    /// Number of coefficients per frame (the K spectral bins).
    pub fn n_coeffs(&self) -> usize {
        self.data.ncols()
    }

    /// Quefrency in seconds of coefficient k.
    pub fn quefrency(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate as f64
    }

    /// Frequency in Hz represented by coefficient k (k >= 1).
    pub fn frequency(&self, k: usize) -> f64 {
        self.sample_rate as f64 / k as f64
    }
}

/// Interpolation used when relocating source coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Reference mode; bit-exact and linear in the input frame.
    #[default]
    Nearest,
    Linear,
}

impl Interpolation {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nearest" => Ok(Interpolation::Nearest),
            "linear" => Ok(Interpolation::Linear),
            other => Err(Error::Config(format!(
                "unknown interpolation {other:?} (expected nearest or linear)"
            ))),
        }
    }
}

/// A pitch-shift request.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    /// Shift in semitones; fractional values are fine, sign is direction.
    pub semitones: f64,
    /// Highest F0 the source region is assumed to contain. Everything above
    /// the corresponding quefrency is treated as source and moved.
    pub f0_max: f64,
    /// Width of the raised-cosine transition band at the cutoff, in
    /// quefrency bins. 0 keeps the hard step.
    pub smoothing_quefrency_bins: usize,
    pub interpolation: Interpolation,
}

impl ShiftSpec {
    pub fn new(semitones: f64) -> Self {
        ShiftSpec {
            semitones,
            f0_max: 500.0,
            smoothing_quefrency_bins: 0,
            interpolation: Interpolation::Nearest,
        }
    }

    /// Frequency ratio 2^(x/12) of the requested shift.
    pub fn factor(&self) -> f64 {
        (self.semitones / 12.0).exp2()
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !self.semitones.is_finite() || self.semitones.abs() > 48.0 {
            return Err(Error::Config(format!(
                "semitone shift must be finite and within +/-48, got {}",
                self.semitones
            )));
        }
        if !(self.f0_max > 0.0) || self.f0_max >= sample_rate as f64 / 2.0 {
            return Err(Error::Config(format!(
                "invalid f0max: {} (must be positive and below sample_rate/2 = {})",
                self.f0_max,
                sample_rate as f64 / 2.0
            )));
        }
        Ok(())
    }
}

/// The liftering-style modification vector w[k].
#[derive(Debug, Clone, PartialEq)]
pub struct ModificationVector {
    w: Vec<f64>,
    k_min: usize,
}

impl ModificationVector {
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Index of the first source-region coefficient.
    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Build w[k] for a frame of `k_bins` coefficients at `sample_rate`.
///
/// The cutoff is the smallest k whose quefrency k / sample_rate reaches
/// 1 / f0_max, i.e. k_min = ceil(sample_rate / f0_max). Below it w is 1;
/// at and above it w is 2^(x/12). With smoothing, the first
/// `smoothing_quefrency_bins` source coefficients follow a raised-cosine
/// ramp strictly between 1 and the shift factor.
pub fn build_modification_vector(
    spec: &ShiftSpec,
    k_bins: usize,
    sample_rate: u32,
) -> Result<ModificationVector> {
    spec.validate(sample_rate)?;
    let k_min = (sample_rate as f64 / spec.f0_max).ceil() as usize;
    if k_min >= k_bins {
        return Err(Error::Config(format!(
            "invalid f0max: {} Hz puts the source cutoff at bin {k_min}, beyond the {k_bins} \
             available quefrency bins (f0_max too low for this spectral resolution)",
            spec.f0_max
        )));
    }
    let factor = spec.factor();
    let mut w = vec![1.0f64; k_bins];
    for v in w.iter_mut().skip(k_min) {
        *v = factor;
    }
    let ramp = spec.smoothing_quefrency_bins;
    if ramp > 0 && factor != 1.0 {
        for j in 0..ramp.min(k_bins - k_min) {
            let t = (j + 1) as f64 / (ramp + 1) as f64;
            let blend = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
            w[k_min + j] = 1.0 + (factor - 1.0) * blend;
        }
    }
    Ok(ModificationVector { w, k_min })
}

/// Relocate one frame of coefficients: c'[k] = w[k] * c[round(w[k] * k)]
/// in nearest mode, with reads past the end of the frame taken as zero.
/// Linear mode interpolates the fractional source position instead of
/// rounding it. Coefficients with w[k] = 1 are copied through untouched.
pub fn shift_frame(
    frame: ArrayView1<'_, f64>,
    modification: &ModificationVector,
    interpolation: Interpolation,
) -> Vec<f64> {
    let k_bins = frame.len();
    assert_eq!(
        k_bins,
        modification.len(),
        "modification vector length mismatch"
    );
    let mut out = Vec::with_capacity(k_bins);
    for k in 0..k_bins {
        let wk = modification.w[k];
        if wk == 1.0 {
            out.push(frame[k]);
            continue;
        }
        let source = wk * k as f64;
        let value = match interpolation {
            Interpolation::Nearest => {
                let j = source.round();
                if j < k_bins as f64 {
                    frame[j as usize]
                } else {
                    0.0
                }
            }
            Interpolation::Linear => {
                let j0 = source.floor();
                let frac = source - j0;
                let at = |j: f64| -> f64 {
                    if j < k_bins as f64 {
                        frame[j as usize]
                    } else {
                        0.0
                    }
                };
                (1.0 - frac) * at(j0) + frac * at(j0 + 1.0)
            }
        };
        out.push(wk * value);
    }
    out
}

/// Eq. 8 forward path: per frame, c = D * (M+ * s), applied as the fused
/// operator. The log compression is kept as-is.
pub fn mel_to_pseudo_cepstrum(
    mel: &MelSpectrogram,
    transforms: &TransformSet,
) -> Result<PseudoCepstrum> {
    ensure_same_config(mel.config(), transforms.config())?;
    Ok(PseudoCepstrum {
        data: transforms.apply_forward(mel.data()),
        sample_rate: mel.config().sample_rate,
    })
}

/// Inverse path: per frame, s' = M * (D^-1 * c'), floored at ln(log_floor).
pub fn pseudo_cepstrum_to_mel(
    cepstrum: &PseudoCepstrum,
    transforms: &TransformSet,
) -> Result<MelSpectrogram> {
    let config = transforms.config();
    if cepstrum.n_coeffs() != config.n_freq_bins() {
        return Err(Error::DimensionMismatch(format!(
            "pseudo-cepstrum has {} coefficients, transforms expect {}",
            cepstrum.n_coeffs(),
            config.n_freq_bins()
        )));
    }
    if cepstrum.sample_rate() != config.sample_rate {
        return Err(Error::ConfigMismatch(format!(
            "pseudo-cepstrum is {} Hz, transforms expect {} Hz",
            cepstrum.sample_rate(),
            config.sample_rate
        )));
    }
    let floor = config.floor_log();
    let data = transforms
        .apply_backward(cepstrum.data())
        .mapv(|v| v.max(floor));
    MelSpectrogram::new(data, config.clone())
}

/// The full mel-domain pitch shift: forward transform, per-frame liftering
/// shift, backward transform. Frames never interact.
pub fn pitch_shift_mel(
    mel: &MelSpectrogram,
    spec: &ShiftSpec,
    transforms: &TransformSet,
) -> Result<MelSpectrogram> {
    let cepstrum = mel_to_pseudo_cepstrum(mel, transforms)?;
    let modification = build_modification_vector(
        spec,
        cepstrum.n_coeffs(),
        mel.config().sample_rate,
    )?;
    let mut shifted = Array2::<f64>::zeros(cepstrum.data().dim());
    for (i, frame) in cepstrum.data().rows().into_iter().enumerate() {
        let row = shift_frame(frame, &modification, spec.interpolation);
        for (k, v) in row.into_iter().enumerate() {
            shifted[[i, k]] = v;
        }
    }
    let shifted = PseudoCepstrum {
        data: shifted,
        sample_rate: cepstrum.sample_rate(),
    };
    pseudo_cepstrum_to_mel(&shifted, transforms)
}

fn ensure_same_config(a: &MelConfig, b: &MelConfig) -> Result<()> {
    if a != b {
        return Err(Error::ConfigMismatch(
            "mel features were extracted with a different config than the transforms".into(),
        ));
    }
    Ok(())
}
