//! Griffin-Lim mel inversion.
//!
//! Keeps the full pipeline audible and measurable without any neural
//! vocoder: the linear magnitude is recovered as M+ * exp(S) with negatives
//! clipped at zero, and the phase by momentum-accelerated Griffin-Lim.
//! The phase is initialized to zero rather than randomly, so synthesis is
//! reproducible bit-for-bit.

use ndarray::Array2;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::features::MelSpectrogram;
use crate::stft::StftPlan;
use crate::transforms::TransformSet;
use crate::AudioBuffer;

pub const DEFAULT_ITERATIONS: usize = 32;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

/// Invert a mel log-spectrogram to audio. Builds the transform operators
/// internally; callers that already hold a `TransformSet` should prefer
/// [`mel_to_audio_with`].
pub fn mel_to_audio(mel: &MelSpectrogram, iterations: usize, momentum: f64) -> Result<AudioBuffer> {
    let transforms = TransformSet::build(mel.config())?;
    mel_to_audio_with(mel, &transforms, iterations, momentum)
}

/// Invert a mel log-spectrogram to audio using prebuilt operators.
///
/// Output length is (n_frames - 1) * hop_length; the result is
/// peak-normalized to 0.95 if it would otherwise exceed that level.
pub fn mel_to_audio_with(
    mel: &MelSpectrogram,
    transforms: &TransformSet,
    iterations: usize,
    momentum: f64,
) -> Result<AudioBuffer> {
    if iterations < 1 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::Config(format!(
            "momentum must be in [0, 1), got {momentum}"
        )));
    }
    if mel.config() != transforms.config() {
        return Err(Error::ConfigMismatch(
            "mel features and transforms were built with different configs".into(),
        ));
    }
    if mel.n_frames() < 2 {
        return Err(Error::DimensionMismatch(
            "mel inversion needs at least 2 frames".into(),
        ));
    }

    // Linear magnitude estimate: exp(S) through the pseudo-inverse, clipped
    // at zero (the pseudo-inverse can produce small negative magnitudes).
    let linear_mel = mel.data().mapv(f64::exp);
    let magnitude = linear_mel
        .dot(&transforms.mel_pinv().t())
        .mapv(|v| v.max(0.0));

    let samples = griffin_lim(&magnitude, mel.config(), iterations, momentum);
    let fs = mel.config().sample_rate;
    let mut audio = AudioBuffer::new(samples.iter().map(|&v| v as f32).collect(), fs)?;
    audio.limit_peak(0.95);
    Ok(audio)
}

/// Momentum-accelerated Griffin-Lim with zero-phase initialization.
fn griffin_lim(
    magnitude: &Array2<f64>,
    config: &crate::config::MelConfig,
    iterations: usize,
    momentum: f64,
) -> Vec<f64> {
    let plan = StftPlan::new(config);
    let dims = magnitude.dim();
    let as_complex = |phase: &Array2<Complex<f64>>| -> Array2<Complex<f64>> {
        let mut spec = phase.clone();
        spec.zip_mut_with(magnitude, |p, &m| *p *= m);
        spec
    };

    // Zero phase: all angles start at unity.
    let mut angles = Array2::<Complex<f64>>::from_elem(dims, Complex::new(1.0, 0.0));
    let mut previous: Option<Array2<Complex<f64>>> = None;
    let inertia = momentum / (1.0 + momentum);

    for _ in 0..iterations {
        let signal = plan.inverse(&as_complex(&angles));
        let rebuilt = plan.forward(&signal);
        let mut next = rebuilt.clone();
        if let Some(prev) = previous {
            next.zip_mut_with(&prev, |n, &p| *n -= p * inertia);
        }
        angles = next.mapv(|v| {
            let norm = v.norm();
            if norm > 1e-16 {
                v / norm
            } else {
                Complex::new(1.0, 0.0)
            }
        });
        previous = Some(rebuilt);
    }

    plan.inverse(&as_complex(&angles))
}
