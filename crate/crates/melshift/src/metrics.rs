//! Objective pitch-shifting evaluation: GPE, VDE and FFE against scaled
//! ground-truth targets, plus the batch harness that sweeps a semitone grid
//! through the full mel-shift + Griffin-Lim pipeline.
//!
//! The reference for a shift of s semitones is the contour estimated on the
//! unmodified audio with its voiced values multiplied by 2^(s/12), i.e. the
//! target a perfect shifter would reach. No time alignment is needed since
//! the method preserves the frame grid.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::MelConfig;
use crate::error::{Error, Result};
use crate::features::mel_spectrogram;
use crate::pitch::{estimate_f0, F0Contour, F0Params};
use crate::shift::{pitch_shift_mel, Interpolation, ShiftSpec};
use crate::transforms::TransformSet;
use crate::vocoder::mel_to_audio_with;
use crate::AudioBuffer;

/// Relative F0 error above which a both-voiced frame counts as a gross
/// pitch error. Exactly 20% is not an error; anything above is.
pub const GROSS_ERROR_THRESHOLD: f64 = 0.2;

/// One evaluation of an estimated contour against a reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Gross pitch error: fraction of both-voiced frames with relative F0
    /// error above 20%.
    pub gpe: f64,
    /// Voicing decision error: fraction of frames with mismatched flags.
    pub vde: f64,
    /// F0 frame error: fraction of frames with either kind of error.
    pub ffe: f64,
    pub n_frames: usize,
    pub n_both_voiced: usize,
    /// True when no frame was voiced in both contours, which makes GPE
    /// undefined; it is reported as 0 in that case.
    pub gpe_degenerate: bool,
}

/// Scale the voiced values of a reference contour by 2^(semitones/12).
/// Voicing flags are untouched.
pub fn scale_reference(contour: &F0Contour, semitones: f64) -> F0Contour {
    let factor = (semitones / 12.0).exp2();
    F0Contour {
        f0_hz: contour
            .f0_hz
            .iter()
            .map(|&f| if f > 0.0 { f * factor } else { 0.0 })
            .collect(),
        voiced: contour.voiced.clone(),
        hop_length: contour.hop_length,
        sample_rate: contour.sample_rate,
    }
}

/// Compare an estimated contour against a reference of equal length.
pub fn compute_metrics(estimate: &F0Contour, reference: &F0Contour) -> Result<MetricsReport> {
    if estimate.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "contour lengths differ: estimate {} vs reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    let n = estimate.len();
    let mut voicing_errors = 0usize;
    let mut both_voiced = 0usize;
    let mut gross_errors = 0usize;

    for i in 0..n {
        let ev = estimate.voiced[i];
        let rv = reference.voiced[i];
        if ev != rv {
            voicing_errors += 1;
        }
        if ev && rv {
            both_voiced += 1;
            let relative = (estimate.f0_hz[i] - reference.f0_hz[i]).abs() / reference.f0_hz[i];
            if relative > GROSS_ERROR_THRESHOLD {
                gross_errors += 1;
            }
        }
    }

    let gpe_degenerate = both_voiced == 0;
    let gpe = if gpe_degenerate {
        0.0
    } else {
        gross_errors as f64 / both_voiced as f64
    };
    Ok(MetricsReport {
        gpe,
        vde: voicing_errors as f64 / n as f64,
        ffe: (voicing_errors + gross_errors) as f64 / n as f64,
        n_frames: n,
        n_both_voiced: both_voiced,
        gpe_degenerate,
    })
}

/// Everything the evaluation pipeline needs besides the audio itself.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub mel: MelConfig,
    pub f0_max: f64,
    pub smoothing_quefrency_bins: usize,
    pub interpolation: Interpolation,
    pub gl_iterations: usize,
    pub gl_momentum: f64,
    pub f0: F0Params,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let mel = MelConfig::default();
        let f0 = F0Params {
            hop_length: mel.hop_length,
            ..F0Params::default()
        };
        EvalConfig {
            mel,
            f0_max: 500.0,
            smoothing_quefrency_bins: 0,
            interpolation: Interpolation::Nearest,
            gl_iterations: crate::vocoder::DEFAULT_ITERATIONS,
            gl_momentum: crate::vocoder::DEFAULT_MOMENTUM,
            f0,
        }
    }
}

/// One row of the evaluation curve: mean metric values across utterances
/// with normal-approximation 95% confidence half-widths.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub semitones: f64,
    pub gpe_mean: f64,
    pub gpe_ci: f64,
    pub vde_mean: f64,
    pub vde_ci: f64,
    pub ffe_mean: f64,
    pub ffe_ci: f64,
    pub n_utterances: usize,
}

/// Sweep every semitone in `grid` over every utterance: extract, shift,
/// invert with Griffin-Lim, re-estimate F0, and compare against the scaled
/// ground-truth estimate. Utterances run in parallel on the current rayon
/// pool; aggregation order is fixed by the input order, so results are
/// independent of thread count. Utterances that fail are excluded and
/// reported in the warnings list.
pub fn eval_curve(
    utterances: &[(String, AudioBuffer)],
    grid: &[f64],
    config: &EvalConfig,
) -> Result<(Vec<CurveRow>, Vec<String>)> {
    if utterances.is_empty() || grid.is_empty() {
        return Err(Error::Config(
            "eval_curve needs at least one utterance and one grid value".into(),
        ));
    }
    let transforms = TransformSet::build(&config.mel)?;

    let per_utterance: Vec<std::result::Result<Vec<MetricsReport>, String>> = utterances
        .par_iter()
        .map(|(name, audio)| {
            eval_one(audio, grid, config, &transforms)
                .map_err(|e| format!("{name}: {e}"))
        })
        .collect();

    let mut warnings = Vec::new();
    let mut kept: Vec<&Vec<MetricsReport>> = Vec::new();
    for result in &per_utterance {
        match result {
            Ok(reports) => kept.push(reports),
            Err(msg) => warnings.push(msg.clone()),
        }
    }
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "all {} utterances failed evaluation",
            utterances.len()
        )));
    }

    let rows = grid
        .iter()
        .enumerate()
        .map(|(gi, &semitones)| {
            let gpe: Vec<f64> = kept.iter().map(|r| r[gi].gpe).collect();
            let vde: Vec<f64> = kept.iter().map(|r| r[gi].vde).collect();
            let ffe: Vec<f64> = kept.iter().map(|r| r[gi].ffe).collect();
            let (gpe_mean, gpe_ci) = mean_ci(&gpe);
            let (vde_mean, vde_ci) = mean_ci(&vde);
            let (ffe_mean, ffe_ci) = mean_ci(&ffe);
            CurveRow {
                semitones,
                gpe_mean,
                gpe_ci,
                vde_mean,
                vde_ci,
                ffe_mean,
                ffe_ci,
                n_utterances: kept.len(),
            }
        })
        .collect();
    Ok((rows, warnings))
}

fn eval_one(
    audio: &AudioBuffer,
    grid: &[f64],
    config: &EvalConfig,
    transforms: &TransformSet,
) -> Result<Vec<MetricsReport>> {
    let mel = mel_spectrogram(audio, &config.mel)?;
    let ground_truth = estimate_f0(audio, &config.f0)?;

    grid.iter()
        .map(|&semitones| {
            let spec = ShiftSpec {
                semitones,
                f0_max: config.f0_max,
                smoothing_quefrency_bins: config.smoothing_quefrency_bins,
                interpolation: config.interpolation,
            };
            let shifted = pitch_shift_mel(&mel, &spec, transforms)?;
            let synthesized =
                mel_to_audio_with(&shifted, transforms, config.gl_iterations, config.gl_momentum)?;
            let estimate = estimate_f0(&synthesized, &config.f0)?;
            let reference = truncate_to(&scale_reference(&ground_truth, semitones), estimate.len());
            compute_metrics(&estimate, &reference)
        })
        .collect()
}

/// Griffin-Lim output is up to one hop shorter than the source audio, which
/// can cost a single trailing frame; drop it from the reference to compare
/// the overlapping grid.
fn truncate_to(contour: &F0Contour, n: usize) -> F0Contour {
    F0Contour {
        f0_hz: contour.f0_hz[..n.min(contour.len())].to_vec(),
        voiced: contour.voiced[..n.min(contour.len())].to_vec(),
        hop_length: contour.hop_length,
        sample_rate: contour.sample_rate,
    }
}

/// Mean and 95% normal-approximation confidence half-width. A single sample
/// degenerates to a half-width of 0.
fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Render curve rows as the documented CSV table.
pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("semitones,gpe_mean,gpe_ci,vde_mean,vde_ci,ffe_mean,ffe_ci\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.semitones, r.gpe_mean, r.gpe_ci, r.vde_mean, r.vde_ci, r.ffe_mean, r.ffe_ci
        ));
    }
    out
}
