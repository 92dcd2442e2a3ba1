//! Vocoder-agnostic pitch shifting in the mel-spectrogram domain.
//!
//! Mel features are lifted back to the linear-frequency log spectrum through
//! the pseudo-inverse of the mel filterbank and transformed with a DCT into
//! a pseudo-cepstrum, where pitch lives as a movable peak above a quefrency
//! cutoff. A liftering-style modification vector relocates and rescales that
//! source region by a semitone factor, and the inverse operators produce a
//! modified mel-spectrogram any mel-based vocoder can consume. A Griffin-Lim
//! backend plus F0 metrics (GPE/VDE/FFE) make the whole loop audible and
//! measurable without any neural vocoder.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release --example inspect_transforms
//! cargo run --release --example extract_features
//! cargo run --release --example shift_mel
//! cargo run --release --example shift_audio
//! cargo run --release --example analyze_f0
//! cargo run --release --example eval_curve
//! ```
//!
//! The same capabilities are scriptable through the `melshift` binary
//! (`extract`, `shift-mel`, `shift-audio`, `analyze`, `eval-curve`,
//! `transforms --check`).

pub mod audio;
pub mod cli;
pub mod config;
pub mod error;
pub mod features;
pub mod melf;
pub mod metrics;
pub mod pitch;
pub mod shift;
pub mod synth;
pub mod transforms;
pub mod vocoder;

mod stft;

pub use audio::{read_wav, write_wav_f32, write_wav_pcm16, AudioBuffer};
pub use config::{MelConfig, MelScale, WindowKind};
pub use error::{Error, Result};
pub use features::{mel_spectrogram, stft_magnitude, MelSpectrogram};
pub use melf::{read_melf, write_melf};
pub use metrics::{compute_metrics, eval_curve, scale_reference, MetricsReport};
pub use pitch::{discrete_cepstrum, estimate_f0, source_region_argmax, F0Contour, F0Params};
pub use shift::{
    build_modification_vector, mel_to_pseudo_cepstrum, pitch_shift_mel, pseudo_cepstrum_to_mel,
    shift_frame, Interpolation, ModificationVector, PseudoCepstrum, ShiftSpec,
};
pub use transforms::{build_dct, build_mel_filterbank, build_pseudo_inverse, TransformSet};
pub use vocoder::{mel_to_audio, mel_to_audio_with};
