//! Mel log-spectrogram extraction.
//!
//! Frames are extracted with centered reflect padding, windowed with a
//! periodic Hann window, and transformed with an n_fft real FFT. The mel
//! features are natural-log magnitudes floored at the configured log_floor:
//! S = ln(max(M * |X|, log_floor)).

use ndarray::Array2;

use crate::config::MelConfig;
use crate::error::{Error, Result};
use crate::stft::StftPlan;
use crate::transforms::build_mel_filterbank;
use crate::AudioBuffer;

/// A mel log-spectrogram together with the config that produced it.
///
/// Data is frame-major (n_frames x n_mels) in the natural-log magnitude
/// domain, kept in double precision in memory; file I/O is single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Array2<f64>,
    config: MelConfig,
}

impl MelSpectrogram {
    pub fn new(data: Array2<f64>, config: MelConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.n_mels {
            return Err(Error::DimensionMismatch(format!(
                "mel data has {} columns but config declares n_mels = {}",
                data.ncols(),
                config.n_mels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Melf("mel data contains non-finite values".into()));
        }
        Ok(MelSpectrogram { data, config })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_mels(&self) -> usize {
        self.data.ncols()
    }
}

/// Magnitude spectrogram |X|, frame-major (n_frames x K).
///
/// n_frames = floor(len / hop_length) + 1 with centered framing. Audio
/// shorter than one analysis window is rejected, as is a sample-rate
/// mismatch between the buffer and the config.
pub fn stft_magnitude(audio: &AudioBuffer, config: &MelConfig) -> Result<Array2<f64>> {
    config.validate()?;
    if audio.sample_rate() != config.sample_rate {
        return Err(Error::ConfigMismatch(format!(
            "audio is {} Hz but config expects {} Hz",
            audio.sample_rate(),
            config.sample_rate
        )));
    }
    if audio.len() < config.win_length {
        return Err(Error::ConfigMismatch(format!(
            "audio has {} samples, shorter than one {}-sample analysis window",
            audio.len(),
            config.win_length
        )));
    }
    let samples: Vec<f64> = audio.samples().iter().map(|&s| s as f64).collect();
    Ok(StftPlan::new(config).magnitude(&samples))
}

/// Mel log-spectrogram: S = ln(max(M * |X|, log_floor)) per frame.
pub fn mel_spectrogram(audio: &AudioBuffer, config: &MelConfig) -> Result<MelSpectrogram> {
    let magnitude = stft_magnitude(audio, config)?;
    let filterbank = build_mel_filterbank(config)?;
    Ok(mel_from_magnitude(&magnitude, &filterbank, config))
}

/// Project a magnitude spectrogram through a prebuilt filterbank. Split out
/// so callers that already hold a `TransformSet` avoid rebuilding M.
pub fn mel_from_magnitude(
    magnitude: &Array2<f64>,
    filterbank: &Array2<f64>,
    config: &MelConfig,
) -> MelSpectrogram {
    let floor = config.log_floor as f64;
    let mel_linear = magnitude.dot(&filterbank.t());
    let data = mel_linear.mapv(|v| v.max(floor).ln());
    MelSpectrogram {
        data,
        config: config.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn config() -> MelConfig {
        MelConfig::default()
    }

    #[test]
    fn framing_matches_rule() {
        let audio = synth::silence(1.0, 24_000);
        let mel = mel_spectrogram(&audio, &config()).unwrap();
        // floor(24000 / 256) + 1
        assert_eq!(mel.n_frames(), 94);
        assert_eq!(mel.n_mels(), 80);
    }

    #[test]
    fn zero_audio_gives_zero_magnitude_and_floored_mel() {
        let audio = synth::silence(1.0, 24_000);
        let mag = stft_magnitude(&audio, &config()).unwrap();
        assert!(mag.iter().all(|&v| v == 0.0));
        let mel = mel_spectrogram(&audio, &config()).unwrap();
        let floor = config().floor_log();
        assert!(mel.data().iter().all(|&v| (v - floor).abs() < 1e-12));
    }

    #[test]
    fn sample_rate_mismatch_is_rejected() {
        let audio = synth::silence(1.0, 16_000);
        match mel_spectrogram(&audio, &config()) {
            Err(Error::ConfigMismatch(_)) => {}
            other => panic!("expected config mismatch, got {other:?}"),
        }
    }

    #[test]
    fn short_audio_is_rejected() {
        let audio = crate::AudioBuffer::new(vec![0.1; 512], 24_000).unwrap();
        assert!(matches!(
            stft_magnitude(&audio, &config()),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn bin_centered_sine_peaks_at_its_bin() {
        // Bin 100 of a 1024-point FFT at 24 kHz is exactly 2343.75 Hz.
        let cfg = config();
        let freq = 100.0 * cfg.sample_rate as f64 / cfg.n_fft as f64;
        let audio = synth::sine(freq, 1.0, 1.0, cfg.sample_rate);
        let mag = stft_magnitude(&audio, &cfg).unwrap();
        // Use an interior frame, away from padding effects.
        let frame = mag.row(mag.nrows() / 2);
        let peak = frame[100];
        // Hann closed form: the two mainlobe neighbors sit at exactly half
        // the peak; every bin outside the mainlobe is at a spectral null.
        assert!((frame[99] / peak - 0.5).abs() < 1e-3);
        assert!((frame[101] / peak - 0.5).abs() < 1e-3);
        for (k, &v) in frame.iter().enumerate() {
            if (k as i64 - 100).unsigned_abs() >= 2 {
                assert!(
                    v < peak * 0.1,
                    "bin {k} is {v:.3e}, expected >= 20 dB below peak {peak:.3e}"
                );
            }
        }
    }

    #[test]
    fn mel_entries_never_drop_below_floor() {
        let audio = synth::white_noise(11, 0.3, 0.5, 24_000);
        let mel = mel_spectrogram(&audio, &config()).unwrap();
        let floor = config().floor_log();
        assert!(mel.data().iter().all(|v| v.is_finite() && *v >= floor - 1e-12));
    }

    #[test]
    fn pulse_train_mel_shows_harmonic_ripple() {
        // Reconstruct the linear-bin log spectrum through the pseudo-inverse
        // and peak-pick: local maxima should sit near multiples of 200 Hz.
        let cfg = config();
        let audio = synth::pulse_train(200.0, 0.8, 1.0, cfg.sample_rate);
        let mel = mel_spectrogram(&audio, &cfg).unwrap();
        let ts = crate::transforms::TransformSet::build(&cfg).unwrap();
        let lin = mel.data().dot(&ts.mel_pinv().t());
        let frame = lin.row(lin.nrows() / 2);
        let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;

        for harmonic in 1..=8 {
            let target_bin = (harmonic as f64 * 200.0 / bin_hz).round() as usize;
            let found = (target_bin.saturating_sub(3)..=target_bin + 3).any(|k| {
                k >= 1 && k + 1 < frame.len() && frame[k] > frame[k - 1] && frame[k] > frame[k + 1]
            });
            assert!(found, "no local maximum near harmonic {harmonic}");
        }
    }
}
