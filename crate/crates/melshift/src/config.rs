//! Analysis configuration shared by every stage of the pipeline.

use crate::error::{Error, Result};

/// Mel frequency scale variant. Open-source vocoders disagree on this,
/// so both common definitions are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelScale {
    /// Slaney / Auditory Toolbox scale: linear below 1 kHz, logarithmic above.
    Slaney,
    /// HTK scale: 2595 * log10(1 + f/700).
    Htk,
}

impl MelScale {
    /// Wire code used by the MELF container.
    pub fn code(self) -> u8 {
        match self {
            MelScale::Slaney => 0,
            MelScale::Htk => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(MelScale::Slaney),
            1 => Ok(MelScale::Htk),
            other => Err(Error::Config(format!("unknown mel_scale code {other}"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slaney" => Ok(MelScale::Slaney),
            "htk" => Ok(MelScale::Htk),
            other => Err(Error::Config(format!(
                "unknown mel_scale {other:?} (expected slaney or htk)"
            ))),
        }
    }

    /// Frequency in Hz to mels.
    pub fn hz_to_mel(self, hz: f64) -> f64 {
        match self {
            MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
            MelScale::Slaney => {
                let f_sp = 200.0 / 3.0;
                let min_log_hz = 1000.0;
                let logstep = 6.4_f64.ln() / 27.0;
                if hz >= min_log_hz {
                    min_log_hz / f_sp + (hz / min_log_hz).ln() / logstep
                } else {
                    hz / f_sp
                }
            }
        }
    }

    /// Mels back to frequency in Hz.
    pub fn mel_to_hz(self, mel: f64) -> f64 {
        match self {
            MelScale::Htk => 700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0),
            MelScale::Slaney => {
                let f_sp = 200.0 / 3.0;
                let min_log_hz = 1000.0;
                let min_log_mel = min_log_hz / f_sp;
                let logstep = 6.4_f64.ln() / 27.0;
                if mel >= min_log_mel {
                    min_log_hz * (logstep * (mel - min_log_mel)).exp()
                } else {
                    f_sp * mel
                }
            }
        }
    }
}

/// Analysis window shape. Only the periodic Hann window is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    #[default]
    Hann,
}

/// All parameters of mel log-spectrogram extraction.
///
/// The same config drives feature extraction, the linear operators built
/// from it, and the Griffin-Lim synthesis path, so a single value travels
/// through the whole pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    /// FFT size in samples; must be a power of two.
    pub n_fft: usize,
    pub hop_length: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub f_min: f32,
    pub f_max: f32,
    pub mel_scale: MelScale,
    /// Magnitude floor applied before the natural log.
    pub log_floor: f32,
    pub window: WindowKind,
    /// Slaney-style area normalization of filterbank rows (off by default;
    /// peak-1 triangles match the dominant open-source extraction setups).
    pub area_normalize: bool,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            sample_rate: 24_000,
            n_fft: 1024,
            hop_length: 256,
            win_length: 1024,
            n_mels: 80,
            f_min: 0.0,
            f_max: 12_000.0,
            mel_scale: MelScale::Slaney,
            log_floor: 1e-5,
            window: WindowKind::Hann,
            area_normalize: false,
        }
    }
}

impl MelConfig {
    /// Number of one-sided spectral bins K = n_fft/2 + 1.
    pub fn n_freq_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Natural-log floor value applied to mel features.
    pub fn floor_log(&self) -> f64 {
        (self.log_floor as f64).ln()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.n_fft < 2 || !self.n_fft.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_fft must be a power of two >= 2, got {}",
                self.n_fft
            )));
        }
        if self.win_length == 0 || self.win_length > self.n_fft {
            return Err(Error::Config(format!(
                "win_length must be in [1, n_fft], got {} (n_fft {})",
                self.win_length, self.n_fft
            )));
        }
        if self.hop_length == 0 || self.hop_length > self.win_length {
            return Err(Error::Config(format!(
                "hop_length must be in [1, win_length], got {} (win_length {})",
                self.hop_length, self.win_length
            )));
        }
        let nyquist = self.sample_rate as f32 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::Config(format!(
                "need 0 <= f_min < f_max <= sample_rate/2, got f_min {} f_max {} nyquist {}",
                self.f_min, self.f_max, nyquist
            )));
        }
        if self.n_mels == 0 || self.n_mels >= self.n_freq_bins() {
            return Err(Error::Config(format!(
                "n_mels must satisfy 0 < n_mels < n_fft/2 + 1, got {} (bins {})",
                self.n_mels,
                self.n_freq_bins()
            )));
        }
        if !(self.log_floor > 0.0) || !self.log_floor.is_finite() {
            return Err(Error::Config(format!(
                "log_floor must be a positive finite value, got {}",
                self.log_floor
            )));
        }
        Ok(())
    }

    /// Apply one `key = value` setting. Used by the CLI config file and by
    /// flag overrides so both share identical parsing.
    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let parse_err = |what: &str| Error::Config(format!("invalid {what} value {v:?}"));
        match key.trim() {
            "sample_rate" => self.sample_rate = v.parse().map_err(|_| parse_err("sample_rate"))?,
            "n_fft" => self.n_fft = v.parse().map_err(|_| parse_err("n_fft"))?,
            "hop_length" => self.hop_length = v.parse().map_err(|_| parse_err("hop_length"))?,
            "win_length" => self.win_length = v.parse().map_err(|_| parse_err("win_length"))?,
            "n_mels" => self.n_mels = v.parse().map_err(|_| parse_err("n_mels"))?,
            "f_min" => self.f_min = v.parse().map_err(|_| parse_err("f_min"))?,
            "f_max" => self.f_max = v.parse().map_err(|_| parse_err("f_max"))?,
            "mel_scale" => self.mel_scale = MelScale::parse(v)?,
            "log_floor" => self.log_floor = v.parse().map_err(|_| parse_err("log_floor"))?,
            "window" => {
                if !v.eq_ignore_ascii_case("hann") {
                    return Err(Error::Config(format!("unknown window {v:?}")));
                }
            }
            "area_normalize" => {
                self.area_normalize = v.parse().map_err(|_| parse_err("area_normalize"))?
            }
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a config file: one `key = value` per line, `#` comments.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut config = MelConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            config.apply_key(key, value)?;
        }
        Ok(config)
    }
}
