//! Deterministic test-signal generators.
//!
//! Everything here is seeded and platform-independent so examples and
//! evaluation runs are reproducible bit-for-bit. No external audio data is
//! required to exercise the pipeline.

use crate::audio::AudioBuffer;

/// Minimal xorshift64* generator. Deterministic across platforms, which is
/// all the synthesis code needs from an RNG.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 {
            state: seed.wrapping_mul(0x9E3779B97F4A7C15) | 1,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [-1, 1).
    pub fn next_bipolar(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

/// Pure sine tone.
pub fn sine(freq_hz: f64, amplitude: f64, duration_secs: f64, sample_rate: u32) -> AudioBuffer {
    let n = (duration_secs * sample_rate as f64).round() as usize;
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate as f64;
    let samples = (0..n)
        .map(|i| (amplitude * (w * i as f64).sin()) as f32)
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("sine synthesis produced invalid buffer")
}

/// Sawtooth at `f0_hz`: full harmonic series, good F0 ground truth.
pub fn sawtooth(f0_hz: f64, amplitude: f64, duration_secs: f64, sample_rate: u32) -> AudioBuffer {
    let n = (duration_secs * sample_rate as f64).round() as usize;
    let step = f0_hz / sample_rate as f64;
    let samples = (0..n)
        .map(|i| {
            let phase = (i as f64 * step).fract();
            (amplitude * (2.0 * phase - 1.0)) as f32
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("sawtooth synthesis produced invalid buffer")
}

/// Unit-impulse train at `f0_hz`. Impulses are placed at round(i * fs / f0)
/// so fractional periods keep the long-term rate exact.
pub fn pulse_train(f0_hz: f64, amplitude: f64, duration_secs: f64, sample_rate: u32) -> AudioBuffer {
    let n = (duration_secs * sample_rate as f64).round() as usize;
    let mut samples = vec![0.0f32; n];
    let period = sample_rate as f64 / f0_hz;
    let mut i = 0usize;
    loop {
        let pos = (i as f64 * period).round() as usize;
        if pos >= n {
            break;
        }
        samples[pos] = amplitude as f32;
        i += 1;
    }
    AudioBuffer::new(samples, sample_rate).expect("pulse synthesis produced invalid buffer")
}

/// Seeded white noise, uniform in [-amplitude, amplitude).
pub fn white_noise(seed: u64, amplitude: f64, duration_secs: f64, sample_rate: u32) -> AudioBuffer {
    let n = (duration_secs * sample_rate as f64).round() as usize;
    let mut rng = Rng64::new(seed);
    let samples = (0..n)
        .map(|_| (amplitude * rng.next_bipolar()) as f32)
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("noise synthesis produced invalid buffer")
}

/// Digital silence.
pub fn silence(duration_secs: f64, sample_rate: u32) -> AudioBuffer {
    let n = (duration_secs * sample_rate as f64).round() as usize;
    AudioBuffer::new(vec![0.0; n.max(1)], sample_rate).expect("silence buffer")
}

/// Two-pole resonator used to fake formants.
struct Resonator {
    b0: f64,
    a1: f64,
    a2: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(center_hz: f64, bandwidth_hz: f64, sample_rate: u32) -> Self {
        let fs = sample_rate as f64;
        let r = (-std::f64::consts::PI * bandwidth_hz / fs).exp();
        let theta = 2.0 * std::f64::consts::PI * center_hz / fs;
        Resonator {
            b0: (1.0 - r * r) * theta.sin().max(0.1),
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Speech-like utterance: voiced vowel segments (glottal-ish pulse source
/// with a slowly moving F0 contour through formant resonators) interleaved
/// with unvoiced noise bursts and short silences. Not speech, but it has the
/// voiced/unvoiced/silence structure the evaluation metrics need.
pub fn speech_like(seed: u64, duration_secs: f64, sample_rate: u32) -> AudioBuffer {
    let fs = sample_rate as f64;
    let n = (duration_secs * fs).round() as usize;
    let mut rng = Rng64::new(seed);
    let mut samples = vec![0.0f32; n];

    let f0_base = 170.0 + 70.0 * rng.next_f64();
    let vibrato_rate = 2.0 + 2.0 * rng.next_f64();
    // Formant gains fall off with center frequency, like the spectral tilt
    // of real voiced speech.
    let formant_sets = [
        [(730.0, 90.0, 1.0), (1090.0, 110.0, 0.5), (2440.0, 170.0, 0.2)],
        [(390.0, 70.0, 1.0), (1990.0, 120.0, 0.4), (2550.0, 180.0, 0.2)],
        [(570.0, 80.0, 1.0), (840.0, 100.0, 0.6), (2410.0, 170.0, 0.2)],
        [(440.0, 70.0, 1.0), (1020.0, 100.0, 0.5), (2240.0, 160.0, 0.2)],
    ];

    let mut pos = 0usize;
    let mut segment_index = 0usize;
    while pos < n {
        let r = rng.next_f64();
        // Mostly voiced, with regular unvoiced bursts and brief pauses.
        let (kind, dur) = if segment_index == 0 || r < 0.7 {
            (0u8, 0.4 + 0.3 * rng.next_f64())
        } else if r < 0.9 {
            (1u8, 0.08 + 0.08 * rng.next_f64())
        } else {
            (2u8, 0.04 + 0.05 * rng.next_f64())
        };
        let seg_len = ((dur * fs) as usize).min(n - pos).max(1);
        match kind {
            0 => {
                let vowel = formant_sets[(rng.next_u64() % 4) as usize];
                let mut formants: Vec<(Resonator, f64)> = vowel
                    .iter()
                    .map(|&(f, bw, gain)| (Resonator::new(f, bw, sample_rate), gain))
                    .collect();
                let drift = 0.9 + 0.25 * rng.next_f64();
                let mut phase = rng.next_f64();
                let mut lp = 0.0f64;
                for j in 0..seg_len {
                    let t = j as f64 / fs;
                    let f0 = f0_base
                        * drift
                        * (1.0 + 0.02 * (2.0 * std::f64::consts::PI * vibrato_rate * t).sin());
                    phase += f0 / fs;
                    if phase >= 1.0 {
                        phase -= 1.0;
                    }
                    // Sawtooth source with a gentle one-pole tilt keeps a
                    // rich, strongly periodic harmonic series.
                    let src = 2.0 * phase - 1.0;
                    lp = 0.8 * lp + 0.2 * src;
                    let excitation = lp + 0.0005 * rng.next_bipolar();
                    let mut y = 0.5 * excitation;
                    for (res, gain) in &mut formants {
                        y += *gain * res.process(excitation);
                    }
                    // Fade segment edges to avoid clicks.
                    let fade = edge_fade(j, seg_len, (0.03 * fs) as usize);
                    samples[pos + j] = (0.25 * y * fade) as f32;
                }
            }
            1 => {
                // Fricative-ish burst: high-passed noise.
                let mut prev = 0.0f64;
                for j in 0..seg_len {
                    let x = rng.next_bipolar();
                    let y = x - prev;
                    prev = x;
                    let fade = edge_fade(j, seg_len, (0.005 * fs) as usize);
                    samples[pos + j] = (0.05 * y * fade) as f32;
                }
            }
            _ => {}
        }
        pos += seg_len;
        segment_index += 1;
    }

    let mut audio =
        AudioBuffer::new(samples, sample_rate).expect("speech synthesis produced invalid buffer");
    audio.limit_peak(0.9);
    audio
}

fn edge_fade(j: usize, seg_len: usize, ramp: usize) -> f64 {
    if ramp == 0 {
        return 1.0;
    }
    let up = (j as f64 / ramp as f64).min(1.0);
    let down = ((seg_len.saturating_sub(1 + j)) as f64 / ramp as f64).min(1.0);
    up.min(down)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_train_rate_is_exact() {
        let audio = pulse_train(200.0, 1.0, 1.0, 24_000);
        let pulses = audio.samples().iter().filter(|&&s| s > 0.5).count();
        assert_eq!(pulses, 200);
    }

    #[test]
    fn pulse_train_handles_fractional_periods() {
        // 24000/313 is not an integer; rate should still be within one pulse.
        let audio = pulse_train(313.0, 1.0, 1.0, 24_000);
        let pulses = audio.samples().iter().filter(|&&s| s > 0.5).count();
        assert!((pulses as i64 - 313).abs() <= 1, "got {pulses}");
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = speech_like(7, 1.0, 24_000);
        let b = speech_like(7, 1.0, 24_000);
        assert_eq!(a.samples(), b.samples());
        let c = speech_like(8, 1.0, 24_000);
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn speech_like_has_sound_and_stays_in_range() {
        let audio = speech_like(3, 2.0, 24_000);
        assert!(audio.rms() > 1e-3);
        assert!(audio.samples().iter().all(|s| s.abs() <= 1.0));
    }
}
