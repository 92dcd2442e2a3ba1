//! Audio buffers and WAV file I/O.
//!
//! Supported WAV encodings are 16-bit PCM and 32-bit IEEE float, mono.
//! Multichannel files are accepted on read by taking the first channel.
//! Sample-rate conversion is deliberately out of scope; consumers reject
//! mismatched rates instead of silently resampling.

use std::fs::File;
use std::io::{BufWriter, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Mono audio in [-1, 1] at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Config("audio buffer must be non-empty".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("audio contains non-finite samples".into()));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    /// Peak-normalize to `peak` if the signal exceeds it.
    pub fn limit_peak(&mut self, peak: f32) {
        let max = self
            .samples
            .iter()
            .fold(0.0_f32, |acc, &s| acc.max(s.abs()));
        if max > peak {
            let scale = peak / max;
            for s in &mut self.samples {
                *s *= scale;
            }
        }
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Read a WAV file, keeping the first channel of multichannel content.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_wav(&bytes)
}

fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    let bad = |msg: &str| Error::Wav(msg.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }

    let mut format: Option<(u16, u16, u32, u16)> = None; // (code, channels, rate, bits)
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad("chunk extends past end of file"))?;
        let body = &bytes[body_start..body_end];

        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let mut cur = Cursor::new(body);
                let mut code = cur.read_u16::<LittleEndian>().unwrap();
                let channels = cur.read_u16::<LittleEndian>().unwrap();
                let rate = cur.read_u32::<LittleEndian>().unwrap();
                let _byte_rate = cur.read_u32::<LittleEndian>().unwrap();
                let _block_align = cur.read_u16::<LittleEndian>().unwrap();
                let bits = cur.read_u16::<LittleEndian>().unwrap();
                if code == FORMAT_EXTENSIBLE {
                    // Sub-format GUID starts at byte 24; its first u16 is the code.
                    if body.len() < 26 {
                        return Err(bad("extensible fmt chunk too short"));
                    }
                    code = u16::from_le_bytes(body[24..26].try_into().unwrap());
                }
                format = Some((code, channels, rate, bits));
            }
            b"data" => {
                let (code, channels, rate, bits) =
                    format.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                if channels == 0 {
                    return Err(bad("zero channels"));
                }
                let samples = decode_samples(body, code, channels, bits)?;
                return AudioBuffer::new(samples, rate);
            }
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }
    Err(bad("no data chunk"))
}

fn decode_samples(data: &[u8], code: u16, channels: u16, bits: u16) -> Result<Vec<f32>> {
    let bad = |msg: String| Error::Wav(msg);
    let channels = channels as usize;
    match (code, bits) {
        (FORMAT_PCM, 16) => {
            let frame = 2 * channels;
            let n = data.len() / frame;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let off = i * frame;
                let v = i16::from_le_bytes(data[off..off + 2].try_into().unwrap());
                out.push(v as f32 / 32768.0);
            }
            Ok(out)
        }
        (FORMAT_IEEE_FLOAT, 32) => {
            let frame = 4 * channels;
            let n = data.len() / frame;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let off = i * frame;
                let v = f32::from_le_bytes(data[off..off + 4].try_into().unwrap());
                if !v.is_finite() {
                    return Err(bad("non-finite float sample".into()));
                }
                out.push(v.clamp(-1.0, 1.0));
            }
            Ok(out)
        }
        (code, bits) => Err(bad(format!(
            "unsupported encoding: format code {code}, {bits} bits (expected PCM16 or float32)"
        ))),
    }
}

/// Write mono 16-bit PCM.
pub fn write_wav_pcm16(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let data_len = audio.len() * 2;
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, FORMAT_PCM, 16, audio.sample_rate(), data_len)?;
    for &s in audio.samples() {
        let v = (s.clamp(-1.0, 1.0) as f64 * 32767.0).round() as i16;
        w.write_i16::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

/// Write mono 32-bit IEEE float.
pub fn write_wav_f32(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let data_len = audio.len() * 4;
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, FORMAT_IEEE_FLOAT, 32, audio.sample_rate(), data_len)?;
    for &s in audio.samples() {
        w.write_f32::<LittleEndian>(s)?;
    }
    w.flush()?;
    Ok(())
}

fn write_header<W: Write>(
    w: &mut W,
    code: u16,
    bits: u16,
    sample_rate: u32,
    data_len: usize,
) -> Result<()> {
    let bytes_per_sample = u32::from(bits) / 8;
    w.write_all(b"RIFF")?;
    w.write_u32::<LittleEndian>(36 + data_len as u32)?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_u32::<LittleEndian>(16)?;
    w.write_u16::<LittleEndian>(code)?;
    w.write_u16::<LittleEndian>(1)?;
    w.write_u32::<LittleEndian>(sample_rate)?;
    w.write_u32::<LittleEndian>(sample_rate * bytes_per_sample)?;
    w.write_u16::<LittleEndian>(bytes_per_sample as u16)?;
    w.write_u16::<LittleEndian>(bits)?;
    w.write_all(b"data")?;
    w.write_u32::<LittleEndian>(data_len as u32)?;
    Ok(())
}
