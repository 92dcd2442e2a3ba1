//! MELF feature container: a small little-endian binary format for mel
//! log-spectrograms with their full extraction config.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic      4 bytes  "MELF"
//! version    u32      currently 1
//! n_mels     u32
//! n_frames   u32
//! sample_rate u32
//! n_fft      u32
//! hop_length u32
//! win_length u32
//! f_min      f32
//! f_max      f32
//! mel_scale  u8       0 = slaney, 1 = htk
//! flags      u8       bit 0: area_normalize
//! reserved   u8 x 2   zero
//! log_floor  f32
//! data       n_frames * n_mels f32, frame-major
//! ```
//!
//! Feature data is single precision on disk; reads widen to f64 exactly, so
//! the f32 payload round-trips bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::config::{MelConfig, MelScale, WindowKind};
use crate::error::{Error, Result};
use crate::features::MelSpectrogram;

const MAGIC: &[u8; 4] = b"MELF";
const VERSION: u32 = 1;

pub fn write_melf(mel: &MelSpectrogram, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let config = mel.config();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(config.n_mels as u32)?;
    w.write_u32::<LittleEndian>(mel.n_frames() as u32)?;
    w.write_u32::<LittleEndian>(config.sample_rate)?;
    w.write_u32::<LittleEndian>(config.n_fft as u32)?;
    w.write_u32::<LittleEndian>(config.hop_length as u32)?;
    w.write_u32::<LittleEndian>(config.win_length as u32)?;
    w.write_f32::<LittleEndian>(config.f_min)?;
    w.write_f32::<LittleEndian>(config.f_max)?;
    w.write_u8(config.mel_scale.code())?;
    w.write_u8(u8::from(config.area_normalize))?;
    w.write_all(&[0u8; 2])?;
    w.write_f32::<LittleEndian>(config.log_floor)?;
    for row in mel.data().rows() {
        for &v in row.iter() {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_melf(path: &Path) -> Result<MelSpectrogram> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::BadMagic)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Melf("header ends before version field".into()))?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }

    let header_err = |_| Error::Melf("truncated header".into());
    let n_mels = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let n_frames = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let sample_rate = r.read_u32::<LittleEndian>().map_err(header_err)?;
    let n_fft = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let hop_length = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let win_length = r.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let f_min = r.read_f32::<LittleEndian>().map_err(header_err)?;
    let f_max = r.read_f32::<LittleEndian>().map_err(header_err)?;
    let mel_scale = MelScale::from_code(r.read_u8().map_err(header_err)?)?;
    let flags = r.read_u8().map_err(header_err)?;
    let mut reserved = [0u8; 2];
    r.read_exact(&mut reserved).map_err(header_err)?;
    let log_floor = r.read_f32::<LittleEndian>().map_err(header_err)?;

    let config = MelConfig {
        sample_rate,
        n_fft,
        hop_length,
        win_length,
        n_mels,
        f_min,
        f_max,
        mel_scale,
        log_floor,
        window: WindowKind::Hann,
        area_normalize: flags & 1 != 0,
    };
    config.validate()?;

    let expected = n_frames * n_mels * 4;
    let mut payload = Vec::with_capacity(expected);
    r.take(expected as u64).read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            got: payload.len(),
        });
    }

    let mut data = Array2::<f64>::zeros((n_frames, n_mels));
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        data[[i / n_mels, i % n_mels]] = v as f64;
    }
    MelSpectrogram::new(data, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MelConfig;
    use crate::{mel_spectrogram, synth};

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("melshift-melf-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_mel() -> MelSpectrogram {
        let audio = synth::sawtooth(180.0, 0.5, 0.3, 24_000);
        mel_spectrogram(&audio, &MelConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact_at_single_precision() {
        let mel = sample_mel();
        let path = temp_path("roundtrip.melf");
        write_melf(&mel, &path).unwrap();
        let back = read_melf(&path).unwrap();
        assert_eq!(back.config(), mel.config());
        assert_eq!(back.n_frames(), mel.n_frames());
        for (a, b) in mel.data().iter().zip(back.data().iter()) {
            // Disk payload is f32; the f32 images must match exactly.
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
        // A second trip through the container is the identity.
        let path2 = temp_path("roundtrip2.melf");
        write_melf(&back, &path2).unwrap();
        let again = read_melf(&path2).unwrap();
        assert_eq!(again.data(), back.data());
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn bad_magic_is_reported() {
        let path = temp_path("badmagic.melf");
        std::fs::write(&path, b"WAVEnot-a-melf-file").unwrap();
        assert!(matches!(read_melf(&path), Err(Error::BadMagic)));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mel = sample_mel();
        let path = temp_path("version.melf");
        write_melf(&mel, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_melf(&path),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
    }

    #[test]
    fn truncated_payload_is_reported() {
        let mel = sample_mel();
        let path = temp_path("truncated.melf");
        write_melf(&mel, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = 48;
        let full = bytes.len() - header;
        std::fs::write(&path, &bytes[..header + full / 2]).unwrap();
        match read_melf(&path) {
            Err(Error::TruncatedPayload { expected, got }) => {
                assert_eq!(expected, full);
                assert_eq!(got, full / 2);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_header_config_is_reported() {
        let mel = sample_mel();
        let path = temp_path("badconfig.melf");
        write_melf(&mel, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Corrupt hop_length to zero (offset: 4 magic + 4 version + 4 n_mels
        // + 4 n_frames + 4 rate + 4 n_fft = 24).
        bytes[24..28].copy_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_melf(&path), Err(Error::Config(_))));
    }
}
