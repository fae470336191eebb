//! RIFF/WAVE reading and writing: PCM 16, PCM 24 and IEEE float 32.
//!
//! Only the first channel of a multichannel file is kept; [`WavInfo::first_channel_only`]
//! records when that happened. Parse failures report the byte offset where the
//! offending field starts.

use std::fs;
use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Pcm24,
    Float32,
}

impl BitDepth {
    fn bits(self) -> u16 {
        match self {
            BitDepth::Pcm16 => 16,
            BitDepth::Pcm24 => 24,
            BitDepth::Float32 => 32,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            BitDepth::Float32 => FORMAT_FLOAT,
            _ => FORMAT_PCM,
        }
    }
}

/// What the file held before conversion to a mono buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavInfo {
    pub channels: u16,
    pub bit_depth: BitDepth,
    /// Set when the file had more than one channel and the rest were dropped.
    pub first_channel_only: bool,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&self, offset: usize, len: usize, what: &str) -> Result<&[u8]> {
        self.bytes
            .get(offset..offset + len)
            .ok_or_else(|| format_err(offset, format!("truncated file while reading {what}")))
    }

    fn u16(&self, offset: usize, what: &str) -> Result<u16> {
        let b = self.take(offset, 2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, offset: usize, what: &str) -> Result<u32> {
        let b = self.take(offset, 4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<(AudioBuffer, WavInfo)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

/// Decodes an in-memory WAV image.
pub fn parse_wav(bytes: &[u8]) -> Result<(AudioBuffer, WavInfo)> {
    let r = Reader { bytes };
    if r.take(0, 4, "RIFF tag")? != b"RIFF" {
        return Err(format_err(0, "missing RIFF tag"));
    }
    if r.take(8, 4, "WAVE tag")? != b"WAVE" {
        return Err(format_err(8, "missing WAVE tag"));
    }

    let mut fmt: Option<(usize, u16, u16, u32, u16)> = None;
    let mut data: Option<(usize, usize)> = None;
    let mut offset = 12;
    while offset + 8 <= bytes.len() {
        let id = r.take(offset, 4, "chunk id")?;
        let size = r.u32(offset + 4, "chunk size")? as usize;
        let body = offset + 8;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(format_err(
                        offset + 4,
                        format!("fmt chunk too small ({size} bytes)"),
                    ));
                }
                let mut tag = r.u16(body, "format tag")?;
                let channels = r.u16(body + 2, "channel count")?;
                let rate = r.u32(body + 4, "sample rate")?;
                let bits = r.u16(body + 14, "bits per sample")?;
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(format_err(body, "extensible fmt chunk too small"));
                    }
                    tag = r.u16(body + 24, "extensible sub-format")?;
                }
                fmt = Some((body, tag, channels, rate, bits));
            }
            b"data" => {
                let available = bytes.len().saturating_sub(body);
                data = Some((body, size.min(available)));
            }
            _ => {}
        }
        offset = body + size + (size & 1);
    }

    let (fmt_at, tag, channels, rate, bits) =
        fmt.ok_or_else(|| format_err(12, "no fmt chunk found"))?;
    let (data_at, data_len) = data.ok_or_else(|| format_err(12, "no data chunk found"))?;
    if channels == 0 {
        return Err(format_err(fmt_at + 2, "zero channels"));
    }
    if rate == 0 {
        return Err(format_err(fmt_at + 4, "zero sample rate"));
    }
    let depth = match (tag, bits) {
        (FORMAT_PCM, 16) => BitDepth::Pcm16,
        (FORMAT_PCM, 24) => BitDepth::Pcm24,
        (FORMAT_FLOAT, 32) => BitDepth::Float32,
        (FORMAT_PCM | FORMAT_FLOAT, _) => {
            return Err(format_err(
                fmt_at + 14,
                format!("unsupported bit depth {bits}"),
            ))
        }
        _ => {
            return Err(format_err(
                fmt_at,
                format!("unsupported codec tag {tag:#06x}"),
            ))
        }
    };

    let width = bits as usize / 8;
    let frame = width * channels as usize;
    let frames = data_len / frame;
    let mut samples = Vec::with_capacity(frames);
    for i in 0..frames {
        let at = data_at + i * frame;
        let b = &bytes[at..at + width];
        let value = match depth {
            BitDepth::Pcm16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32_768.0,
            BitDepth::Pcm24 => {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            BitDepth::Float32 => {
                let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                if !v.is_finite() {
                    return Err(format_err(at, "non-finite float sample"));
                }
                v as f64
            }
        };
        samples.push(value);
    }

    let info = WavInfo {
        channels,
        bit_depth: depth,
        first_channel_only: channels > 1,
    };
    Ok((AudioBuffer::from_parts(samples, rate), info))
}

/// Encodes a mono buffer. PCM output is clipped to full scale.
pub fn encode_wav(buffer: &AudioBuffer, depth: BitDepth) -> Vec<u8> {
    let width = depth.bits() as usize / 8;
    let data_len = buffer.len() * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&depth.format_tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate() * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&depth.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in buffer.samples() {
        match depth {
            BitDepth::Pcm16 => {
                let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            BitDepth::Pcm24 => {
                let v = (s * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            BitDepth::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(buffer, depth)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(tag: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let width = bits / 8;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&48_000u32.to_le_bytes());
        out.extend_from_slice(&(48_000 * (width * channels) as u32).to_le_bytes());
        out.extend_from_slice(&(width * channels).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn float32_round_trip_is_exact() {
        let samples: Vec<f64> = (0..500).map(|i| ((i as f32) * 0.37).sin() as f64).collect();
        let buf = AudioBuffer::new(samples.clone(), 24_000).unwrap();
        let (back, info) = parse_wav(&encode_wav(&buf, BitDepth::Float32)).unwrap();
        assert_eq!(back.samples(), samples.as_slice());
        assert_eq!(back.sample_rate(), 24_000);
        assert!(!info.first_channel_only);
    }

    #[test]
    fn pcm16_full_scale_negative() {
        let data: Vec<u8> = [-32768i16, 0, 16384]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let (buf, _) = parse_wav(&header(FORMAT_PCM, 1, 16, &data)).unwrap();
        assert_eq!(buf.samples(), &[-1.0, 0.0, 0.5]);
    }

    #[test]
    fn pcm24_round_trip() {
        let buf = AudioBuffer::new(vec![0.25, -0.5, 0.125, -1.0], 24_000).unwrap();
        let (back, info) = parse_wav(&encode_wav(&buf, BitDepth::Pcm24)).unwrap();
        assert_eq!(back.samples(), buf.samples());
        assert_eq!(info.bit_depth, BitDepth::Pcm24);
    }

    #[test]
    fn stereo_keeps_first_channel_and_flags_it() {
        let data: Vec<u8> = [1000i16, -5, 2000, -5]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let (buf, info) = parse_wav(&header(FORMAT_PCM, 2, 16, &data)).unwrap();
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.samples()[1], 2000.0 / 32768.0);
        assert!(info.first_channel_only);
        assert_eq!(buf.sample_rate(), 48_000);
    }

    #[test]
    fn malformed_files_report_offsets() {
        match parse_wav(b"not a wav file at all") {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("unexpected {other:?}"),
        }
        let mut bytes = header(FORMAT_PCM, 1, 16, &[0, 0]);
        bytes[8..12].copy_from_slice(b"AVI ");
        assert!(matches!(
            parse_wav(&bytes),
            Err(Error::Format { offset: 8, .. })
        ));
        // unsupported codec (mu-law)
        let bytes = header(7, 1, 8, &[0, 0]);
        assert!(matches!(
            parse_wav(&bytes),
            Err(Error::Format { offset: 20, .. })
        ));
        // unsupported depth
        let bytes = header(FORMAT_PCM, 1, 8, &[0, 0]);
        assert!(matches!(
            parse_wav(&bytes),
            Err(Error::Format { offset: 34, .. })
        ));
        // truncated header
        let bytes = header(FORMAT_PCM, 1, 16, &[0, 0]);
        assert!(matches!(parse_wav(&bytes[..30]), Err(Error::Format { .. })));
    }
}
