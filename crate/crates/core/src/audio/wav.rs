use super::{AudioClip, AudioError};

/// Pluggable container decoder. WAV is always available; compressed formats
/// can be added by implementing this trait.
pub trait AudioDecoder: Send + Sync {
    /// Cheap sniff of the leading bytes.
    fn accepts(&self, bytes: &[u8]) -> bool;
    fn decode(&self, bytes: &[u8]) -> Result<AudioClip, AudioError>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WavDecoder;

impl AudioDecoder for WavDecoder {
    fn accepts(&self, bytes: &[u8]) -> bool {
        bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WAVE"
    }

    fn decode(&self, bytes: &[u8]) -> Result<AudioClip, AudioError> {
        decode_wav(bytes)
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct Format {
    channels: u16,
    sample_rate: u32,
    block_align: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<Format, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedContainer("fmt chunk shorter than 16 bytes".into()));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(AudioError::MalformedContainer("truncated extensible fmt chunk".into()));
        }
        // First two bytes of the sub-format GUID carry the real format tag.
        tag = u16_at(body, 24);
    }
    if tag != FORMAT_PCM {
        return Err(AudioError::UnsupportedEncoding(format!("format tag {tag:#06x}")));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedEncoding(format!("{bits}-bit samples")));
    }
    if !(1..=2).contains(&channels) {
        return Err(AudioError::UnsupportedEncoding(format!("{channels} channels")));
    }
    if sample_rate == 0 {
        return Err(AudioError::MalformedContainer("zero sample rate".into()));
    }
    if block_align != channels * 2 {
        return Err(AudioError::MalformedContainer(format!(
            "block align {block_align} inconsistent with {channels} x 16-bit"
        )));
    }
    Ok(Format { channels, sample_rate, block_align })
}

/// Decodes a RIFF/WAVE container holding 16-bit PCM (mono or stereo).
/// Stereo is mixed down by averaging the two channels.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedContainer("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|end| *end <= bytes.len())
            .ok_or_else(|| {
                AudioError::MalformedContainer(format!(
                    "chunk {:?} claims {size} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    bytes.len() - body_start
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => format = Some(parse_fmt(body)?),
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }
    let format =
        format.ok_or_else(|| AudioError::MalformedContainer("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedContainer("missing data chunk".into()))?;

    let frames = data.len() / format.block_align as usize;
    if frames == 0 {
        return Err(AudioError::EmptyAudio);
    }
    let sample = |i: usize| i16::from_le_bytes([data[2 * i], data[2 * i + 1]]) as f64 / 32768.0;
    let samples = match format.channels {
        1 => (0..frames).map(sample).collect(),
        _ => (0..frames)
            .map(|f| (sample(2 * f) + sample(2 * f + 1)) / 2.0)
            .collect(),
    };
    AudioClip::new(samples, format.sample_rate)
}

/// Encodes a clip as 16-bit mono PCM WAV. Samples are scaled by 32768,
/// rounded and clamped, so decoding recovers each within 1/32768.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let n = clip.len();
    let data_len = (n * 2) as u32;
    let rate = clip.sample_rate();
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in clip.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}
