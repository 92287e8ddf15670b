//! Audio ingest: decoding, normalization and synthetic clips.
//!
//! Every downstream stage works on [`AudioClip`]: mono PCM in `[-1, 1]` at a
//! known sample rate. [`normalize_clip`] brings any decoded clip to the
//! canonical working rate and bounded analysis duration.

mod synth;
mod wav;

pub use synth::{genre_preset, plan_corpus, synthesize, CorpusItem, Partial, SynthSpec};
pub use wav::{decode_wav, encode_wav, AudioDecoder, WavDecoder};

/// Canonical working sample rate (Hz).
pub const WORKING_RATE: u32 = 22050;
/// Default analysis window length (seconds).
pub const ANALYSIS_SECONDS: f64 = 30.0;
/// Clips shorter than this are rejected by [`normalize_clip`].
pub const MIN_SECONDS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AudioError {
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no sample frames")]
    EmptyAudio,
    #[error("clip is {seconds:.2} s long; at least {min:.0} s required")]
    TooShort { seconds: f64, min: f64 },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
}

impl AudioError {
    /// Stable machine-readable code used by the CLI and HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            AudioError::MalformedContainer(_) => "MALFORMED_AUDIO",
            AudioError::UnsupportedEncoding(_) => "UNSUPPORTED_ENCODING",
            AudioError::EmptyAudio => "EMPTY_AUDIO",
            AudioError::TooShort { .. } => "TOO_SHORT",
            AudioError::InvalidClip(_) => "INVALID_CLIP",
        }
    }
}

/// Mono PCM samples in `[-1, 1]` at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(AudioError::InvalidClip(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
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

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Sub-clip of `len` samples starting at `offset`. Both are clamped to
    /// the clip bounds; the result always holds at least one sample.
    pub fn window(&self, offset: usize, len: usize) -> AudioClip {
        let start = offset.min(self.samples.len() - 1);
        let end = (start + len.max(1)).min(self.samples.len());
        AudioClip {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Linear-interpolation resampler.
///
/// Output sample `i` sits at input position `i * from / to`; the output
/// length is `round(n * to / from)`. Equal rates return the input unchanged.
pub fn resample_linear(samples: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let n = samples.len();
    let out_len = ((n as f64 * to as f64 / from as f64).round() as usize).max(1);
    let step = from as f64 / to as f64;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let idx = pos.floor() as usize;
            if idx + 1 >= n {
                samples[n - 1]
            } else {
                let frac = pos - idx as f64;
                samples[idx] + (samples[idx + 1] - samples[idx]) * frac
            }
        })
        .collect()
}

/// Number of samples `duration_s` spans at `rate`.
pub fn samples_for(duration_s: f64, rate: u32) -> usize {
    (duration_s * rate as f64).round() as usize
}

/// Resamples to `target_rate` and center-truncates to `duration_s` when the
/// clip is longer. Clips under [`MIN_SECONDS`] are rejected.
pub fn normalize_clip(
    clip: &AudioClip,
    target_rate: u32,
    duration_s: f64,
) -> Result<AudioClip, AudioError> {
    if target_rate == 0 || duration_s.is_nan() || duration_s <= 0.0 {
        return Err(AudioError::InvalidClip(
            "target rate and duration must be positive".into(),
        ));
    }
    let seconds = clip.duration_s();
    if seconds < MIN_SECONDS {
        return Err(AudioError::TooShort { seconds, min: MIN_SECONDS });
    }
    let mut samples = resample_linear(&clip.samples, clip.sample_rate, target_rate);
    let keep = samples_for(duration_s, target_rate);
    if samples.len() > keep {
        let offset = (samples.len() - keep) / 2;
        samples.drain(..offset);
        samples.truncate(keep);
    }
    AudioClip::new(samples, target_rate)
}
