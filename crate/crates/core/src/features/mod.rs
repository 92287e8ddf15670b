//! Fixed-layout feature vectors from normalized clips.
//!
//! Each 2048-sample Hann frame (hop 512) yields 28 values: 13 MFCCs,
//! 12 chroma bins, zero-crossing rate, spectral centroid and rolloff. A clip
//! is summarized by the column means and population standard deviations of
//! those rows followed by one global tempo value, 57 numbers in total.

mod mel;
mod spectrum;
mod tempo;
mod timbre;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, WORKING_RATE};

pub use mel::{hz_to_mel, mel_to_hz, mfcc, DctMatrix, MelFilterbank};
pub use spectrum::{frame_and_window, frame_count, hann, power_spectrum, FrameMatrix};
pub use tempo::{estimate_tempo, onset_envelope, smooth_envelope, tempo_from_envelope, TempoEstimate, MAX_BPM, MIN_BPM};
pub use timbre::{chromagram, spectral_shape, zero_crossing_rate};

pub const FRAME_LEN: usize = 2048;
pub const HOP: usize = 512;
pub const N_BINS: usize = FRAME_LEN / 2 + 1;
pub const N_MEL: usize = 26;
pub const N_MFCC: usize = 13;
pub const N_CHROMA: usize = 12;
/// Values per frame row.
pub const N_FRAME_FEATURES: usize = N_MFCC + N_CHROMA + 3;
pub const N_FEATURES: usize = 2 * N_FRAME_FEATURES + 1;
pub const TEMPO_INDEX: usize = N_FEATURES - 1;
pub const LOG_FLOOR: f64 = 1e-10;

/// Layout descriptor recorded in model bundles.
pub const FEATURE_LAYOUT: &str =
    "mean[mfcc0-12,chroma0-11,zcr,centroid_hz,rolloff_hz];std[same];tempo_bpm";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("clip of {len} samples is shorter than one {FRAME_LEN}-sample frame")]
    ClipTooShortForFrame { len: usize },
    #[error("feature vector must hold {N_FEATURES} finite values: {0}")]
    InvalidVector(String),
}

type FrameRow = [f64; N_FRAME_FEATURES];

/// Column names in layout order, as used for CSV headers.
pub fn feature_names() -> Vec<String> {
    let row: Vec<String> = (0..N_MFCC)
        .map(|i| format!("mfcc_{{}}_{i}"))
        .chain((0..N_CHROMA).map(|i| format!("chroma_{{}}_{i}")))
        .chain(["zcr_{}", "centroid_{}", "rolloff_{}"].map(String::from))
        .collect();
    let mut names: Vec<String> = row.iter().map(|n| n.replace("{}", "mean")).collect();
    names.extend(row.iter().map(|n| n.replace("{}", "std")));
    names.push("tempo_bpm".into());
    names
}

/// 57-value clip summary; see the module docs for the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != N_FEATURES {
            return Err(FeatureError::InvalidVector(format!("got {} values", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::InvalidVector(format!("entry {i} is not finite")));
        }
        if let Some(i) = (N_FRAME_FEATURES..TEMPO_INDEX).find(|&i| values[i] < 0.0) {
            return Err(FeatureError::InvalidVector(format!("std entry {i} is negative")));
        }
        let tempo = values[TEMPO_INDEX];
        if tempo != 0.0 && !(MIN_BPM..=MAX_BPM).contains(&tempo) {
            return Err(FeatureError::InvalidVector(format!("tempo {tempo} out of range")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn means(&self) -> &[f64] {
        &self.0[..N_FRAME_FEATURES]
    }

    pub fn stds(&self) -> &[f64] {
        &self.0[N_FRAME_FEATURES..TEMPO_INDEX]
    }

    /// Tempo in BPM; 0.0 when none was detected.
    pub fn tempo_bpm(&self) -> f64 {
        self.0[TEMPO_INDEX]
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = FeatureError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Precomputed window, filterbank and DCT for one sample rate. Immutable
/// and shared across threads.
#[derive(Debug)]
pub struct FeatureExtractor {
    sample_rate: u32,
    filterbank: MelFilterbank,
    dct: DctMatrix,
}

impl FeatureExtractor {
    pub fn new(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            filterbank: MelFilterbank::new(N_MEL, FRAME_LEN, sample_rate),
            dct: DctMatrix::new(N_MEL),
        }
    }

    /// Shared instance for the working rate; other rates get a fresh one.
    pub fn for_rate(sample_rate: u32) -> Arc<FeatureExtractor> {
        static WORKING: OnceLock<Arc<FeatureExtractor>> = OnceLock::new();
        if sample_rate == WORKING_RATE {
            WORKING
                .get_or_init(|| Arc::new(FeatureExtractor::new(WORKING_RATE)))
                .clone()
        } else {
            Arc::new(FeatureExtractor::new(sample_rate))
        }
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn dct(&self) -> &DctMatrix {
        &self.dct
    }

    fn frames<'a>(
        &self,
        clip: &'a AudioClip,
    ) -> Result<impl Iterator<Item = (&'a [f64], Vec<f64>)> + 'a, FeatureError> {
        let samples = clip.samples();
        let count = frame_count(samples.len());
        if count == 0 {
            return Err(FeatureError::ClipTooShortForFrame { len: samples.len() });
        }
        let window = spectrum::hann_2048();
        Ok((0..count).map(move |i| {
            let raw = &samples[i * HOP..i * HOP + FRAME_LEN];
            let windowed: Vec<f64> = raw.iter().zip(window).map(|(s, w)| s * w).collect();
            (raw, power_spectrum(&windowed))
        }))
    }

    pub(crate) fn log_mel_frames(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>, FeatureError> {
        Ok(self
            .frames(clip)?
            .map(|(_, power)| self.filterbank.log_energies(&power))
            .collect())
    }

    fn frame_row(&self, raw: &[f64], power: &[f64], log_mel: &[f64]) -> [f64; N_FRAME_FEATURES] {
        let mut row = [0.0; N_FRAME_FEATURES];
        row[..N_MFCC].copy_from_slice(&self.dct.apply(log_mel, N_MFCC));
        row[N_MFCC..N_MFCC + N_CHROMA].copy_from_slice(&chromagram(power, self.sample_rate));
        let (centroid, rolloff) = spectral_shape(power, self.sample_rate);
        row[N_MFCC + N_CHROMA] = zero_crossing_rate(raw);
        row[N_MFCC + N_CHROMA + 1] = centroid;
        row[N_MFCC + N_CHROMA + 2] = rolloff;
        row
    }

    /// Per-frame 28-value rows plus the log mel energies used for tempo.
    fn analyze(&self, clip: &AudioClip) -> Result<(Vec<FrameRow>, Vec<Vec<f64>>), FeatureError> {
        let mut rows = Vec::new();
        let mut log_mels = Vec::new();
        for (raw, power) in self.frames(clip)? {
            let log_mel = self.filterbank.log_energies(&power);
            rows.push(self.frame_row(raw, &power, &log_mel));
            log_mels.push(log_mel);
        }
        Ok((rows, log_mels))
    }

    pub fn frame_features(&self, clip: &AudioClip) -> Result<Vec<[f64; N_FRAME_FEATURES]>, FeatureError> {
        Ok(self.analyze(clip)?.0)
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureVector, FeatureError> {
        let (rows, log_mels) = self.analyze(clip)?;
        let n = rows.len() as f64;
        let mut values = vec![0.0; N_FEATURES];
        for j in 0..N_FRAME_FEATURES {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            values[j] = mean;
            values[N_FRAME_FEATURES + j] = var.sqrt();
        }
        values[TEMPO_INDEX] = tempo::tempo_from_log_mel(&log_mels, self.sample_rate)
            .map_or(0.0, |t| t.bpm);
        FeatureVector::new(values)
    }
}

/// Per-frame rows `[13 MFCC | 12 chroma | ZCR | centroid | rolloff]`.
pub fn frame_features(clip: &AudioClip) -> Result<Vec<[f64; N_FRAME_FEATURES]>, FeatureError> {
    FeatureExtractor::for_rate(clip.sample_rate()).frame_features(clip)
}

/// Summarizes a normalized clip as a [`FeatureVector`].
pub fn extract_features(clip: &AudioClip) -> Result<FeatureVector, FeatureError> {
    FeatureExtractor::for_rate(clip.sample_rate()).extract(clip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_names() {
        let names = feature_names();
        assert_eq!(names.len(), N_FEATURES);
        assert_eq!(names[0], "mfcc_mean_0");
        assert_eq!(names[13], "chroma_mean_0");
        assert_eq!(names[25], "zcr_mean");
        assert_eq!(names[27], "rolloff_mean");
        assert_eq!(names[28], "mfcc_std_0");
        assert_eq!(names[55], "rolloff_std");
        assert_eq!(names[56], "tempo_bpm");
    }

    #[test]
    fn vector_validation() {
        assert!(FeatureVector::new(vec![0.0; 56]).is_err());
        assert!(FeatureVector::new(vec![0.0; 57]).is_ok());
        let mut v = vec![0.0; 57];
        v[30] = -1.0;
        assert!(FeatureVector::new(v).is_err());
        let mut v = vec![0.0; 57];
        v[56] = 20.0;
        assert!(FeatureVector::new(v).is_err());
        let mut v = vec![0.0; 57];
        v[3] = f64::INFINITY;
        assert!(FeatureVector::new(v).is_err());
    }

    #[test]
    fn dc_clip_has_no_crossings() {
        let clip = AudioClip::new(vec![0.25; 22050 * 3], 22050).unwrap();
        let fv = extract_features(&clip).unwrap();
        assert_eq!(fv.means()[N_MFCC + N_CHROMA], 0.0);
        assert_eq!(fv.tempo_bpm(), 0.0);
    }

    #[test]
    fn silent_clip_has_no_chroma() {
        let clip = AudioClip::new(vec![0.0; 22050 * 3], 22050).unwrap();
        let fv = extract_features(&clip).unwrap();
        assert!(fv.means()[N_MFCC..N_MFCC + N_CHROMA].iter().all(|c| *c == 0.0));
        // every mel energy hits the log floor
        assert!((fv.means()[0] - (26f64).sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn too_short_for_a_frame() {
        let clip = AudioClip::new(vec![0.1; 1000], 22050).unwrap();
        assert!(matches!(
            extract_features(&clip),
            Err(FeatureError::ClipTooShortForFrame { len: 1000 })
        ));
    }
}
