//! Global tempo from the autocorrelation of a log-mel spectral-flux envelope.

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureExtractor, HOP};
use crate::audio::AudioClip;

pub const MIN_BPM: f64 = 40.0;
pub const MAX_BPM: f64 = 200.0;
/// A second autocorrelation peak at twice or half the winning lag this close
/// to the winner marks the estimate as octave-ambiguous.
const OCTAVE_RATIO: f64 = 0.8;
/// Width (frames) of the Gaussian that smooths the onset envelope. Onsets
/// land on whole frames, so a beat period of 14.4 frames alternates 14- and
/// 15-frame gaps; unsmoothed, the lag three beats out (43.07, nearly whole)
/// outscores the true period.
const ENVELOPE_SIGMA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoEstimate {
    pub bpm: f64,
    /// Set when the double- or half-tempo lag scores nearly as high.
    pub octave_ambiguous: bool,
}

/// Half-wave-rectified frame-to-frame increase of log mel energies, summed
/// over filters. One value per frame after the first.
pub fn onset_envelope(log_mel: &[Vec<f64>]) -> Vec<f64> {
    log_mel
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(cur, prev)| (cur - prev).max(0.0))
                .sum()
        })
        .collect()
}

/// Gaussian smoothing with the kernel truncated at 3 sigma; samples beyond
/// the edges count as zero.
pub fn smooth_envelope(envelope: &[f64], sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    (0..envelope.len())
        .map(|t| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(i, k)| {
                    let j = (t + i).checked_sub(radius)?;
                    envelope.get(j).map(|e| e * k)
                })
                .sum::<f64>()
                / total
        })
        .collect()
}

struct Peak {
    lag: f64,
    value: f64,
}

/// Parabolic refinement of the local maximum at integer lag `l`.
fn refine(acf: &[f64], l: usize) -> Peak {
    let (a, b, c) = (acf[l - 1], acf[l], acf[l + 1]);
    let curvature = a - 2.0 * b + c;
    if curvature >= 0.0 {
        return Peak { lag: l as f64, value: b };
    }
    let delta = (0.5 * (a - c) / curvature).clamp(-0.5, 0.5);
    Peak { lag: l as f64 + delta, value: b - 0.25 * (a - c) * delta }
}

/// Tempo from an onset envelope sampled at `frame_rate` frames per second.
///
/// Autocorrelation (mean removed, unnormalized) is searched over lags
/// `60 * frame_rate / BPM` for BPM in [40, 200]; each local maximum is
/// refined to sub-frame precision and the highest wins. `None` when no lag
/// has positive autocorrelation.
pub fn tempo_from_envelope(envelope: &[f64], frame_rate: f64) -> Option<TempoEstimate> {
    let n = envelope.len();
    let min_lag = 60.0 * frame_rate / MAX_BPM;
    let max_lag = 60.0 * frame_rate / MIN_BPM;
    let lo = min_lag.ceil() as usize;
    let hi = (max_lag.floor() as usize).min(n.saturating_sub(2));
    if lo < 1 || hi < lo {
        return None;
    }
    let mean = envelope.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = envelope.iter().map(|e| e - mean).collect();
    let acf: Vec<f64> = (0..=hi + 1)
        .map(|lag| {
            centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();

    let peaks: Vec<Peak> = (lo..=hi)
        .map(|l| {
            if acf[l] >= acf[l - 1] && acf[l] >= acf[l + 1] {
                let p = refine(&acf, l);
                Peak { lag: p.lag.clamp(min_lag, max_lag), value: p.value }
            } else {
                Peak { lag: l as f64, value: acf[l] }
            }
        })
        .collect();
    let best = peaks
        .iter()
        .fold(None::<&Peak>, |best, p| match best {
            Some(b) if b.value >= p.value => Some(b),
            _ => Some(p),
        })?;
    if best.value.is_nan() || best.value <= 0.0 {
        return None;
    }
    let octave_ambiguous = peaks.iter().any(|p| {
        let near = |target: f64| (p.lag - target).abs() <= 1.5;
        (near(best.lag * 2.0) || near(best.lag / 2.0)) && p.value >= OCTAVE_RATIO * best.value
    });
    let bpm = (60.0 * frame_rate / best.lag).clamp(MIN_BPM, MAX_BPM);
    if octave_ambiguous {
        tracing::debug!(bpm, "tempo estimate is octave-ambiguous");
    }
    Some(TempoEstimate { bpm, octave_ambiguous })
}

pub(crate) fn tempo_from_log_mel(log_mel: &[Vec<f64>], sample_rate: u32) -> Option<TempoEstimate> {
    let envelope = onset_envelope(log_mel);
    if envelope.iter().all(|e| *e == 0.0) {
        return None;
    }
    let smoothed = smooth_envelope(&envelope, ENVELOPE_SIGMA);
    tempo_from_envelope(&smoothed, sample_rate as f64 / HOP as f64)
}

/// Estimates the global tempo of a clip; `Ok(None)` means no tempo.
pub fn estimate_tempo(clip: &AudioClip) -> Result<Option<TempoEstimate>, FeatureError> {
    let extractor = FeatureExtractor::for_rate(clip.sample_rate());
    let log_mel = extractor.log_mel_frames(clip)?;
    Ok(tempo_from_log_mel(&log_mel, clip.sample_rate()))
}
