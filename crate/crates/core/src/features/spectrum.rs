use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FeatureError, FRAME_LEN, HOP};
use crate::audio::AudioClip;

/// Windowed short-time frames of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frames: Vec<Vec<f64>>,
    pub frame_len: usize,
    pub hop: usize,
}

impl FrameMatrix {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Symmetric Hann window `0.5 - 0.5 cos(2 pi n / (L - 1))`.
pub fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

pub(crate) fn hann_2048() -> &'static [f64] {
    static WINDOW: OnceLock<Vec<f64>> = OnceLock::new();
    WINDOW.get_or_init(|| hann(FRAME_LEN))
}

/// `floor((n - L) / hop) + 1` for `n >= L`, else 0.
pub fn frame_count(n: usize) -> usize {
    if n < FRAME_LEN {
        0
    } else {
        (n - FRAME_LEN) / HOP + 1
    }
}

pub fn frame_and_window(clip: &AudioClip) -> Result<FrameMatrix, FeatureError> {
    let samples = clip.samples();
    let count = frame_count(samples.len());
    if count == 0 {
        return Err(FeatureError::ClipTooShortForFrame { len: samples.len() });
    }
    let window = hann_2048();
    let frames = (0..count)
        .map(|i| {
            samples[i * HOP..i * HOP + FRAME_LEN]
                .iter()
                .zip(window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect();
    Ok(FrameMatrix { frames, frame_len: FRAME_LEN, hop: HOP })
}

fn planned(len: usize) -> Arc<dyn Fft<f64>> {
    static FFT_2048: OnceLock<Arc<dyn Fft<f64>>> = OnceLock::new();
    if len == FRAME_LEN {
        FFT_2048
            .get_or_init(|| FftPlanner::new().plan_fft_forward(FRAME_LEN))
            .clone()
    } else {
        FftPlanner::new().plan_fft_forward(len)
    }
}

/// Squared magnitudes of the DFT of a real frame, bins `0..=len/2`.
pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    let len = frame.len();
    if len == 0 {
        return Vec::new();
    }
    let fft = planned(len);
    let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft.process(&mut buf);
    buf[..=len / 2].iter().map(|c| c.norm_sqr()).collect()
}
