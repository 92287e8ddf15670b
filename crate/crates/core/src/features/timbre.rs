//! Per-frame pitch-class and spectral-shape descriptors.

use super::N_CHROMA;

const CHROMA_MIN_HZ: f64 = 55.0;
const CHROMA_MAX_HZ: f64 = 8000.0;
const SILENT_POWER: f64 = 1e-12;
const ROLLOFF_FRACTION: f64 = 0.85;

fn bin_hz(n_bins: usize, sample_rate: u32) -> f64 {
    sample_rate as f64 / (2 * (n_bins - 1)) as f64
}

/// Fraction of adjacent sample pairs with a strict sign change. Zeros carry
/// the sign of the previous nonzero sample; leading zeros have no sign.
pub fn zero_crossing_rate(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let mut prev_sign = 0i8;
    let mut crossings = 0usize;
    for &x in frame {
        let sign = if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            prev_sign
        };
        if prev_sign != 0 && sign != 0 && sign != prev_sign {
            crossings += 1;
        }
        prev_sign = sign;
    }
    crossings as f64 / (frame.len() - 1) as f64
}

/// Pitch-class profile: each bin in [55, 8000] Hz adds its power to class
/// `round(69 + 12 log2(f / 440)) mod 12` (0 = C). L1-normalized; near-silent
/// frames give all zeros.
pub fn chromagram(power: &[f64], sample_rate: u32) -> [f64; N_CHROMA] {
    let mut chroma = [0.0; N_CHROMA];
    if power.len() < 2 {
        return chroma;
    }
    let step = bin_hz(power.len(), sample_rate);
    for (k, p) in power.iter().enumerate().skip(1) {
        let f = k as f64 * step;
        if f < CHROMA_MIN_HZ {
            continue;
        }
        if f > CHROMA_MAX_HZ {
            break;
        }
        let midi = (69.0 + 12.0 * (f / 440.0).log2()).round() as i64;
        chroma[midi.rem_euclid(12) as usize] += p;
    }
    let total: f64 = chroma.iter().sum();
    if total < SILENT_POWER {
        return [0.0; N_CHROMA];
    }
    chroma.iter_mut().for_each(|c| *c /= total);
    chroma
}

/// `(centroid, rolloff)` in Hz. Rolloff is the lowest bin frequency whose
/// cumulative power reaches 85% of the total. A zero spectrum gives (0, 0).
pub fn spectral_shape(power: &[f64], sample_rate: u32) -> (f64, f64) {
    let total: f64 = power.iter().sum();
    if power.len() < 2 || total.is_nan() || total <= 0.0 {
        return (0.0, 0.0);
    }
    let step = bin_hz(power.len(), sample_rate);
    let centroid = power
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * step * p)
        .sum::<f64>()
        / total;
    let threshold = ROLLOFF_FRACTION * total;
    let mut cumulative = 0.0;
    let mut rolloff_bin = power.len() - 1;
    for (k, p) in power.iter().enumerate() {
        cumulative += p;
        if cumulative >= threshold {
            rolloff_bin = k;
            break;
        }
    }
    (centroid, rolloff_bin as f64 * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::spectrum::{hann_2048, power_spectrum};
    use std::f64::consts::PI;

    const RATE: u32 = 22050;

    fn tone_frame(freqs: &[f64]) -> Vec<f64> {
        (0..2048)
            .map(|t| {
                freqs
                    .iter()
                    .map(|f| (2.0 * PI * f * t as f64 / RATE as f64).sin())
                    .sum::<f64>()
            })
            .zip(hann_2048())
            .map(|(x, w)| x * w)
            .collect()
    }

    #[test]
    fn zcr_edge_cases() {
        assert_eq!(zero_crossing_rate(&[1.0, 1.0, 1.0, 1.0]), 0.0);
        assert_eq!(zero_crossing_rate(&[1.0, -1.0, 1.0, -1.0, 1.0]), 1.0);
        // zero inherits the previous sign: +, 0(+), - is one crossing
        assert_eq!(zero_crossing_rate(&[1.0, 0.0, -1.0]), 0.5);
        assert_eq!(zero_crossing_rate(&[0.0, 0.0, 1.0]), 0.0);
    }

    #[test]
    fn zcr_of_100hz_sine() {
        let frame: Vec<f64> = (0..2048)
            .map(|t| (2.0 * PI * 100.0 * t as f64 / RATE as f64 + 0.3).sin())
            .collect();
        // direct count of sign flips on the same samples
        let flips = frame.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
        let zcr = zero_crossing_rate(&frame);
        assert_eq!(zcr, flips as f64 / 2047.0);
        assert!((zcr - 200.0 / RATE as f64).abs() <= 1.0 / 2047.0);
    }

    #[test]
    fn a440_lands_in_class_9() {
        let chroma = chromagram(&power_spectrum(&tone_frame(&[440.0])), RATE);
        assert!(chroma[9] >= 0.8, "{chroma:?}");
        assert!((chroma.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn octaves_share_a_class() {
        let chroma = chromagram(&power_spectrum(&tone_frame(&[220.0, 440.0])), RATE);
        let argmax = (0..12).max_by(|&a, &b| chroma[a].total_cmp(&chroma[b])).unwrap();
        assert_eq!(argmax, 9);
    }

    #[test]
    fn silence_and_dc_give_zero_chroma() {
        assert_eq!(chromagram(&[0.0; 1025], RATE), [0.0; 12]);
        let mut dc = vec![0.0; 1025];
        dc[0] = 1e6;
        assert_eq!(chromagram(&dc, RATE), [0.0; 12]);
    }

    #[test]
    fn centroid_of_a_tone() {
        let k = 40.0;
        let f = k * RATE as f64 / 2048.0;
        let (centroid, rolloff) = spectral_shape(&power_spectrum(&tone_frame(&[f])), RATE);
        let bin = RATE as f64 / 2048.0;
        assert!((centroid - f).abs() < bin, "{centroid} vs {f}");
        assert!((rolloff - f).abs() <= bin);
    }

    #[test]
    fn shape_sentinels() {
        assert_eq!(spectral_shape(&[0.0; 1025], RATE), (0.0, 0.0));
        let (_, rolloff) = spectral_shape(&[1.0; 1025], RATE);
        let expected_bin = (0.85f64 * 1025.0).ceil() - 1.0;
        assert_eq!(rolloff, expected_bin * RATE as f64 / 2048.0);
    }
}
