//! HTK-scale mel filterbank and the orthonormal DCT-II used for MFCCs.

use std::f64::consts::PI;

use super::{LOG_FLOOR, N_MEL, N_MFCC};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters, equally spaced on the mel scale over `[0, rate/2]`,
/// evaluated at FFT bin centre frequencies. Peak weight 1, no area
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    filters: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, n_fft: usize, sample_rate: u32) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_filters + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let filters = edges
            .windows(3)
            .map(|e| {
                let (lo, mid, hi) = (e[0], e[1], e[2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= mid {
                            (f - lo) / (mid - lo)
                        } else {
                            (hi - f) / (hi - mid)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { filters }
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn energies(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Natural log of each filter energy, floored at 1e-10.
    pub fn log_energies(&self, power: &[f64]) -> Vec<f64> {
        self.energies(power)
            .into_iter()
            .map(|e| e.max(LOG_FLOOR).ln())
            .collect()
    }
}

/// Orthonormal DCT-II: `D[k][n] = s_k cos(pi k (2n + 1) / 2N)` with
/// `s_0 = sqrt(1/N)` and `s_k = sqrt(2/N)` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct DctMatrix {
    rows: Vec<Vec<f64>>,
}

impl DctMatrix {
    pub fn new(n: usize) -> Self {
        let rows = (0..n)
            .map(|k| {
                let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                (0..n)
                    .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// First `n_out` coefficients of the transform of `x`.
    pub fn apply(&self, x: &[f64], n_out: usize) -> Vec<f64> {
        self.rows[..n_out]
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// 13 cepstral coefficients (c0 kept) from a power spectrum.
pub fn mfcc(power: &[f64], filterbank: &MelFilterbank, dct: &DctMatrix) -> [f64; N_MFCC] {
    debug_assert_eq!(filterbank.len(), N_MEL);
    let logs = filterbank.log_energies(power);
    let mut out = [0.0; N_MFCC];
    out.copy_from_slice(&dct.apply(&logs, N_MFCC));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> MelFilterbank {
        MelFilterbank::new(N_MEL, 2048, 22050)
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 55.0, 440.0, 1000.0, 11025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn filters_are_triangles_covering_the_band() {
        let fb = bank();
        assert_eq!(fb.len(), 26);
        for f in fb.filters() {
            assert_eq!(f.len(), 1025);
            assert!(f.iter().all(|w| (0.0..=1.0).contains(w)));
            assert!(f.iter().any(|w| *w > 0.0), "empty filter");
        }
    }

    #[test]
    fn dct_is_orthonormal() {
        let d = DctMatrix::new(N_MEL);
        for i in 0..N_MEL {
            for j in 0..N_MEL {
                let dot: f64 = d.rows()[i].iter().zip(&d.rows()[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9, "({i},{j}) = {dot}");
            }
        }
    }

    #[test]
    fn silence_gives_constant_log_energies() {
        let c = mfcc(&[0.0; 1025], &bank(), &DctMatrix::new(N_MEL));
        assert!((c[0] - (26f64).sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
        for v in &c[1..] {
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    /// Oracle: explicit triangle sums, then the DCT written out by definition.
    #[test]
    fn flat_spectrum_matches_explicit_oracle() {
        let level = 3.5;
        let power = vec![level; 1025];
        let fb = bank();
        let got = mfcc(&power, &fb, &DctMatrix::new(N_MEL));
        let logs: Vec<f64> = fb
            .filters()
            .iter()
            .map(|w| (level * w.iter().sum::<f64>()).max(1e-10).ln())
            .collect();
        let n = N_MEL as f64;
        for (k, g) in got.iter().enumerate() {
            let mut acc = 0.0;
            for (i, l) in logs.iter().enumerate() {
                acc += l * (PI / n * (i as f64 + 0.5) * k as f64).cos();
            }
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            assert!((g - scale * acc).abs() < 1e-9, "c{k}: {g} vs {}", scale * acc);
        }
        // If every filter had equal area, c0 = sqrt(26) * log(c * area).
        let mean_log = logs.iter().sum::<f64>() / n;
        assert!((got[0] - n.sqrt() * mean_log).abs() < 1e-9);
    }
}
