//! Log-mel cepstra at a 10 ms hop with a 25 ms Hann analysis window.
//!
//! Frames are centred (frame `i` at sample `i * hop`) with zero padding at
//! the signal edges; power spectra pass through a Slaney-normalised mel
//! filterbank, `10 log10(max(p, 1e-10))`, and an orthonormal DCT-II.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::corpus::SAMPLE_RATE;

pub const N_MFCC: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccParams {
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for MfccParams {
    fn default() -> Self {
        MfccParams {
            n_mfcc: N_MFCC,
            n_mels: 40,
            n_fft: 512,
            win_length: 400,
            hop_length: 160,
            fmin: 0.0,
            fmax: SAMPLE_RATE as f64 / 2.0,
        }
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = 6.4f64.ln() / 27.0;
    if hz >= min_log_hz {
        min_log_mel + (hz / min_log_hz).ln() / logstep
    } else {
        hz / f_sp
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = 6.4f64.ln() / 27.0;
    if mel >= min_log_mel {
        min_log_hz * (logstep * (mel - min_log_mel)).exp()
    } else {
        f_sp * mel
    }
}

/// `n_mels x (n_fft/2 + 1)` triangular filters with area normalisation.
pub(crate) fn mel_filterbank(n_mels: usize, n_fft: usize, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let sr = SAMPLE_RATE as f64;
    let fft_freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * sr / n_fft as f64).collect();
    let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let pts: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, c, hi) = (pts[m], pts[m + 1], pts[m + 2]);
            let norm = 2.0 / (hi - lo);
            fft_freqs
                .iter()
                .map(|&f| {
                    let up = (f - lo) / (c - lo);
                    let down = (hi - f) / (hi - c);
                    norm * up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis, `n_out x n_in`.
fn dct_basis(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n_in as f64).sqrt()
            } else {
                (2.0 / n_in as f64).sqrt()
            };
            (0..n_in)
                .map(|n| {
                    scale
                        * (std::f64::consts::PI * k as f64 * (2 * n + 1) as f64 / (2 * n_in) as f64)
                            .cos()
                })
                .collect()
        })
        .collect()
}

/// Reusable spectral front end (window, FFT plan, filterbank).
pub(crate) struct MelAnalyzer {
    pub n_fft: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filters: Vec<Vec<f64>>,
}

impl MelAnalyzer {
    pub fn new(n_mels: usize, n_fft: usize, win_length: usize, fmin: f64, fmax: f64) -> Self {
        // periodic Hann of win_length, centred inside n_fft
        let pad = (n_fft - win_length) / 2;
        let window: Vec<f64> = (0..n_fft)
            .map(|i| {
                if i < pad || i >= pad + win_length {
                    0.0
                } else {
                    let k = (i - pad) as f64;
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * k / win_length as f64).cos()
                }
            })
            .collect();
        MelAnalyzer {
            n_fft,
            window,
            fft: FftPlanner::new().plan_fft_forward(n_fft),
            filters: mel_filterbank(n_mels, n_fft, fmin, fmax),
        }
    }

    /// Mel power of the `n_fft` samples centred at `centre` (zero padded).
    pub fn mel_power(&self, samples: &[f32], centre: isize) -> Vec<f64> {
        let half = (self.n_fft / 2) as isize;
        let mut buf: Vec<Complex<f64>> = (0..self.n_fft)
            .map(|k| {
                let i = centre - half + k as isize;
                let v = if i >= 0 && (i as usize) < samples.len() {
                    samples[i as usize] as f64
                } else {
                    0.0
                };
                Complex::new(v * self.window[k], 0.0)
            })
            .collect();
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..self.n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        self.filters
            .iter()
            .map(|f| f.iter().zip(&power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Per-frame MFCC vectors; frame `i` centred at `i * hop_length` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccFrames {
    pub hop_s: f64,
    pub n_coeffs: usize,
    pub frames: Vec<Vec<f32>>,
}

impl MfccFrames {
    pub fn compute(samples: &[f32], params: MfccParams) -> MfccFrames {
        let analyzer = MelAnalyzer::new(
            params.n_mels,
            params.n_fft,
            params.win_length,
            params.fmin,
            params.fmax,
        );
        let dct = dct_basis(params.n_mfcc, params.n_mels);
        let n_frames = samples.len() / params.hop_length + 1;
        let frames = (0..n_frames)
            .map(|i| {
                let mel = analyzer.mel_power(samples, (i * params.hop_length) as isize);
                let log_mel: Vec<f64> = mel.iter().map(|&p| 10.0 * p.max(1e-10).log10()).collect();
                dct.iter()
                    .map(|row| row.iter().zip(&log_mel).map(|(b, x)| b * x).sum::<f64>() as f32)
                    .collect()
            })
            .collect();
        MfccFrames {
            hop_s: params.hop_length as f64 / SAMPLE_RATE as f64,
            n_coeffs: params.n_mfcc,
            frames,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_roundtrip() {
        for hz in [0.0, 100.0, 999.0, 1000.0, 4000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-6);
        }
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn dct_is_orthonormal() {
        let b = dct_basis(40, 40);
        for i in 0..40 {
            for j in 0..40 {
                let dot: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn silence_gives_log_floor_cepstrum() {
        let m = MfccFrames::compute(&vec![0.0; 4000], MfccParams::default());
        assert_eq!(m.frames.len(), 26);
        let c0 = -100.0 * (40f64).sqrt();
        for f in &m.frames {
            assert!((f[0] as f64 - c0).abs() < 1e-3);
            assert!(f[1..].iter().all(|v| v.abs() < 1e-3));
        }
    }

    #[test]
    fn tone_energy_lands_in_the_right_band() {
        let sr = SAMPLE_RATE as f64;
        let x: Vec<f32> = (0..4000)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / sr).sin() as f32)
            .collect();
        let a = MelAnalyzer::new(40, 512, 400, 0.0, 8000.0);
        let mel = a.mel_power(&x, 2000);
        let argmax = mel
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let centres: Vec<f64> = (0..42)
            .map(|i| mel_to_hz(hz_to_mel(8000.0) * i as f64 / 41.0))
            .collect();
        assert!((centres[argmax + 1] - 1000.0).abs() < 200.0);
    }
}
