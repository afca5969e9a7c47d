//! Autocorrelation pitch tracking.
//!
//! Per 10 ms frame: a Hann-windowed segment of three periods of the pitch
//! floor, autocorrelation divided by the window's own autocorrelation,
//! parabolic peak refinement and a small octave cost favouring higher
//! candidates. Frames below the voicing or silence thresholds are unvoiced
//! and reported as 0 Hz.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::corpus::SAMPLE_RATE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchParams {
    pub floor_hz: f64,
    pub ceiling_hz: f64,
    pub hop_s: f64,
    pub voicing_threshold: f64,
    /// Relative to the utterance's peak amplitude.
    pub silence_threshold: f64,
    pub octave_cost: f64,
}

impl Default for PitchParams {
    fn default() -> Self {
        PitchParams {
            floor_hz: 75.0,
            ceiling_hz: 600.0,
            hop_s: 0.01,
            voicing_threshold: 0.45,
            silence_threshold: 0.03,
            octave_cost: 0.01,
        }
    }
}

/// F0 in Hz per frame; frame `i` is centred at `i * hop_s`. Unvoiced = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub hop_s: f64,
    pub values: Vec<f32>,
}

struct Tracker {
    params: PitchParams,
    win_len: usize,
    window: Vec<f64>,
    window_ac: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    nfft: usize,
}

impl Tracker {
    fn new(params: PitchParams) -> Self {
        let sr = SAMPLE_RATE as f64;
        let win_len = (3.0 / params.floor_hz * sr).round() as usize;
        let window: Vec<f64> = (0..win_len)
            .map(|i| {
                let x = (i as f64 + 0.5) / win_len as f64;
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * x).cos()
            })
            .collect();
        let nfft = (2 * win_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(nfft);
        let ifft = planner.plan_fft_inverse(nfft);
        let mut t = Tracker {
            params,
            win_len,
            window: window.clone(),
            window_ac: Vec::new(),
            fft,
            ifft,
            nfft,
        };
        t.window_ac = t.autocorrelation(&window);
        t
    }

    /// Autocorrelation normalised to lag 0 == 1 (zeros if silent).
    fn autocorrelation(&self, seg: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = seg
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.nfft)
            .collect();
        self.fft.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.ifft.process(&mut buf);
        let r0 = buf[0].re;
        if r0 <= 0.0 {
            return vec![0.0; seg.len()];
        }
        buf[..seg.len()].iter().map(|c| c.re / r0).collect()
    }

    fn frame_f0(&self, samples: &[f32], centre: isize, global_peak: f64) -> f32 {
        let half = (self.win_len / 2) as isize;
        let mut seg: Vec<f64> = (0..self.win_len as isize)
            .map(|k| {
                let i = centre - half + k;
                if i >= 0 && (i as usize) < samples.len() {
                    samples[i as usize] as f64
                } else {
                    0.0
                }
            })
            .collect();
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let mut local_peak = 0.0f64;
        for v in seg.iter_mut() {
            *v -= mean;
            local_peak = local_peak.max(v.abs());
        }
        if global_peak <= 0.0 || local_peak < self.params.silence_threshold * global_peak {
            return 0.0;
        }
        for (v, w) in seg.iter_mut().zip(&self.window) {
            *v *= w;
        }
        let ac = self.autocorrelation(&seg);

        let sr = SAMPLE_RATE as f64;
        let min_lag = (sr / self.params.ceiling_hz).floor().max(2.0) as usize;
        let max_lag = ((sr / self.params.floor_hz).ceil() as usize).min(self.win_len / 2);
        let r = |lag: usize| ac[lag] / self.window_ac[lag];

        let mut best: Option<(f64, f64)> = None; // (strength, lag)
        for lag in min_lag..max_lag {
            let (prev, cur, next) = (r(lag - 1), r(lag), r(lag + 1));
            if !(cur > prev && cur >= next) {
                continue;
            }
            let denom = prev - 2.0 * cur + next;
            let (offset, peak) = if denom < 0.0 {
                let off = 0.5 * (prev - next) / denom;
                (off, cur - 0.25 * (prev - next) * off)
            } else {
                (0.0, cur)
            };
            let refined = lag as f64 + offset;
            let f0 = sr / refined;
            if f0 < self.params.floor_hz || f0 > self.params.ceiling_hz {
                continue;
            }
            let strength =
                peak.min(1.0) - self.params.octave_cost * (self.params.floor_hz * refined / sr).log2();
            if best.is_none_or(|(s, _)| strength > s) && peak >= self.params.voicing_threshold {
                best = Some((strength, refined));
            }
        }
        best.map(|(_, lag)| (sr / lag) as f32).unwrap_or(0.0)
    }
}

impl F0Track {
    pub fn compute(samples: &[f32], params: PitchParams) -> F0Track {
        let tracker = Tracker::new(params);
        let hop = (params.hop_s * SAMPLE_RATE as f64).round() as usize;
        let n_frames = samples.len() / hop + 1;
        let global_peak = samples.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
        let values = (0..n_frames)
            .map(|i| tracker.frame_f0(samples, (i * hop) as isize, global_peak))
            .collect();
        F0Track {
            hop_s: params.hop_s,
            values,
        }
    }

    /// F0 at time `t_s` (nearest frame), 0 outside the track.
    pub fn at(&self, t_s: f64) -> f32 {
        let i = (t_s / self.hop_s).round();
        if i < 0.0 {
            return 0.0;
        }
        self.values.get(i as usize).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, secs: f64) -> Vec<f32> {
        let n = (secs * SAMPLE_RATE as f64) as usize;
        (0..n)
            .map(|i| (0.6 * (2.0 * std::f64::consts::PI * freq * i as f64 / SAMPLE_RATE as f64).sin()) as f32)
            .collect()
    }

    #[test]
    fn sine_200hz() {
        let track = F0Track::compute(&sine(200.0, 1.0), PitchParams::default());
        for &v in &track.values[5..95] {
            assert!((v - 200.0).abs() <= 1.0, "{v}");
        }
    }

    #[test]
    fn sine_sweep_of_frequencies() {
        for f in [90.0, 130.0, 220.0, 310.0, 450.0, 580.0] {
            let track = F0Track::compute(&sine(f, 0.5), PitchParams::default());
            let mid = track.values[25];
            assert!((mid as f64 - f).abs() <= 1.0, "{f}: {mid}");
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let track = F0Track::compute(&vec![0.0; 8000], PitchParams::default());
        assert!(track.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_mostly_unvoiced() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let noise: Vec<f32> = (0..16000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let track = F0Track::compute(&noise, PitchParams::default());
        let voiced = track.values.iter().filter(|&&v| v > 0.0).count();
        assert!(voiced < track.values.len() / 5, "{voiced}");
    }
}
