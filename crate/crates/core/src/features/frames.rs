use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::SAMPLE_RATE;
use crate::error::{Error, Result};

/// Frame clock of an encoder: hop between frames and receptive field of one
/// frame, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub stride_s: f64,
    pub receptive_s: f64,
}

impl FrameGeometry {
    /// wav2vec2-base convolutional front end: 320-sample hop, 400-sample
    /// receptive field at 16 kHz.
    pub const BASE: FrameGeometry = FrameGeometry {
        stride_s: 0.02,
        receptive_s: 0.025,
    };

    pub fn stride_samples(&self) -> usize {
        (self.stride_s * SAMPLE_RATE as f64).round() as usize
    }

    pub fn receptive_samples(&self) -> usize {
        (self.receptive_s * SAMPLE_RATE as f64).round() as usize
    }

    /// `floor((n - receptive) / stride) + 1`.
    pub fn n_frames(&self, n_samples: usize) -> Result<usize> {
        let rf = self.receptive_samples();
        if n_samples < rf {
            return Err(Error::AudioTooShort {
                samples: n_samples,
                required: rf,
            });
        }
        Ok((n_samples - rf) / self.stride_samples() + 1)
    }

    pub fn time_to_frames(&self, start_s: f64, end_s: f64, n_frames: usize) -> Range<usize> {
        time_to_frames_with_stride(start_s, end_s, n_frames, self.stride_s)
    }
}

impl Default for FrameGeometry {
    fn default() -> Self {
        FrameGeometry::BASE
    }
}

// Absorbs representation error such as 0.1 / 0.02 = 5.000000000000001.
const EPS: f64 = 1e-9;

/// Frames `[floor(start/stride), ceil(end/stride))` clipped to `[0, n)`.
/// An empty intersection collapses to the single frame
/// `min(floor(start/stride), n - 1)`.
pub fn time_to_frames_with_stride(
    start_s: f64,
    end_s: f64,
    n_frames: usize,
    stride_s: f64,
) -> Range<usize> {
    debug_assert!(n_frames > 0);
    let first = ((start_s / stride_s) + EPS).floor().max(0.0) as usize;
    let last = ((end_s / stride_s) - EPS).ceil().max(0.0) as usize;
    let lo = first.min(n_frames);
    let hi = last.min(n_frames);
    if lo < hi {
        lo..hi
    } else {
        let f = first.min(n_frames - 1);
        f..f + 1
    }
}

/// Base-architecture stride for the convenience form used in docs/tests.
pub fn time_to_frames(start_s: f64, end_s: f64, n_frames: usize) -> Range<usize> {
    time_to_frames_with_stride(start_s, end_s, n_frames, FrameGeometry::BASE.stride_s)
}
