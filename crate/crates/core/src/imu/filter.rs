//! Second-order Butterworth low-pass applied forward and backward.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

#[allow(unused_imports)]
use num_traits::Float;

use super::ImuSample;
use crate::error::ImuError;
use crate::geometry::Vec3;

pub const FILTER_ORDER: usize = 2;
/// Allowed deviation of any sample interval from the median interval.
pub const MAX_RATE_JITTER: f64 = 0.05;

/// Direct-form II transposed biquad with `a0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Bilinear-transform Butterworth low-pass with frequency prewarping.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, ImuError> {
        if !(cutoff_hz > 0.0) || !(sample_rate_hz > 0.0) || cutoff_hz >= 0.5 * sample_rate_hz {
            return Err(ImuError::InvalidParameter("cutoff must lie in (0, Nyquist)"));
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
        })
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Initial delay-line state for a unit step, so a constant input passes
    /// without a transient.
    pub fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z1 = self.b[2] - self.a[2] * g;
        [self.b[1] - self.a[1] * g + z1, z1]
    }

    /// Single causal pass starting from state `zi`.
    pub fn run(&self, x: &[f64], zi: [f64; 2]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let (mut z0, mut z1) = (zi[0], zi[1]);
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z0;
                z0 = b1 * xi - a1 * y + z1;
                z1 = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Zero-phase forward-backward filtering with odd-reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * FILTER_ORDER).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |s: f64| [zi[0] * s, zi[1] * s];
        let mut y = self.run(&ext, scaled(ext[0]));
        y.reverse();
        let mut y = self.run(&y, scaled(y[0]));
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Median sample interval after checking the rate is uniform.
pub fn uniform_interval(timestamps: &[f64]) -> Result<f64, ImuError> {
    if timestamps.len() < 2 {
        return Err(ImuError::StreamTooShort { found: timestamps.len(), required: 2 });
    }
    let mut dts: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = dts.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if !(median > 0.0) {
        return Err(ImuError::NonUniformRate { index: 0, deviation: 100.0 });
    }
    for (i, dt) in dts.drain(..).enumerate() {
        let dev = (dt - median).abs() / median;
        if !(dev <= MAX_RATE_JITTER) {
            return Err(ImuError::NonUniformRate { index: i + 1, deviation: 100.0 * dev });
        }
    }
    Ok(median)
}

/// Low-pass every gyro and accelerometer axis of a uniformly sampled stream.
pub fn zero_phase_filter(stream: &[ImuSample], cutoff_hz: f64) -> Result<Vec<ImuSample>, ImuError> {
    let required = 3 * FILTER_ORDER;
    if stream.len() < required {
        return Err(ImuError::StreamTooShort { found: stream.len(), required });
    }
    let t: Vec<f64> = stream.iter().map(|s| s.timestamp).collect();
    let dt = uniform_interval(&t)?;
    let biquad = Biquad::butterworth_lowpass(cutoff_hz, 1.0 / dt)?;

    let mut axes: [Vec<f64>; 6] = Default::default();
    for (i, axis) in axes.iter_mut().enumerate() {
        let raw: Vec<f64> = stream
            .iter()
            .map(|s| if i < 3 { s.gyro[i] } else { s.accel[i - 3] })
            .collect();
        *axis = biquad.filtfilt(&raw);
    }
    Ok((0..stream.len())
        .map(|k| ImuSample {
            timestamp: stream[k].timestamp,
            gyro: Vec3::new(axes[0][k], axes[1][k], axes[2][k]),
            accel: Vec3::new(axes[3][k], axes[4][k], axes[5][k]),
        })
        .collect())
}
