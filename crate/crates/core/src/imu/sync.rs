//! Resampling onto LiDAR stamps and the coarse time offset.

use alloc::vec::Vec;

use nalgebra::UnitQuaternion;
#[allow(unused_imports)]
use num_traits::Float;

use super::ImuSample;
use crate::error::ImuError;

/// Stamps this close outside the stream span are clamped to its ends.
const STAMP_SLACK: f64 = 1e-9;

/// Index `i` and weight `w` such that `t = (1-w) t_i + w t_{i+1}`.
pub(crate) fn bracket(times: &[f64], t: f64) -> Result<(usize, f64), ImuError> {
    let (start, end) = match (times.first(), times.last()) {
        (Some(&s), Some(&e)) => (s, e),
        _ => return Err(ImuError::OutOfRangeTimestamp { t, start: f64::NAN, end: f64::NAN }),
    };
    if !(t >= start - STAMP_SLACK && t <= end + STAMP_SLACK) {
        return Err(ImuError::OutOfRangeTimestamp { t, start, end });
    }
    if times.len() == 1 {
        return Ok((0, 0.0));
    }
    let hi = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
    let lo = hi - 1;
    let w = ((t - times[lo]) / (times[hi] - times[lo])).clamp(0.0, 1.0);
    Ok((lo, w))
}

/// Linear interpolation of gyro and accelerometer at each stamp.
pub fn downsample_to_lidar(stream: &[ImuSample], lidar_timestamps: &[f64]) -> Result<Vec<ImuSample>, ImuError> {
    let times: Vec<f64> = stream.iter().map(|s| s.timestamp).collect();
    lidar_timestamps
        .iter()
        .map(|&t| {
            let (i, w) = bracket(&times, t)?;
            if w == 0.0 {
                return Ok(ImuSample { timestamp: t, ..stream[i] });
            }
            let (a, b) = (&stream[i], &stream[i + 1]);
            Ok(ImuSample {
                timestamp: t,
                gyro: a.gyro.lerp(&b.gyro, w),
                accel: a.accel.lerp(&b.accel, w),
            })
        })
        .collect()
}

/// Slerp of a per-sample orientation track at each stamp.
pub fn orientation_at(
    times: &[f64],
    track: &[UnitQuaternion<f64>],
    stamps: &[f64],
) -> Result<Vec<UnitQuaternion<f64>>, ImuError> {
    stamps
        .iter()
        .map(|&t| {
            let (i, w) = bracket(times, t)?;
            if w == 0.0 {
                Ok(track[i])
            } else {
                Ok(track[i].slerp(&track[i + 1], w))
            }
        })
        .collect()
}

/// Integer lag `c` maximising the normalised cross-correlation between
/// `imu[k + c]` and `lidar[k]` over their overlap. Ties go to the smaller
/// `|c|`, negative first.
pub fn coarse_time_offset(imu: &[f64], lidar: &[f64], max_lag: usize) -> Result<i32, ImuError> {
    const MIN_LEN: usize = 10;
    let n = imu.len().min(lidar.len());
    if n < MIN_LEN {
        return Err(ImuError::SeriesTooShort { found: n, required: MIN_LEN });
    }
    if 2 * max_lag >= n {
        return Err(ImuError::InvalidParameter("max_lag must be below half the series length"));
    }

    let mut best = (0i32, f64::NEG_INFINITY);
    for mag in 0..=max_lag as i32 {
        for lag in [-mag, mag] {
            if mag == 0 && lag < 0 {
                continue;
            }
            let score = correlation_at(imu, lidar, lag);
            if score > best.1 + 1e-12 {
                best = (lag, score);
            }
        }
    }
    Ok(best.0)
}

fn correlation_at(imu: &[f64], lidar: &[f64], lag: i32) -> f64 {
    let k0 = if lag < 0 { (-lag) as usize } else { 0 };
    let k1 = lidar.len().min((imu.len() as i64 - lag as i64).max(0) as usize);
    if k1 <= k0 + 1 {
        return f64::NEG_INFINITY;
    }
    let pairs = || (k0..k1).map(|k| (imu[(k as i64 + lag as i64) as usize], lidar[k]));
    let m = (k1 - k0) as f64;
    let (sx, sy) = pairs().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs() {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom > 0.0 {
        sxy / denom
    } else {
        0.0
    }
}
