//! Planar base trajectories from keyframed forward speed and yaw rate.
//!
//! Between keyframes both profiles follow a quintic smootherstep, so speed,
//! yaw rate and their first two derivatives are continuous. Heading is
//! integrated in closed form, position on a dense grid.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::SimError;
use crate::geometry::{Rotation, Vec3};

const GRID_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    /// Forward speed, m/s.
    pub speed: f64,
    /// rad/s
    pub yaw_rate: f64,
}

impl Keyframe {
    pub const fn new(time: f64, speed: f64, yaw_rate: f64) -> Self {
        Self { time, speed, yaw_rate }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// State of the base frame (level, on the floor) at one instant. Body
/// quantities are expressed in the base frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseKinematics {
    pub position: Vec3,
    pub yaw: f64,
    pub speed: f64,
    pub speed_rate: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

impl BaseKinematics {
    /// Base to world.
    pub fn rotation(&self) -> Rotation {
        Rotation::rot_z(self.yaw)
    }

    pub fn angular_velocity(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.yaw_rate)
    }

    pub fn angular_accel(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.yaw_accel)
    }

    /// Velocity of a point rigidly attached at `offset` (base coordinates).
    pub fn point_velocity(&self, offset: &Vec3) -> Vec3 {
        Vec3::new(self.speed, 0.0, 0.0) + self.angular_velocity().cross(offset)
    }

    /// Inertial acceleration of a point rigidly attached at `offset`,
    /// expressed in base coordinates.
    pub fn point_accel(&self, offset: &Vec3) -> Vec3 {
        let w = self.angular_velocity();
        Vec3::new(self.speed_rate, self.speed * self.yaw_rate, 0.0)
            + self.angular_accel().cross(offset)
            + w.cross(&w.cross(offset))
    }
}

/// Smootherstep, its derivative and its integral from 0.
fn blend(tau: f64) -> (f64, f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let s = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
    let ds = 30.0 * t2 * (1.0 - 2.0 * tau + t2);
    let integral = t2 * t2 * (2.5 - 3.0 * tau + t2);
    (s, ds, integral)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    keys: Vec<Keyframe>,
    start: PlanarPose,
    yaw_at_key: Vec<f64>,
    grid_step: f64,
    grid: Vec<(f64, f64)>,
}

impl Trajectory {
    /// The first and last keyframes must be at rest so the trajectory can be
    /// extended as static beyond its ends.
    pub fn new(keys: Vec<Keyframe>, start: PlanarPose) -> Result<Self, SimError> {
        if keys.len() < 2 {
            return Err(SimError::InvalidSpec("need at least two keyframes"));
        }
        if keys.iter().any(|k| !(k.time.is_finite() && k.speed.is_finite() && k.yaw_rate.is_finite())) {
            return Err(SimError::InvalidSpec("keyframes must be finite"));
        }
        if keys.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(SimError::InvalidSpec("keyframe times must increase"));
        }
        let rest = |k: &Keyframe| k.speed == 0.0 && k.yaw_rate == 0.0;
        if !rest(&keys[0]) || !rest(&keys[keys.len() - 1]) {
            return Err(SimError::InvalidSpec("trajectory must start and end at rest"));
        }

        let mut yaw_at_key = Vec::with_capacity(keys.len());
        yaw_at_key.push(start.yaw);
        for w in keys.windows(2) {
            let span = w[1].time - w[0].time;
            let turned = span * (w[0].yaw_rate + 0.5 * (w[1].yaw_rate - w[0].yaw_rate));
            let last = *yaw_at_key.last().unwrap_or(&start.yaw);
            yaw_at_key.push(last + turned);
        }

        let mut traj = Trajectory { keys, start, yaw_at_key, grid_step: GRID_STEP, grid: Vec::new() };
        traj.integrate_grid();
        Ok(traj)
    }

    pub fn start_time(&self) -> f64 {
        self.keys[0].time
    }

    pub fn end_time(&self) -> f64 {
        self.keys[self.keys.len() - 1].time
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keys
    }

    fn integrate_grid(&mut self) {
        let span = self.end_time() - self.start_time();
        let n = (span / GRID_STEP).ceil().max(1.0) as usize;
        let h = span / n as f64;
        self.grid_step = h;
        self.grid = Vec::with_capacity(n + 1);
        let (mut x, mut y) = (self.start.x, self.start.y);
        self.grid.push((x, y));
        let t0 = self.start_time();
        for j in 0..n {
            let ta = t0 + j as f64 * h;
            let (a, m, b) = (self.planar_rate(ta), self.planar_rate(ta + 0.5 * h), self.planar_rate(ta + h));
            x += h / 6.0 * (a.0 + 4.0 * m.0 + b.0);
            y += h / 6.0 * (a.1 + 4.0 * m.1 + b.1);
            self.grid.push((x, y));
        }
    }

    fn planar_rate(&self, t: f64) -> (f64, f64) {
        let p = self.profile(t);
        (p.speed * p.yaw.cos(), p.speed * p.yaw.sin())
    }

    /// Everything except position.
    fn profile(&self, t: f64) -> BaseKinematics {
        let keys = &self.keys;
        let last = keys.len() - 1;
        let at_rest = |yaw| BaseKinematics {
            position: Vec3::zeros(),
            yaw,
            speed: 0.0,
            speed_rate: 0.0,
            yaw_rate: 0.0,
            yaw_accel: 0.0,
        };
        if t <= keys[0].time {
            return at_rest(self.yaw_at_key[0]);
        }
        if t >= keys[last].time {
            return at_rest(self.yaw_at_key[last]);
        }
        let i = keys.partition_point(|k| k.time <= t) - 1;
        let (a, b) = (&keys[i], &keys[i + 1]);
        let span = b.time - a.time;
        let tau = (t - a.time) / span;
        let (s, ds, integral) = blend(tau);
        let (du, dr) = (b.speed - a.speed, b.yaw_rate - a.yaw_rate);
        BaseKinematics {
            position: Vec3::zeros(),
            yaw: self.yaw_at_key[i] + span * (a.yaw_rate * tau + dr * integral),
            speed: a.speed + du * s,
            speed_rate: du * ds / span,
            yaw_rate: a.yaw_rate + dr * s,
            yaw_accel: dr * ds / span,
        }
    }

    pub fn at(&self, t: f64) -> BaseKinematics {
        let mut k = self.profile(t);
        let t0 = self.start_time();
        let n = self.grid.len() - 1;
        let h = self.grid_step;
        let u = ((t - t0) / h).clamp(0.0, n as f64);
        let j = (u.floor() as usize).min(n.saturating_sub(1));
        let s = u - j as f64;
        let (p0, p1) = (self.grid[j], self.grid[j + 1]);
        let ta = t0 + j as f64 * h;
        let (d0, d1) = (self.planar_rate(ta), self.planar_rate(ta + h));
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        k.position = Vec3::new(
            h00 * p0.0 + h10 * h * d0.0 + h01 * p1.0 + h11 * h * d1.0,
            h00 * p0.1 + h10 * h * d0.1 + h01 * p1.1 + h11 * h * d1.1,
            0.0,
        );
        k
    }

    /// Axis-aligned bounds of the path, sampled every 10 ms.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in self.grid.iter().step_by(10) {
            b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn circle() -> Trajectory {
        let keys = vec![
            Keyframe::new(0.0, 0.0, 0.0),
            Keyframe::new(2.0, 1.0, 0.5),
            Keyframe::new(20.0, 1.0, 0.5),
            Keyframe::new(22.0, 0.0, 0.0),
        ];
        Trajectory::new(keys, PlanarPose::default()).unwrap()
    }

    #[test]
    fn static_spec_has_zero_derivatives() {
        let t = Trajectory::new(vec![Keyframe::new(0.0, 0.0, 0.0), Keyframe::new(5.0, 0.0, 0.0)], PlanarPose { x: 1.0, y: 2.0, yaw: 0.3 }).unwrap();
        for s in [-1.0, 0.0, 2.5, 5.0, 7.0] {
            let k = t.at(s);
            assert_eq!(k.point_velocity(&Vec3::new(0.3, 0.2, 0.5)), Vec3::zeros());
            assert_eq!(k.point_accel(&Vec3::new(0.3, 0.2, 0.5)), Vec3::zeros());
            assert!((k.position - Vec3::new(1.0, 2.0, 0.0)).norm() < 1e-15);
            assert_eq!(k.yaw, 0.3);
        }
    }

    #[test]
    fn circle_kinematics() {
        let k = circle().at(10.0);
        assert!((k.point_velocity(&Vec3::zeros()).norm() - 1.0).abs() < 1e-12);
        assert!((k.point_accel(&Vec3::zeros()).norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn circle_closes_at_radius_two() {
        let t = circle();
        // During the hold the base runs on a circle of radius u / r = 2 m.
        let centre = {
            let k = t.at(5.0);
            k.position + k.rotation() * Vec3::new(0.0, 2.0, 0.0)
        };
        for s in [6.0, 9.5, 13.0, 17.7] {
            let k = t.at(s);
            assert!(((k.position - centre).norm() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_pose_derivatives_match_stored_velocity() {
        let t = circle();
        let h = 1e-4;
        for s in [1.0, 1.7, 3.3, 12.0, 20.9] {
            let (a, b, k) = (t.at(s - h), t.at(s + h), t.at(s));
            let v_num = (b.position - a.position) / (2.0 * h);
            let v = k.rotation() * k.point_velocity(&Vec3::zeros());
            assert!((v_num - v).norm() < 1e-7, "{s}");
            let yaw_rate = (b.yaw - a.yaw) / (2.0 * h);
            assert!((yaw_rate - k.yaw_rate).abs() < 1e-7);
            let acc_num = (b.rotation() * b.point_velocity(&Vec3::zeros()) - a.rotation() * a.point_velocity(&Vec3::zeros())) / (2.0 * h);
            assert!((acc_num - k.rotation() * k.point_accel(&Vec3::zeros())).norm() < 1e-6);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(Trajectory::new(vec![Keyframe::new(0.0, 0.0, 0.0)], PlanarPose::default()).is_err());
        let moving = vec![Keyframe::new(0.0, 1.0, 0.0), Keyframe::new(1.0, 0.0, 0.0)];
        assert!(Trajectory::new(moving, PlanarPose::default()).is_err());
        let backwards = vec![Keyframe::new(1.0, 0.0, 0.0), Keyframe::new(0.0, 0.0, 0.0)];
        assert!(Trajectory::new(backwards, PlanarPose::default()).is_err());
    }
}
