//! Straight-line legs with a trapezoidal speed profile.

use thiserror::Error;

use crate::control::Setpoint;
use crate::math::Vec3;

/// Endpoints closer than this are treated as the same point, m.
pub const MIN_LEG_LENGTH: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("leg endpoints coincide (length {0} m)")]
    Degenerate(f64),
    #[error("leg speed must be positive, got {0} m/s")]
    Speed(f64),
    #[error("acceleration limit must be positive, got {0} m/s²")]
    Accel(f64),
}

/// One straight flight from `from` to `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg {
    pub from: Vec3,
    pub to: Vec3,
    /// Cruise speed, m/s.
    pub speed: f64,
    /// Acceleration limit, m/s².
    pub accel: f64,
}

impl Leg {
    pub fn reversed(&self) -> Leg {
        Leg { from: self.to, to: self.from, ..*self }
    }
}

/// Sampled reference along a leg: accelerate at the limit, cruise, brake.
/// Short legs that never reach cruise speed get a triangular profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trajectory {
    leg: Leg,
    direction: Vec3,
    length: f64,
    peak_speed: f64,
    ramp_time: f64,
    cruise_time: f64,
}

pub fn generate_trajectory(leg: &Leg) -> Result<Trajectory, TrajectoryError> {
    if !(leg.speed > 0.0) {
        return Err(TrajectoryError::Speed(leg.speed));
    }
    if !(leg.accel > 0.0) {
        return Err(TrajectoryError::Accel(leg.accel));
    }
    let delta = leg.to - leg.from;
    let length = delta.norm();
    if !(length >= MIN_LEG_LENGTH) {
        return Err(TrajectoryError::Degenerate(length));
    }
    let peak_speed = leg.speed.min((leg.accel * length).sqrt());
    let ramp_time = peak_speed / leg.accel;
    let ramp_length = 0.5 * peak_speed * ramp_time;
    let cruise_time = ((length - 2.0 * ramp_length) / peak_speed).max(0.0);
    Ok(Trajectory { leg: *leg, direction: delta / length, length, peak_speed, ramp_time, cruise_time })
}

impl Trajectory {
    pub fn leg(&self) -> &Leg {
        &self.leg
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn ramp_time(&self) -> f64 {
        self.ramp_time
    }

    pub fn cruise_time(&self) -> f64 {
        self.cruise_time
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.ramp_time + self.cruise_time
    }

    /// Reference at time `t` after the start of the leg. Holds the endpoints
    /// outside `[0, duration]`.
    pub fn sample(&self, t: f64) -> Setpoint {
        let a = self.leg.accel;
        let v = self.peak_speed;
        let (s, ds, dds) = if t <= 0.0 {
            (0.0, 0.0, 0.0)
        } else if t < self.ramp_time {
            (0.5 * a * t * t, a * t, a)
        } else if t < self.ramp_time + self.cruise_time {
            (0.5 * v * self.ramp_time + v * (t - self.ramp_time), v, 0.0)
        } else if t < self.duration() {
            let r = self.duration() - t;
            (self.length - 0.5 * a * r * r, a * r, -a)
        } else {
            (self.length, 0.0, 0.0)
        };
        if s >= self.length {
            return Setpoint::hold(self.leg.to);
        }
        Setpoint {
            position: self.leg.from + self.direction * s,
            velocity: self.direction * ds,
            acceleration: self.direction * dds,
        }
    }

    /// Reference sampled at `rate_hz` from the start through the end of the leg.
    pub fn sampled(&self, rate_hz: f64) -> Vec<(f64, Setpoint)> {
        let n = (self.duration() * rate_hz).ceil() as usize;
        (0..=n).map(|k| k as f64 / rate_hz).map(|t| (t, self.sample(t))).collect()
    }
}
