//! Cascaded PD position loop and tilt-prioritizing attitude loop, with the
//! disturbance compensation used by each control mode.

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::Fused;
use crate::math::{Rotation, Vec3};
use crate::vehicle::VehicleParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("controller gains must be positive")]
    NonPositive,
    #[error("attitude loop ({attitude} s) must be at least 4x faster than the position loop ({position} s)")]
    TooSlow { attitude: f64, position: f64 },
}

/// How the disturbance estimate enters the controller on a leg.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Plain cascaded PD, estimates ignored.
    PdOnly,
    /// Live observer estimates subtracted from the commanded wrench.
    Feedback,
    /// Record-aided fused estimates subtracted from the commanded wrench.
    Feedforward,
}

impl ControlMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlMode::PdOnly => "pd-only",
            ControlMode::Feedback => "feedback",
            ControlMode::Feedforward => "feedforward",
        }
    }
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControlMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pd-only" => Ok(ControlMode::PdOnly),
            "feedback" => Ok(ControlMode::Feedback),
            "feedforward" => Ok(ControlMode::Feedforward),
            other => Err(format!("unknown control mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct ControllerGains {
    /// Position stiffness per axis, 1/s².
    pub kp: [f64; 3],
    /// Velocity damping per axis, 1/s.
    pub kd: [f64; 3],
    /// Roll and pitch attitude time constants, s.
    pub attitude_time_constant: [f64; 2],
    /// s
    pub yaw_time_constant: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        // Natural frequency 2 rad/s, damping 0.7.
        Self::from_natural_frequency(2.0, 0.7, 0.06, 0.2)
    }
}

impl ControllerGains {
    pub fn from_natural_frequency(omega: f64, zeta: f64, attitude_tc: f64, yaw_tc: f64) -> Self {
        Self {
            kp: [omega * omega; 3],
            kd: [2.0 * zeta * omega; 3],
            attitude_time_constant: [attitude_tc; 2],
            yaw_time_constant: yaw_tc,
        }
    }

    pub fn validate(&self) -> Result<(), GainError> {
        let all = self.kp.iter().chain(&self.kd).chain(&self.attitude_time_constant).chain([&self.yaw_time_constant]);
        if all.into_iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(GainError::NonPositive);
        }
        let position = 1.0 / self.kp.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
        let attitude = self.attitude_time_constant.iter().copied().fold(0.0, f64::max);
        if 4.0 * attitude > position {
            return Err(GainError::TooSlow { attitude, position });
        }
        Ok(())
    }

    fn time_constants(&self) -> Vec3 {
        Vec3::new(self.attitude_time_constant[0], self.attitude_time_constant[1], self.yaw_time_constant)
    }
}

/// Position, velocity and acceleration reference.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Setpoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl Setpoint {
    pub fn hold(position: Vec3) -> Self {
        Self { position, ..Default::default() }
    }
}

/// Desired world-frame force from the PD position loop, compensated by the
/// disturbance estimate `f_hat`:
/// `m (a_ref + Kp e_p + Kd e_v) − m g − f̂_d`.
pub fn position_loop(
    position: &Vec3,
    velocity: &Vec3,
    setpoint: &Setpoint,
    f_hat: &Vec3,
    params: &VehicleParams,
    gains: &ControllerGains,
) -> Vec3 {
    let ep = setpoint.position - position;
    let ev = setpoint.velocity - velocity;
    let accel = setpoint.acceleration + Vec3::from(gains.kp).component_mul(&ep) + Vec3::from(gains.kd).component_mul(&ev);
    accel * params.mass - params.gravity_vector() * params.mass - f_hat
}

/// Scales `force` down to `limit` along its own direction.
pub fn saturate_force(force: &Vec3, limit: f64) -> (Vec3, bool) {
    let n = force.norm();
    if n > limit {
        (force * (limit / n), true)
    } else {
        (*force, false)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlOutput {
    /// Total thrust, N.
    pub thrust: f64,
    /// Body torque command, N·m.
    pub torque: Vec3,
    /// Thrust clipped to the motor range.
    pub thrust_saturated: bool,
    /// Desired force pointed opposite the body z axis; tilted about body x.
    pub antiparallel: bool,
    /// Tilt error angle, rad.
    pub tilt_error: f64,
    /// Yaw error, rad.
    pub yaw_error: f64,
}

/// Attitude with body z along `thrust_dir` (unit) and heading `yaw`.
pub fn desired_attitude(thrust_dir: &Vec3, yaw: f64) -> UnitQuaternion<f64> {
    let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let mut y_axis = thrust_dir.cross(&heading);
    if y_axis.norm() < 1e-6 {
        y_axis = Vec3::new(-yaw.sin(), yaw.cos(), 0.0);
    }
    let y_axis = y_axis.normalize();
    let x_axis = y_axis.cross(thrust_dir);
    let m = Matrix3::from_columns(&[x_axis, y_axis, *thrust_dir]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if w == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        w
    }
}

/// Nonlinear attitude law that points the thrust axis first.
///
/// The attitude error is split into the minimal tilt taking body z onto the
/// desired force direction and a residual rotation about body z (yaw). Each
/// error angle `e` drives a rate command `e / τ` tracked with time constant
/// `τ / 2`, giving damping 0.7 per axis; the torque adds the gyroscopic term.
/// The thrust is the projection of the desired force on the current body z.
pub fn attitude_loop(
    attitude: &Rotation,
    rates: &Vec3,
    desired_force: &Vec3,
    desired_yaw: f64,
    gains: &ControllerGains,
    params: &VehicleParams,
) -> ControlOutput {
    let inertia = params.inertia_vec();
    let tc = gains.time_constants();
    let torque_for = |rate_cmd: Vec3| -> Vec3 {
        let accel = (rate_cmd - rates).component_mul(&tc.map(|t| 2.0 / t));
        inertia.component_mul(&accel) + rates.cross(&inertia.component_mul(rates))
    };

    let norm = desired_force.norm();
    if norm < 1e-9 {
        return ControlOutput { torque: torque_for(Vec3::zeros()), ..Default::default() };
    }
    let direction = desired_force / norm;
    let in_body = attitude.unrotate(&direction);
    let cos = in_body.z.clamp(-1.0, 1.0);
    let axis = Vec3::z().cross(&in_body);
    let sin = axis.norm();
    let (tilt_axis, tilt_angle, antiparallel) = if sin > 1e-12 {
        (axis / sin, sin.atan2(cos), false)
    } else if cos > 0.0 {
        (Vec3::x(), 0.0, false)
    } else {
        (Vec3::x(), std::f64::consts::PI, true)
    };

    let reduced = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(tilt_axis), tilt_angle);
    let error = attitude.quaternion().inverse() * desired_attitude(&direction, desired_yaw);
    let twist = reduced.inverse() * error;
    let q = twist.quaternion();
    let (w, z) = if q.w < 0.0 { (-q.w, -q.k) } else { (q.w, q.k) };
    let yaw_error = wrap_angle(2.0 * z.atan2(w));

    let tilt = tilt_axis * tilt_angle;
    let rate_cmd = Vec3::new(tilt.x, tilt.y, yaw_error).component_div(&tc);
    let torque = torque_for(rate_cmd);

    let projected = desired_force.dot(&attitude.body_z()).max(0.0);
    let thrust = projected.min(params.max_total_thrust);
    ControlOutput {
        thrust,
        torque,
        thrust_saturated: thrust != projected,
        antiparallel,
        tilt_error: tilt_angle,
        yaw_error,
    }
}

/// Disturbance wrench subtracted by the controller.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compensation {
    /// World frame, N.
    pub force: Vec3,
    /// Body frame, N·m.
    pub torque: Vec3,
    /// Feedforward mode running on plain estimates because no record applied.
    pub fallback: bool,
}

/// Compensation for the feedback modes from the live filtered estimates.
pub fn feedback_compensation(mode: ControlMode, force: &Vec3, torque: &Vec3) -> Compensation {
    match mode {
        ControlMode::PdOnly => Compensation::default(),
        ControlMode::Feedback | ControlMode::Feedforward => {
            Compensation { force: *force, torque: *torque, fallback: false }
        }
    }
}

/// Return-leg compensation: the fused force replaces the feedback estimate in
/// the position loop and the fused torque (record plus filtered residual)
/// offsets the attitude loop. On lookup fallback both equal the plain
/// observer estimates, so the controller behaves as in feedback mode.
pub fn compose_feedforward(force: &Fused, torque: &Fused) -> Compensation {
    Compensation { force: force.value, torque: torque.value, fallback: force.fallback || torque.fallback }
}
