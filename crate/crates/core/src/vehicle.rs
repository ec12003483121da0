//! Quadrotor rigid-body model: parameters, X-configuration motor allocation,
//! RK4 integration of the coupled translational/rotational dynamics, and a
//! relative-wind drag model.

use nalgebra::{Quaternion, UnitQuaternion};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{is_finite, Rotation, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("integration step {0} s outside (0, 0.01]")]
    InvalidStep(f64),
    #[error("non-finite {quantity} after integration step")]
    NonFinite { quantity: &'static str },
}

/// Physical parameters of the simulated vehicle.
///
/// Mass, arm length and maximum thrust default to a 154 g micro quadrotor with
/// 58.5 mm arms and 4.6 N total thrust. Inertia, yaw coefficient and drag are
/// reconstructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Motor distance from the body center, m.
    pub arm_length: f64,
    /// Diagonal of the inertia tensor, kg·m².
    pub inertia: [f64; 3],
    /// N, shared equally by the four motors.
    pub max_total_thrust: f64,
    /// Magnitude of gravitational acceleration, m/s², acting along world -z.
    pub gravity: f64,
    /// Reaction torque per newton of motor force, m.
    pub yaw_torque_coefficient: f64,
    /// Quadratic drag coefficient, N/(m/s)².
    pub drag_coefficient: f64,
    /// Scale on the torque produced by air-velocity differences across the rotors.
    pub drag_gradient_gain: f64,
    /// Ratio of produced to commanded motor force (1 = perfect motor model).
    pub thrust_scale: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 0.154,
            arm_length: 0.0585,
            inertia: [8e-5, 8e-5, 1.4e-4],
            max_total_thrust: 4.6,
            gravity: 9.81,
            yaw_torque_coefficient: 0.006,
            drag_coefficient: 0.15 / 36.0,
            drag_gradient_gain: 1.0,
            thrust_scale: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |msg: String| Err(VehicleError::InvalidParams(msg));
        if !(self.mass > 0.0) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if self.inertia.iter().any(|j| !(*j > 0.0)) {
            return bad(format!("inertia entries must be positive, got {:?}", self.inertia));
        }
        if !(self.arm_length > 0.0) {
            return bad(format!("arm length must be positive, got {}", self.arm_length));
        }
        if !(self.yaw_torque_coefficient > 0.0) {
            return bad("yaw torque coefficient must be positive".into());
        }
        if !(self.gravity > 0.0) {
            return bad("gravity must be positive".into());
        }
        if !(self.max_total_thrust > self.weight()) {
            return bad(format!(
                "thrust-to-weight must exceed 1 (max thrust {} N, weight {} N)",
                self.max_total_thrust,
                self.weight()
            ));
        }
        if self.drag_coefficient < 0.0 || self.drag_gradient_gain < 0.0 || !(self.thrust_scale > 0.0) {
            return bad("drag coefficient, gradient gain and thrust scale must be non-negative".into());
        }
        Ok(())
    }

    pub fn per_motor_max(&self) -> f64 {
        self.max_total_thrust / 4.0
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn gravity_vector(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.gravity)
    }

    pub fn inertia_vec(&self) -> Vec3 {
        Vec3::from(self.inertia)
    }

    /// Body-frame rotor positions, X configuration, numbered counter-clockwise
    /// starting at (+x, +y).
    pub fn rotor_positions(&self) -> [Vec3; 4] {
        let d = self.arm_length / std::f64::consts::SQRT_2;
        [
            Vec3::new(d, d, 0.0),
            Vec3::new(-d, d, 0.0),
            Vec3::new(-d, -d, 0.0),
            Vec3::new(d, -d, 0.0),
        ]
    }
}

/// Spin direction sign of each rotor's reaction torque about body z.
const SPIN: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VehicleState {
    /// World frame, m.
    pub position: Vec3,
    /// World frame, m/s.
    pub velocity: Vec3,
    /// Body to world.
    pub attitude: Rotation,
    /// Body frame, rad/s.
    pub angular_velocity: Vec3,
}

impl VehicleState {
    pub fn at_rest(position: Vec3) -> Self {
        Self { position, ..Default::default() }
    }

    pub fn is_finite(&self) -> bool {
        is_finite(&self.position)
            && is_finite(&self.velocity)
            && is_finite(&self.angular_velocity)
            && self.attitude.wxyz().iter().all(|c| c.is_finite())
    }
}

/// Individual propeller forces, N.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotorCommand {
    pub forces: [f64; 4],
}

impl MotorCommand {
    pub fn total_thrust(&self) -> f64 {
        self.forces.iter().sum()
    }
}

/// Force in the world frame (N) paired with torque in the body frame (N·m).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force + rhs.force, self.torque + rhs.torque)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mix {
    pub command: MotorCommand,
    /// Set when the request could not be met within motor limits.
    pub saturated: bool,
}

fn allocate(thrust: f64, torque: &Vec3, params: &VehicleParams) -> ([f64; 4], [f64; 4]) {
    let d = params.arm_length / std::f64::consts::SQRT_2;
    let k = params.yaw_torque_coefficient;
    let base = [thrust / 4.0; 4];
    let (tx, ty, tz) = (torque.x / (4.0 * d), torque.y / (4.0 * d), torque.z / (4.0 * k));
    let delta = [tx - ty + tz, tx + ty - tz, -tx + ty + tz, -tx - ty - tz];
    (base, delta)
}

/// Largest `s` in [0, 1] with every `base + s * delta` inside [0, max].
fn feasible_scale(base: &[f64; 4], delta: &[f64; 4], max: f64) -> f64 {
    let mut s: f64 = 1.0;
    for (b, d) in base.iter().zip(delta) {
        if *d > 0.0 && b + d > max {
            s = s.min((max - b) / d);
        } else if *d < 0.0 && b + d < 0.0 {
            s = s.min(-b / d);
        }
    }
    s.clamp(0.0, 1.0)
}

/// Allocates total thrust and body torque to the four motors.
///
/// When the request is infeasible the total thrust is kept (clamped to the
/// motor range) and torque is scaled down, yaw first, then roll/pitch.
pub fn mix(total_thrust: f64, torque: &Vec3, params: &VehicleParams) -> Mix {
    let max = params.per_motor_max();
    let clamped = total_thrust.clamp(0.0, params.max_total_thrust);
    let mut saturated = clamped != total_thrust;

    let tilt = Vec3::new(torque.x, torque.y, 0.0);
    let yaw = Vec3::new(0.0, 0.0, torque.z);
    let (base, tilt_delta) = allocate(clamped, &tilt, params);
    let (_, yaw_delta) = allocate(0.0, &yaw, params);

    let tilt_scale = feasible_scale(&base, &tilt_delta, max);
    let with_tilt: [f64; 4] = std::array::from_fn(|i| base[i] + tilt_scale * tilt_delta[i]);
    let yaw_scale = feasible_scale(&with_tilt, &yaw_delta, max);
    if tilt_scale < 1.0 || yaw_scale < 1.0 {
        saturated = true;
    }
    let forces = std::array::from_fn(|i| (with_tilt[i] + yaw_scale * yaw_delta[i]).clamp(0.0, max));
    Mix { command: MotorCommand { forces }, saturated }
}

/// Total thrust and body torque produced by a motor command.
pub fn unmix(command: &MotorCommand, params: &VehicleParams) -> (f64, Vec3) {
    let mut torque = Vec3::zeros();
    for ((f, r), spin) in command.forces.iter().zip(params.rotor_positions()).zip(SPIN) {
        torque += r.cross(&Vec3::new(0.0, 0.0, *f));
        torque.z += spin * params.yaw_torque_coefficient * f;
    }
    (command.total_thrust(), torque)
}

#[derive(Clone, Copy, Debug)]
struct Rates {
    position: Vec3,
    velocity: Vec3,
    attitude: Quaternion<f64>,
    angular_velocity: Vec3,
}

#[derive(Clone, Copy, Debug)]
struct Point {
    position: Vec3,
    velocity: Vec3,
    attitude: Quaternion<f64>,
    angular_velocity: Vec3,
}

impl Point {
    fn advance(&self, rates: &Rates, h: f64) -> Point {
        Point {
            position: self.position + rates.position * h,
            velocity: self.velocity + rates.velocity * h,
            attitude: self.attitude + rates.attitude * h,
            angular_velocity: self.angular_velocity + rates.angular_velocity * h,
        }
    }
}

fn rates(point: &Point, thrust: f64, torque: &Vec3, disturbance: &Wrench, params: &VehicleParams) -> Rates {
    let unit = UnitQuaternion::from_quaternion(point.attitude);
    let thrust_world = unit.transform_vector(&Vec3::new(0.0, 0.0, thrust));
    let acceleration = (thrust_world + disturbance.force) / params.mass + params.gravity_vector();
    let j = params.inertia_vec();
    let w = point.angular_velocity;
    let gyroscopic = w.cross(&j.component_mul(&w));
    let angular_acceleration = (torque + disturbance.torque - gyroscopic).component_div(&j);
    let attitude = point.attitude * Quaternion::from_imag(w) * 0.5;
    Rates { position: point.velocity, velocity: acceleration, attitude, angular_velocity: angular_acceleration }
}

/// Thrust and torque actually produced, after the motor model mismatch factor.
pub fn produced(cmd: &MotorCommand, params: &VehicleParams) -> (f64, Vec3) {
    let (thrust, torque) = unmix(cmd, params);
    (thrust * params.thrust_scale, torque * params.thrust_scale)
}

/// World-frame linear acceleration at `state` under `cmd` and `disturbance`.
pub fn linear_acceleration(state: &VehicleState, cmd: &MotorCommand, disturbance: &Wrench, params: &VehicleParams) -> Vec3 {
    let (thrust, _) = produced(cmd, params);
    state.attitude.rotate(&Vec3::new(0.0, 0.0, thrust)) / params.mass + disturbance.force / params.mass + params.gravity_vector()
}

/// Advances the rigid body by `dt` with a classical RK4 step. The motor
/// command and disturbance wrench are held constant over the step.
pub fn step_dynamics(
    state: &VehicleState,
    cmd: &MotorCommand,
    disturbance: &Wrench,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, VehicleError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(VehicleError::InvalidStep(dt));
    }
    let (thrust, torque) = produced(cmd, params);
    let p0 = Point {
        position: state.position,
        velocity: state.velocity,
        attitude: *state.attitude.quaternion().quaternion(),
        angular_velocity: state.angular_velocity,
    };
    let k1 = rates(&p0, thrust, &torque, disturbance, params);
    let k2 = rates(&p0.advance(&k1, dt / 2.0), thrust, &torque, disturbance, params);
    let k3 = rates(&p0.advance(&k2, dt / 2.0), thrust, &torque, disturbance, params);
    let k4 = rates(&p0.advance(&k3, dt), thrust, &torque, disturbance, params);
    let combine = |a: Vec3, b: Vec3, c: Vec3, d: Vec3| (a + b * 2.0 + c * 2.0 + d) * (dt / 6.0);
    let position = p0.position + combine(k1.position, k2.position, k3.position, k4.position);
    let velocity = p0.velocity + combine(k1.velocity, k2.velocity, k3.velocity, k4.velocity);
    let angular_velocity = p0.angular_velocity
        + combine(k1.angular_velocity, k2.angular_velocity, k3.angular_velocity, k4.angular_velocity);
    let q = p0.attitude + (k1.attitude + k2.attitude * 2.0 + k3.attitude * 2.0 + k4.attitude) * (dt / 6.0);

    if !is_finite(&position) {
        return Err(VehicleError::NonFinite { quantity: "position" });
    }
    if !is_finite(&velocity) {
        return Err(VehicleError::NonFinite { quantity: "velocity" });
    }
    if !is_finite(&angular_velocity) {
        return Err(VehicleError::NonFinite { quantity: "angular velocity" });
    }
    if !q.coords.iter().all(|c| c.is_finite()) || q.norm() == 0.0 {
        return Err(VehicleError::NonFinite { quantity: "attitude" });
    }
    Ok(VehicleState {
        position,
        velocity,
        attitude: Rotation::from_unit_quaternion(UnitQuaternion::from_quaternion(q)),
        angular_velocity,
    })
}

/// Aerodynamic wrench from the surrounding air.
///
/// Force is quadratic in the air velocity relative to the body center. Torque
/// comes from evaluating the same drag law at each rotor with the local air
/// velocity; it vanishes in uniform flow and picks up a yaw component when the
/// flow changes across the vehicle span, e.g. at a jet boundary.
pub fn drag_wrench(state: &VehicleState, air_at: impl Fn(&Vec3) -> Vec3, params: &VehicleParams) -> Wrench {
    let cd = params.drag_coefficient;
    let quadratic = |v: Vec3| v * (cd * v.norm());
    let force = quadratic(air_at(&state.position) - state.velocity);
    if params.drag_gradient_gain == 0.0 || cd == 0.0 {
        return Wrench::new(force, Vec3::zeros());
    }
    let mut torque = Vec3::zeros();
    for r in params.rotor_positions() {
        let rotor = state.position + state.attitude.rotate(&r);
        let local = quadratic(air_at(&rotor) - state.velocity) / 4.0;
        torque += r.cross(&state.attitude.unrotate(&local));
    }
    Wrench::new(force, torque * params.drag_gradient_gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hover_params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn hover_thrust_splits_evenly() {
        let p = hover_params();
        let thrust = p.mass * 9.81;
        assert!((thrust - 1.511).abs() < 5e-4);
        let m = mix(thrust, &Vec3::zeros(), &p);
        assert!(!m.saturated);
        for f in m.command.forces {
            assert!((f - 0.3777).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_request_is_all_zero() {
        let m = mix(0.0, &Vec3::zeros(), &hover_params());
        assert_eq!(m.command.forces, [0.0; 4]);
        assert!(!m.saturated);
    }

    #[test]
    fn yaw_request_matches_hand_solved_allocation() {
        // Rows: thrust, tau_x, tau_y, tau_z with d = l/sqrt2 and kappa the yaw
        // coefficient. For tau = (0, 0, tz): f1 = f3 = T/4 + tz/(4 kappa),
        // f2 = f4 = T/4 - tz/(4 kappa).
        let p = hover_params();
        let tz = 0.003;
        let m = mix(2.0, &Vec3::new(0.0, 0.0, tz), &p);
        let hi = 0.5 + tz / (4.0 * 0.006);
        let lo = 0.5 - tz / (4.0 * 0.006);
        let expected = [hi, lo, hi, lo];
        for (f, e) in m.command.forces.iter().zip(expected) {
            assert!((f - e).abs() < 1e-12, "{f} vs {e}");
        }
        let (t, tau) = unmix(&m.command, &p);
        assert!((t - 2.0).abs() < 1e-12);
        assert!((tau - Vec3::new(0.0, 0.0, tz)).norm() < 1e-12);
    }

    #[test]
    fn infeasible_torque_keeps_thrust() {
        let p = hover_params();
        let m = mix(1.5, &Vec3::new(0.0, 0.0, 1.0), &p);
        assert!(m.saturated);
        assert!((m.command.total_thrust() - 1.5).abs() < 1e-12);
        let (_, tau) = unmix(&m.command, &p);
        assert!(tau.z > 0.0);
        assert!(m.command.forces.iter().all(|f| *f >= 0.0 && *f <= p.per_motor_max()));
    }

    #[test]
    fn excess_thrust_is_clamped_and_flagged() {
        let p = hover_params();
        let m = mix(10.0, &Vec3::zeros(), &p);
        assert!(m.saturated);
        assert!((m.command.total_thrust() - p.max_total_thrust).abs() < 1e-12);
    }

    #[test]
    fn free_fall_one_step() {
        let p = hover_params();
        let s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 10.0));
        let dt = 0.001;
        let next = step_dynamics(&s, &MotorCommand::default(), &Wrench::zero(), &p, dt).unwrap();
        assert!((next.velocity.z + 9.81 * dt).abs() < 1e-15);
    }

    #[test]
    fn hover_is_equilibrium() {
        let p = hover_params();
        let cmd = mix(p.weight(), &Vec3::zeros(), &p).command;
        let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.0));
        for _ in 0..1000 {
            s = step_dynamics(&s, &cmd, &Wrench::zero(), &p, 0.001).unwrap();
        }
        assert!((s.position - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!(s.angular_velocity.norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_step() {
        let p = hover_params();
        let s = VehicleState::default();
        assert!(step_dynamics(&s, &MotorCommand::default(), &Wrench::zero(), &p, 0.0).is_err());
        assert!(step_dynamics(&s, &MotorCommand::default(), &Wrench::zero(), &p, 0.02).is_err());
    }

    #[test]
    fn non_finite_disturbance_halts() {
        let p = hover_params();
        let s = VehicleState::default();
        let w = Wrench::new(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::zeros());
        assert!(matches!(
            step_dynamics(&s, &MotorCommand::default(), &w, &p, 0.001),
            Err(VehicleError::NonFinite { .. })
        ));
    }

    #[test]
    fn no_relative_wind_no_drag() {
        let p = hover_params();
        let mut s = VehicleState::at_rest(Vec3::zeros());
        s.velocity = Vec3::new(1.0, -2.0, 0.5);
        let v = s.velocity;
        let w = drag_wrench(&s, |_| v, &p);
        assert_eq!(w.force, Vec3::zeros());
        assert!(w.torque.norm() < 1e-18);
    }

    #[test]
    fn uniform_wind_pushes_without_torque() {
        let p = hover_params();
        let s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let w = drag_wrench(&s, |_| Vec3::new(6.0, 0.0, 0.0), &p);
        assert!(w.force.x > 0.0);
        assert!((w.force.x - 0.15).abs() < 1e-12);
        assert!(w.force.y == 0.0 && w.force.z == 0.0);
        assert!(w.torque.norm() < 1e-15);
    }

    #[test]
    fn half_in_jet_produces_yaw() {
        // Jet along +y filling x > 0. Front rotors sit at x = +l/sqrt2 and each
        // sees cd/4 * 36 N along +y; the lever arm gives tau_z = 2 * d * cd/4 * 36.
        let p = hover_params();
        let s = VehicleState::at_rest(Vec3::zeros());
        let field = |x: &Vec3| if x.x > 0.0 { Vec3::new(0.0, 6.0, 0.0) } else { Vec3::zeros() };
        let w = drag_wrench(&s, field, &p);
        let d = p.arm_length / std::f64::consts::SQRT_2;
        let expected = 2.0 * d * p.drag_coefficient / 4.0 * 36.0;
        assert!((w.torque.z - expected).abs() < 1e-15, "{} vs {expected}", w.torque.z);
        assert!(w.torque.z > 0.0);
        assert!(w.torque.x.abs() < 1e-18 && w.torque.y.abs() < 1e-18);
    }

    #[test]
    fn params_validation() {
        assert!(VehicleParams::default().validate().is_ok());
        let heavy = VehicleParams { mass: 1.0, ..Default::default() };
        assert!(heavy.validate().is_err());
        let flat = VehicleParams { inertia: [1e-4, 0.0, 1e-4], ..Default::default() };
        assert!(flat.validate().is_err());
    }

    proptest! {
        #[test]
        fn mix_unmix_round_trip(
            thrust in 0.8f64..3.0,
            tx in -0.01f64..0.01,
            ty in -0.01f64..0.01,
            tz in -0.002f64..0.002,
        ) {
            let p = hover_params();
            let torque = Vec3::new(tx, ty, tz);
            let m = mix(thrust, &torque, &p);
            prop_assume!(!m.saturated);
            let (t, tau) = unmix(&m.command, &p);
            prop_assert!((t - thrust).abs() < 1e-12);
            prop_assert!((tau - torque).norm() < 1e-12);
        }

        #[test]
        fn mix_respects_motor_limits(
            thrust in -1.0f64..6.0,
            tx in -0.2f64..0.2,
            ty in -0.2f64..0.2,
            tz in -0.05f64..0.05,
        ) {
            let p = hover_params();
            let m = mix(thrust, &Vec3::new(tx, ty, tz), &p);
            for f in m.command.forces {
                prop_assert!(f >= 0.0 && f <= p.per_motor_max() + 1e-15);
            }
        }
    }
}
