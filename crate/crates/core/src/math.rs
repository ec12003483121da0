//! 3-D vectors, rotations, first-order low-pass filtering and filtered
//! differentiation shared by the rest of the crate.

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion, Vector3};
use thiserror::Error;

/// 3-vector of `f64`. Units depend on usage (m, m/s, N, N·m, rad/s).
pub type Vec3 = Vector3<f64>;

/// Tolerance on the quaternion norm before a rotation is renormalized.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("non-finite filter input {0:?}")]
    NonFinite([f64; 3]),
    #[error("invalid filter configuration: time constant {tau} s, sample period {dt} s")]
    InvalidConfig { tau: f64, dt: f64 },
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Body-to-world rotation stored as a unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(UnitQuaternion::identity())
    }

    /// Builds a rotation from raw quaternion components `(w, x, y, z)`.
    ///
    /// Inputs whose norm differs from one by more than [`UNIT_TOLERANCE`] are
    /// normalized and reported at debug level.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Self {
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            log::debug!("normalizing quaternion with norm {norm}");
        }
        Self(UnitQuaternion::from_quaternion(q))
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Self(q)
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        match Unit::try_new(*axis, 1e-12) {
            Some(unit) => Self(UnitQuaternion::from_axis_angle(&unit, angle)),
            None => Self::identity(),
        }
    }

    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self(UnitQuaternion::from_euler_angles(roll, pitch, yaw))
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    /// Components as `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    /// Quaternion product: `a.compose(&b).rotate(v) == a.rotate(&b.rotate(v))`.
    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }

    /// Maps a body-frame vector into the world frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0.transform_vector(v)
    }

    /// Maps a world-frame vector into the body frame.
    pub fn unrotate(&self, v: &Vec3) -> Vec3 {
        self.0.inverse_transform_vector(v)
    }

    /// World-frame direction of the body z axis (thrust axis).
    pub fn body_z(&self) -> Vec3 {
        self.rotate(&Vec3::z())
    }

    /// Heading angle of the body x axis projected on the horizontal plane.
    pub fn yaw(&self) -> f64 {
        self.0.euler_angles().2
    }

    /// Renormalizes the underlying quaternion in place.
    pub fn renormalize(&mut self) {
        self.0.renormalize();
    }
}

/// Free-function form of [`Rotation::rotate`].
pub fn rotate(r: &Rotation, v: &Vec3) -> Vec3 {
    r.rotate(v)
}

/// First-order exponential smoother, `y += dt/(tau+dt) * (u - y)`.
///
/// `tau = 0` passes the input through unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct LowPassFilter {
    tau: f64,
    dt: f64,
    state: Vec3,
}

impl LowPassFilter {
    pub fn new(tau: f64, dt: f64) -> Result<Self, FilterError> {
        Self::with_state(tau, dt, Vec3::zeros())
    }

    pub fn with_state(tau: f64, dt: f64, state: Vec3) -> Result<Self, FilterError> {
        if !(dt > 0.0 && dt.is_finite() && tau >= 0.0 && tau.is_finite()) {
            return Err(FilterError::InvalidConfig { tau, dt });
        }
        Ok(Self { tau, dt, state })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Smoothing factor applied to each new sample.
    pub fn alpha(&self) -> f64 {
        self.dt / (self.tau + self.dt)
    }

    pub fn state(&self) -> Vec3 {
        self.state
    }

    pub fn reset(&mut self, state: Vec3) {
        self.state = state;
    }

    pub fn step(&mut self, input: &Vec3) -> Result<Vec3, FilterError> {
        if !is_finite(input) {
            return Err(FilterError::NonFinite([input.x, input.y, input.z]));
        }
        if self.tau == 0.0 {
            self.state = *input;
        } else {
            let alpha = self.alpha();
            self.state += (input - self.state) * alpha;
        }
        Ok(self.state)
    }
}

/// Free-function form of [`LowPassFilter::step`].
pub fn lpf_step(filter: &mut LowPassFilter, input: &Vec3) -> Result<Vec3, FilterError> {
    filter.step(input)
}

/// Output of a differentiator step; `warm_up` is set while no history exists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivative {
    pub value: Vec3,
    pub warm_up: bool,
}

/// Backward difference `(u[k] - u[k-1]) / dt` passed through a low-pass filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredDifferentiator {
    previous: Option<Vec3>,
    filter: LowPassFilter,
}

impl FilteredDifferentiator {
    pub fn new(tau: f64, dt: f64) -> Result<Self, FilterError> {
        Ok(Self { previous: None, filter: LowPassFilter::new(tau, dt)? })
    }

    pub fn dt(&self) -> f64 {
        self.filter.dt()
    }

    pub fn step(&mut self, input: &Vec3) -> Result<Derivative, FilterError> {
        if !is_finite(input) {
            return Err(FilterError::NonFinite([input.x, input.y, input.z]));
        }
        let Some(previous) = self.previous.replace(*input) else {
            return Ok(Derivative { value: Vec3::zeros(), warm_up: true });
        };
        let raw = (input - previous) / self.filter.dt();
        let value = self.filter.step(&raw)?;
        Ok(Derivative { value, warm_up: false })
    }
}

/// Free-function form of [`FilteredDifferentiator::step`].
pub fn diff_step(d: &mut FilteredDifferentiator, input: &Vec3) -> Result<Derivative, FilterError> {
    d.step(input)
}
