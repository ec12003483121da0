//! IMU-based disturbance observers and the record-aided fused estimate.
//!
//! The force observer inverts Newton's law with the accelerometer's specific
//! force: `f_d = m R α − c_Σ R e₃`. The torque observer inverts Euler's law
//! with a filtered derivative of the gyro: `τ_d = J ω̇ + ω × Jω − τ_p`. Both
//! pass their raw value through a first-order low-pass filter.
//!
//! On the return leg the fused estimator filters only the residual between
//! the raw observation and the disturbance recorded at the current position,
//! then adds the record back, so spatial changes already seen on the outbound
//! leg appear without filter lag.

use crate::math::{Derivative, FilterError, FilteredDifferentiator, LowPassFilter, Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    /// Unfiltered observer output.
    pub raw: Vec3,
    /// Low-pass filtered output.
    pub filtered: Vec3,
}

#[derive(Clone, Debug)]
pub struct ForceObserver {
    mass: f64,
    filter: LowPassFilter,
    last: Estimate,
}

impl ForceObserver {
    pub fn new(mass: f64, tau: f64, dt: f64) -> Result<Self, FilterError> {
        let zero = Estimate { raw: Vec3::zeros(), filtered: Vec3::zeros() };
        Ok(Self { mass, filter: LowPassFilter::new(tau, dt)?, last: zero })
    }

    /// Disturbance force in the world frame from one accelerometer sample.
    ///
    /// `c_sigma` is the commanded total thrust, assumed equal to the produced one.
    pub fn observe(&mut self, accel: &Vec3, attitude: &Rotation, c_sigma: f64) -> Result<Estimate, FilterError> {
        let raw = raw_force(self.mass, accel, attitude, c_sigma);
        let filtered = self.filter.step(&raw)?;
        self.last = Estimate { raw, filtered };
        Ok(self.last)
    }

    pub fn last(&self) -> Estimate {
        self.last
    }

    pub fn filter(&self) -> &LowPassFilter {
        &self.filter
    }
}

/// `m R α − c_Σ R e₃`.
pub fn raw_force(mass: f64, accel: &Vec3, attitude: &Rotation, c_sigma: f64) -> Vec3 {
    attitude.rotate(&(accel * mass - Vec3::new(0.0, 0.0, c_sigma)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorqueEstimate {
    pub estimate: Estimate,
    pub angular_acceleration: Derivative,
}

#[derive(Clone, Debug)]
pub struct TorqueObserver {
    inertia: Vec3,
    differentiator: FilteredDifferentiator,
    filter: LowPassFilter,
    last: Estimate,
}

impl TorqueObserver {
    /// `diff_tau` filters the gyro derivative, `tau` the torque estimate.
    pub fn new(inertia: Vec3, diff_tau: f64, tau: f64, dt: f64) -> Result<Self, FilterError> {
        let zero = Estimate { raw: Vec3::zeros(), filtered: Vec3::zeros() };
        Ok(Self {
            inertia,
            differentiator: FilteredDifferentiator::new(diff_tau, dt)?,
            filter: LowPassFilter::new(tau, dt)?,
            last: zero,
        })
    }

    /// Body-frame disturbance torque from a gyro sample and the propeller
    /// torque applied since the previous sample.
    pub fn observe(&mut self, gyro: &Vec3, tau_p: &Vec3) -> Result<TorqueEstimate, FilterError> {
        let derivative = self.differentiator.step(gyro)?;
        let momentum = self.inertia.component_mul(gyro);
        let raw = self.inertia.component_mul(&derivative.value) + gyro.cross(&momentum) - tau_p;
        let filtered = self.filter.step(&raw)?;
        self.last = Estimate { raw, filtered };
        Ok(TorqueEstimate { estimate: self.last, angular_acceleration: derivative })
    }

    pub fn last(&self) -> Estimate {
        self.last
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fused {
    pub value: Vec3,
    /// No usable record; `value` is the plain observer estimate.
    pub fallback: bool,
}

/// `x̂[k] = F(x̂_obs[k] − x̂_rec[k]) + x̂_rec[k]` with `F` a stateful low-pass
/// filter on the residual.
#[derive(Clone, Debug)]
pub struct FusedEstimator {
    residual: LowPassFilter,
    engaged: bool,
    last_output: Vec3,
}

pub type FusedForceEstimator = FusedEstimator;

impl FusedEstimator {
    /// Starts disengaged; the first record seen is blended in without a jump
    /// from `initial`, the observer's current filtered estimate.
    pub fn new(tau: f64, dt: f64, initial: Vec3) -> Result<Self, FilterError> {
        Ok(Self { residual: LowPassFilter::new(tau, dt)?, engaged: false, last_output: initial })
    }

    /// Engaged estimator with an explicit residual filter state.
    pub fn with_residual_state(tau: f64, dt: f64, state: Vec3) -> Result<Self, FilterError> {
        Ok(Self { residual: LowPassFilter::with_state(tau, dt, state)?, engaged: true, last_output: Vec3::zeros() })
    }

    pub fn residual_state(&self) -> Vec3 {
        self.residual.state()
    }

    pub fn alpha(&self) -> f64 {
        self.residual.alpha()
    }

    /// One update. `observed` is the raw observer value, `recorded` the
    /// looked-up record (None on lookup fallback) and `plain` the observer's
    /// filtered estimate used while no record applies.
    pub fn fuse(&mut self, observed: &Vec3, recorded: Option<&Vec3>, plain: &Vec3) -> Result<Fused, FilterError> {
        let out = match recorded {
            Some(rec) => {
                if !self.engaged {
                    self.residual.reset(self.last_output - rec);
                    self.engaged = true;
                }
                let residual = self.residual.step(&(observed - rec))?;
                Fused { value: residual + rec, fallback: false }
            }
            None => {
                self.engaged = false;
                Fused { value: *plain, fallback: true }
            }
        };
        self.last_output = out.value;
        Ok(out)
    }
}

/// Fused update on an explicit residual filter: returns `F(prev − rec) + rec`.
pub fn fuse_with_record(residual: &mut LowPassFilter, prev: &Vec3, recorded: &Vec3) -> Result<Vec3, FilterError> {
    Ok(residual.step(&(prev - recorded))? + recorded)
}
