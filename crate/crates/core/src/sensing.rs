//! Simulated IMU and motion-capture measurements, the multi-rate schedule and
//! integer-ratio downsampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::vehicle::VehicleState;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RateError {
    #[error("rate {from} Hz is not an integer multiple of {to} Hz")]
    NotDivisible { from: u32, to: u32 },
    #[error("rates must be positive")]
    Zero,
    #[error("invalid rate schedule: {0}")]
    Schedule(String),
}

/// Sensor noise model. All standard deviations are per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct NoiseParams {
    /// m/s²
    pub accel_sigma: f64,
    /// rad/s
    pub gyro_sigma: f64,
    pub accel_bias: [f64; 3],
    pub gyro_bias: [f64; 3],
    /// m
    pub position_sigma: f64,
    /// m/s
    pub velocity_sigma: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            accel_sigma: 0.05,
            gyro_sigma: 0.002,
            accel_bias: [0.0; 3],
            gyro_bias: [0.0; 3],
            position_sigma: 0.001,
            velocity_sigma: 0.005,
        }
    }
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        Self {
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            accel_bias: [0.0; 3],
            gyro_bias: [0.0; 3],
            position_sigma: 0.0,
            velocity_sigma: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Specific force in the body frame, m/s².
    pub accel: Vec3,
    /// Body rates, rad/s.
    pub gyro: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionSample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Simulation, onboard, position and command/record rates in Hz.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct RateSchedule {
    pub sim_hz: u32,
    pub onboard_hz: u32,
    pub position_hz: u32,
    pub command_hz: u32,
}

impl Default for RateSchedule {
    fn default() -> Self {
        Self { sim_hz: 1000, onboard_hz: 500, position_hz: 200, command_hz: 50 }
    }
}

impl RateSchedule {
    pub fn validate(&self) -> Result<(), RateError> {
        for rate in [self.sim_hz, self.onboard_hz, self.position_hz, self.command_hz] {
            if rate == 0 {
                return Err(RateError::Zero);
            }
            ratio(self.sim_hz, rate)?;
        }
        ratio(self.onboard_hz, self.command_hz)?;
        ratio(self.position_hz, self.command_hz)?;
        if self.sim_hz < 100 {
            return Err(RateError::Schedule("simulation rate must be at least 100 Hz".into()));
        }
        Ok(())
    }

    pub fn sim_dt(&self) -> f64 {
        1.0 / self.sim_hz as f64
    }

    pub fn onboard_dt(&self) -> f64 {
        1.0 / self.onboard_hz as f64
    }

    /// Simulation steps between consecutive samples at `rate`.
    pub fn stride(&self, rate: u32) -> u64 {
        (self.sim_hz / rate) as u64
    }
}

fn ratio(from: u32, to: u32) -> Result<usize, RateError> {
    if from == 0 || to == 0 {
        return Err(RateError::Zero);
    }
    if !from.is_multiple_of(to) {
        return Err(RateError::NotDivisible { from, to });
    }
    Ok((from / to) as usize)
}

/// Keeps every `from_hz / to_hz`-th sample starting with the first.
pub fn downsample<T: Clone>(samples: &[T], from_hz: u32, to_hz: u32) -> Result<Vec<T>, RateError> {
    let step = ratio(from_hz, to_hz)?;
    Ok(samples.iter().step_by(step).cloned().collect())
}

/// Zero-order-hold expansion by an integer ratio.
pub fn upsample_hold<T: Clone>(samples: &[T], from_hz: u32, to_hz: u32) -> Result<Vec<T>, RateError> {
    let step = ratio(to_hz, from_hz)?;
    Ok(samples.iter().flat_map(|s| std::iter::repeat_n(s.clone(), step)).collect())
}

/// Produces noisy IMU and position samples from ground truth. Owns its random
/// streams so identical seeds give identical sequences.
#[derive(Clone, Debug)]
pub struct Sensors {
    noise: NoiseParams,
    imu_rng: ChaCha8Rng,
    position_rng: ChaCha8Rng,
}

/// Named stream indices derived from the master seed.
pub const IMU_STREAM: u64 = 1;
pub const POSITION_STREAM: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    if sigma == 0.0 {
        return Vec3::zeros();
    }
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    Vec3::new(draw(), draw(), draw()) * sigma
}

impl Sensors {
    pub fn new(noise: NoiseParams, seed: u64) -> Self {
        Self { noise, imu_rng: stream_rng(seed, IMU_STREAM), position_rng: stream_rng(seed, POSITION_STREAM) }
    }

    pub fn noise(&self) -> &NoiseParams {
        &self.noise
    }

    /// Accelerometer reads `R⁻¹ (a - g)`; the gyro reads body rates.
    pub fn sample_imu(&mut self, t: f64, truth: &VehicleState, true_accel: &Vec3, gravity: &Vec3) -> ImuSample {
        let specific = truth.attitude.unrotate(&(true_accel - gravity));
        let accel = specific + Vec3::from(self.noise.accel_bias) + gaussian(&mut self.imu_rng, self.noise.accel_sigma);
        let gyro = truth.angular_velocity
            + Vec3::from(self.noise.gyro_bias)
            + gaussian(&mut self.imu_rng, self.noise.gyro_sigma);
        ImuSample { t, accel, gyro }
    }

    pub fn sample_position(&mut self, t: f64, truth: &VehicleState) -> PositionSample {
        let position = truth.position + gaussian(&mut self.position_rng, self.noise.position_sigma);
        let velocity = truth.velocity + gaussian(&mut self.position_rng, self.noise.velocity_sigma);
        PositionSample { t, position, velocity }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rotation;
    use proptest::prelude::*;

    const G: Vec3 = Vec3::new(0.0, 0.0, -9.81);

    #[test]
    fn hover_reads_plus_g() {
        let mut s = Sensors::new(NoiseParams::noiseless(), 0);
        let imu = s.sample_imu(0.0, &VehicleState::default(), &Vec3::zeros(), &G);
        assert_eq!(imu.accel, Vec3::new(0.0, 0.0, 9.81));
    }

    #[test]
    fn free_fall_reads_zero() {
        let mut s = Sensors::new(NoiseParams::noiseless(), 0);
        let imu = s.sample_imu(0.0, &VehicleState::default(), &G, &G);
        assert_eq!(imu.accel, Vec3::zeros());
    }

    #[test]
    fn forward_acceleration() {
        let mut s = Sensors::new(NoiseParams::noiseless(), 0);
        let imu = s.sample_imu(0.0, &VehicleState::default(), &Vec3::new(1.0, 0.0, 0.0), &G);
        assert_eq!(imu.accel, Vec3::new(1.0, 0.0, 9.81));
    }

    #[test]
    fn noiseless_inverts_exactly() {
        let mut s = Sensors::new(NoiseParams::noiseless(), 0);
        let state = VehicleState { attitude: Rotation::from_euler(0.3, -0.2, 1.1), ..Default::default() };
        let a = Vec3::new(0.4, -1.3, 2.2);
        let imu = s.sample_imu(0.0, &state, &a, &G);
        let back = state.attitude.rotate(&imu.accel) + G;
        assert!((back - a).norm() < 1e-9);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = Sensors::new(NoiseParams::default(), 11);
        let mut b = Sensors::new(NoiseParams::default(), 11);
        let mut c = Sensors::new(NoiseParams::default(), 12);
        let st = VehicleState::default();
        let mut differs = false;
        for k in 0..100 {
            let ia = a.sample_imu(k as f64, &st, &Vec3::zeros(), &G);
            let ib = b.sample_imu(k as f64, &st, &Vec3::zeros(), &G);
            let ic = c.sample_imu(k as f64, &st, &Vec3::zeros(), &G);
            assert_eq!(ia, ib);
            differs |= ia != ic;
            assert_eq!(a.sample_position(0.0, &st), b.sample_position(0.0, &st));
        }
        assert!(differs);
    }

    #[test]
    fn downsample_ratios() {
        let onboard: Vec<u32> = (0..500).collect();
        let rec = downsample(&onboard, 500, 50).unwrap();
        assert_eq!(rec.len(), 50);
        assert!(rec.iter().enumerate().all(|(i, v)| *v == 10 * i as u32));

        let pos: Vec<u32> = (0..200).collect();
        let kept = downsample(&pos, 200, 50).unwrap();
        assert_eq!(&kept[..4], &[0, 4, 8, 12]);
        assert_eq!(kept.len(), 50);

        assert_eq!(downsample(&pos, 200, 200).unwrap(), pos);
        assert_eq!(downsample(&pos, 200, 30), Err(RateError::NotDivisible { from: 200, to: 30 }));
    }

    #[test]
    fn default_schedule_is_valid() {
        let r = RateSchedule::default();
        r.validate().unwrap();
        assert_eq!(r.stride(r.onboard_hz), 2);
        assert_eq!(r.stride(r.command_hz), 20);
        let bad = RateSchedule { position_hz: 300, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn hold_after_downsample_only_repeats_source(values in proptest::collection::vec(-100i64..100, 0..300)) {
            let down = downsample(&values, 500, 50).unwrap();
            let up = upsample_hold(&down, 50, 500).unwrap();
            for v in &up {
                prop_assert!(values.contains(v));
            }
        }
    }
}
