//! Simulation of a multirotor that learns the wind on the way out and uses
//! it on the way back.
//!
//! On the outbound leg, force and torque observers estimate the external
//! wrench from IMU data and the commanded actuation. The estimates are
//! recorded against position. On the return leg, the recorded wrench at the
//! nearest point is fused with the live estimate and fed forward.
//!
//! * [`math`]: vectors, quaternions, first-order filters.
//! * [`vehicle`]: rigid-body quadrotor, mixer, aerodynamic drag.
//! * [`wind`]: jets, composites and time-varying fields.
//! * [`sensing`]: noisy IMU and position sampling at fixed rates.
//! * [`estimation`]: force, torque and fused observers.
//! * [`control`]: cascaded position/attitude control with compensation.
//! * [`recorder`]: disturbance tracks and nearest-record lookup.
//! * [`mission`]: round-trip simulation, logs and RMSE.
//! * [`harness`]: run configuration, presets, reports and CLI commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod estimation;
pub mod harness;
pub mod math;
pub mod mission;
pub mod recorder;
pub mod sensing;
pub mod vehicle;
pub mod wind;

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Filter(#[from] math::FilterError),
    #[error(transparent)]
    Vehicle(#[from] vehicle::VehicleError),
    #[error(transparent)]
    Wind(#[from] wind::WindError),
    #[error(transparent)]
    Rate(#[from] sensing::RateError),
    #[error(transparent)]
    Gains(#[from] control::GainError),
    #[error(transparent)]
    Track(#[from] recorder::TrackError),
    #[error(transparent)]
    Trajectory(#[from] mission::TrajectoryError),
    #[error(transparent)]
    Mission(#[from] mission::MissionError),
    #[error(transparent)]
    Config(#[from] harness::config::ConfigError),
    #[error(transparent)]
    Harness(#[from] harness::commands::HarnessError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
