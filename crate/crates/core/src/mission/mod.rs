//! Round-trip missions: trajectory generation, the closed-loop simulation
//! across the outbound, dwell and return stages, and tracking metrics.

mod log;
mod sim;
mod trajectory;

use std::path::PathBuf;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use log::{
    command_columns, format_f64, onboard_columns, position_columns, source, truth_columns, MissionLog, PhaseInfo, RunInfo,
    RunStatus, Table, LOG_FILES,
};
pub use sim::{run_mission, run_roundtrip, Legs};
pub use trajectory::{generate_trajectory, Leg, Trajectory, TrajectoryError, MIN_LEG_LENGTH};

use crate::control::{ControlMode, ControllerGains, GainError};
use crate::math::{FilterError, Vec3};
use crate::recorder::TrackError;
use crate::sensing::{NoiseParams, RateError, RateSchedule};
use crate::vehicle::{VehicleError, VehicleParams, Wrench};
use crate::wind::{WindError, WindField};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("invalid mission plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Gains(#[from] GainError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("feedforward return leg needs a recorded track")]
    MissingTrack,
    #[error("no {0} samples in log")]
    EmptyLeg(Stage),
    #[error("log has no column `{0}`")]
    MissingColumn(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Mission stage, in flight order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Hover at the start point before the first leg.
    Hold,
    Outbound,
    /// Hover at the target.
    Dwell,
    Return,
    /// Hover back at the origin.
    PostHold,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Hold, Stage::Outbound, Stage::Dwell, Stage::Return, Stage::PostHold];

    /// Numeric code used in log tables.
    pub fn code(self) -> f64 {
        Stage::ALL.iter().position(|s| *s == self).expect("listed stage") as f64
    }

    pub fn from_code(code: f64) -> Option<Stage> {
        Stage::ALL.iter().copied().find(|s| s.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Hold => "hold",
            Stage::Outbound => "outbound",
            Stage::Dwell => "dwell",
            Stage::Return => "return",
            Stage::PostHold => "post_hold",
        }
    }

    /// Stages flown under the return-leg controller mode.
    pub fn is_return_side(self) -> bool {
        matches!(self, Stage::Return | Stage::PostHold)
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn mode_code(mode: ControlMode) -> f64 {
    match mode {
        ControlMode::PdOnly => 0.0,
        ControlMode::Feedback => 1.0,
        ControlMode::Feedforward => 2.0,
    }
}

pub fn mode_from_code(code: f64) -> Option<ControlMode> {
    [ControlMode::PdOnly, ControlMode::Feedback, ControlMode::Feedforward].into_iter().find(|m| mode_code(*m) == code)
}

/// Observer filter settings and the lookup fallback distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct FilterSettings {
    /// Force observer low-pass time constant, s.
    pub tau_force: f64,
    /// Torque observer low-pass time constant, s.
    pub tau_torque: f64,
    /// Gyro differentiator low-pass time constant, s.
    pub tau_diff: f64,
    /// Records farther than this from the vehicle are ignored, m.
    pub fallback_distance: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self { tau_force: 0.1, tau_torque: 0.05, tau_diff: 0.01, fallback_distance: 0.5 }
    }
}

/// Where to fly and which controller mode each leg uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct MissionPlan {
    /// Point A, m.
    pub origin: [f64; 3],
    /// Point B, m.
    pub target: [f64; 3],
    /// m/s
    pub outbound_speed: f64,
    /// m/s
    pub return_speed: f64,
    /// m/s²
    pub accel_limit: f64,
    /// Hover before the first leg, s.
    pub hold: f64,
    /// Hover at B, s.
    pub dwell: f64,
    /// Hover at A after the return leg, s.
    pub post_hold: f64,
    /// Heading held throughout, rad.
    pub yaw: f64,
    pub outbound_mode: ControlMode,
    pub return_mode: ControlMode,
}

impl Default for MissionPlan {
    fn default() -> Self {
        Self {
            origin: [0.0, 0.0, 1.0],
            target: [2.0, 0.0, 1.0],
            outbound_speed: 0.1,
            return_speed: 1.0,
            accel_limit: 0.75,
            hold: 2.0,
            dwell: 2.0,
            post_hold: 1.0,
            yaw: 0.0,
            outbound_mode: ControlMode::Feedback,
            return_mode: ControlMode::Feedforward,
        }
    }
}

impl MissionPlan {
    pub fn validate(&self) -> Result<(), MissionError> {
        if self.outbound_mode == ControlMode::Feedforward {
            return Err(MissionError::Plan("feedforward is only available on the return leg".into()));
        }
        for (name, v) in [("hold", self.hold), ("dwell", self.dwell), ("post_hold", self.post_hold)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MissionError::Plan(format!("{name} must be a non-negative duration, got {v}")));
            }
        }
        generate_trajectory(&self.outbound_leg())?;
        generate_trajectory(&self.return_leg())?;
        Ok(())
    }

    pub fn outbound_leg(&self) -> Leg {
        Leg {
            from: Vec3::from(self.origin),
            to: Vec3::from(self.target),
            speed: self.outbound_speed,
            accel: self.accel_limit,
        }
    }

    pub fn return_leg(&self) -> Leg {
        Leg { speed: self.return_speed, ..self.outbound_leg() }.reversed()
    }
}

/// Constant wrench added to the aerodynamic disturbance (force world frame,
/// torque body frame).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct InjectedWrench {
    /// N
    pub force: [f64; 3],
    /// N·m
    pub torque: [f64; 3],
}

impl InjectedWrench {
    pub fn wrench(&self) -> Wrench {
        Wrench::new(Vec3::from(self.force), Vec3::from(self.torque))
    }
}

/// Everything a mission run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub vehicle: VehicleParams,
    pub field: WindField,
    pub gains: ControllerGains,
    pub rates: RateSchedule,
    pub noise: NoiseParams,
    pub filters: FilterSettings,
    pub plan: MissionPlan,
    pub injected: InjectedWrench,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "calm".into(),
            seed: 1,
            vehicle: VehicleParams::default(),
            field: WindField::Calm,
            gains: ControllerGains::default(),
            rates: RateSchedule::default(),
            noise: NoiseParams::default(),
            filters: FilterSettings::default(),
            plan: MissionPlan::default(),
            injected: InjectedWrench::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), MissionError> {
        self.vehicle.validate()?;
        self.field.validate()?;
        self.gains.validate()?;
        self.rates.validate()?;
        self.plan.validate()?;
        let f = &self.filters;
        for (name, v) in [("tau_force", f.tau_force), ("tau_torque", f.tau_torque), ("tau_diff", f.tau_diff)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MissionError::Plan(format!("filter {name} must be non-negative, got {v}")));
            }
        }
        if !(f.fallback_distance > 0.0) {
            return Err(MissionError::Plan("fallback distance must be positive".into()));
        }
        let n = &self.noise;
        if [n.accel_sigma, n.gyro_sigma, n.position_sigma, n.velocity_sigma].iter().any(|s| !(*s >= 0.0)) {
            return Err(MissionError::Plan("noise standard deviations must be non-negative".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(MissionError::Plan(format!("seed must fit in 63 bits, got {}", self.seed)));
        }
        Ok(())
    }

    /// SHA-256 of the vehicle parameter block.
    pub fn vehicle_hash(&self) -> String {
        sha256_hex(serde_json::to_string(&self.vehicle).expect("vehicle params serialize").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Subset of axes an error metric is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Axes(pub [bool; 3]);

impl Axes {
    pub const ALL: Axes = Axes([true; 3]);
    pub const X: Axes = Axes([true, false, false]);
    pub const Y: Axes = Axes([false, true, false]);
    pub const Z: Axes = Axes([false, false, true]);
}

/// Root-mean-square tracking error `‖p − p_ref‖` over the command-rate
/// samples of `stage`, restricted to `axes`.
pub fn rmse(log: &MissionLog, stage: Stage, axes: Axes) -> Result<f64, MissionError> {
    let c = &log.command;
    let stage_col = c.index_of("stage")?;
    let columns = |prefix: &str| -> Result<Vec<usize>, MissionError> {
        ["x", "y", "z"].iter().map(|a| c.index_of(&format!("{prefix}{a}_m"))).collect()
    };
    let (truth, reference) = (columns("true_p")?, columns("ref_p")?);
    let mut sum = 0.0;
    let mut n = 0usize;
    for row in c.rows().filter(|r| r[stage_col] == stage.code()) {
        for k in (0..3).filter(|k| axes.0[*k]) {
            let e = row[truth[k]] - row[reference[k]];
            sum += e * e;
        }
        n += 1;
    }
    if n == 0 {
        return Err(MissionError::EmptyLeg(stage));
    }
    Ok((sum / n as f64).sqrt())
}

/// `100 (1 − ff / fb)`.
pub fn reduction_percent(feedforward: f64, feedback: f64) -> f64 {
    100.0 * (1.0 - feedforward / feedback)
}
