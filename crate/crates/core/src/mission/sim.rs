//! Closed-loop multi-rate simulation of a mission.
//!
//! Per simulation step the aerodynamic wrench is evaluated at the current
//! state and held over the step. On onboard ticks the IMU is sampled, both
//! observers run, and the attitude loop issues a new motor command. On
//! command ticks the position loop runs first, the outbound leg appends a
//! record and the return leg looks up the nearest one.

use log::{debug, warn};

use super::log::{source, MissionLog, PhaseInfo, RunInfo, RunStatus, Table};
use super::{
    command_columns, generate_trajectory, mode_code, onboard_columns, position_columns, truth_columns, MissionError,
    Scenario, Stage, Trajectory,
};
use crate::control::{
    attitude_loop, compose_feedforward, feedback_compensation, position_loop, saturate_force, Compensation,
    ControlMode, Setpoint,
};
use crate::estimation::{ForceObserver, FusedEstimator, TorqueObserver};
use crate::math::Vec3;
use crate::recorder::{DisturbanceRecord, DisturbanceTrack, Lookup, TrackMetadata};
use crate::sensing::{PositionSample, Sensors, IMU_STREAM, POSITION_STREAM};
use crate::vehicle::{drag_wrench, linear_acceleration, mix, step_dynamics, unmix, MotorCommand, VehicleState};
use crate::wind::PreparedField;

/// Which part of the plan to fly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Legs {
    /// Hold, outbound, dwell, return, post-hold.
    RoundTrip,
    /// Hold at A, outbound, dwell at B. Produces a track.
    Outbound,
    /// Hold at B, return, post-hold at A. Feedforward needs a supplied track.
    Return,
    /// Hold at A only.
    Hover,
}

#[derive(Clone, Copy, Debug)]
enum Motion {
    Hold(Vec3),
    Fly(Trajectory),
}

#[derive(Clone, Copy, Debug)]
struct Phase {
    stage: Stage,
    /// First and one-past-last simulation tick.
    start: u64,
    end: u64,
    motion: Motion,
}

impl Phase {
    fn setpoint(&self, t_local: f64) -> Setpoint {
        match self.motion {
            Motion::Hold(p) => Setpoint::hold(p),
            Motion::Fly(traj) => traj.sample(t_local),
        }
    }
}

/// Stage boundaries are rounded up to whole command periods so every stage
/// starts on a command tick.
fn build_phases(scenario: &Scenario, legs: Legs) -> Result<Vec<Phase>, MissionError> {
    let plan = &scenario.plan;
    let rates = &scenario.rates;
    let out = generate_trajectory(&plan.outbound_leg())?;
    let back = generate_trajectory(&plan.return_leg())?;
    let (a, b) = (Vec3::from(plan.origin), Vec3::from(plan.target));
    let list = match legs {
        Legs::RoundTrip => vec![
            (Stage::Hold, Motion::Hold(a), plan.hold),
            (Stage::Outbound, Motion::Fly(out), out.duration()),
            (Stage::Dwell, Motion::Hold(b), plan.dwell),
            (Stage::Return, Motion::Fly(back), back.duration()),
            (Stage::PostHold, Motion::Hold(a), plan.post_hold),
        ],
        Legs::Outbound => vec![
            (Stage::Hold, Motion::Hold(a), plan.hold),
            (Stage::Outbound, Motion::Fly(out), out.duration()),
            (Stage::Dwell, Motion::Hold(b), plan.dwell),
        ],
        Legs::Return => vec![
            (Stage::Hold, Motion::Hold(b), plan.hold),
            (Stage::Return, Motion::Fly(back), back.duration()),
            (Stage::PostHold, Motion::Hold(a), plan.post_hold),
        ],
        Legs::Hover => vec![(Stage::Hold, Motion::Hold(a), plan.hold)],
    };
    let stride = rates.stride(rates.command_hz);
    let hz = rates.command_hz as f64;
    let mut phases = Vec::new();
    let mut tick = 0;
    for (stage, motion, duration) in list {
        let periods = (duration * hz - 1e-9).ceil().max(0.0) as u64;
        if periods == 0 {
            continue;
        }
        phases.push(Phase { stage, start: tick, end: tick + periods * stride, motion });
        tick += periods * stride;
    }
    Ok(phases)
}

fn start_position(phases: &[Phase]) -> Vec3 {
    match phases[0].motion {
        Motion::Hold(p) => p,
        Motion::Fly(t) => t.leg().from,
    }
}

/// Runs the full round trip; the return leg uses the track recorded on the
/// way out.
pub fn run_roundtrip(scenario: &Scenario) -> Result<MissionLog, MissionError> {
    run_mission(scenario, Legs::RoundTrip, None)
}

/// Simulates `legs` of the scenario's plan. `track` supplies the records for
/// a feedforward return flown without an outbound leg in the same run.
///
/// Invalid configuration is an error. A run that diverges still returns its
/// log, truncated and marked [`RunStatus::Diverged`].
pub fn run_mission(scenario: &Scenario, legs: Legs, track: Option<DisturbanceTrack>) -> Result<MissionLog, MissionError> {
    scenario.validate()?;
    let phases = build_phases(scenario, legs)?;
    if phases.is_empty() {
        return Err(MissionError::Plan("mission has no stages".into()));
    }
    let flies_return = phases.iter().any(|p| p.stage == Stage::Return);
    let records_outbound = phases.iter().any(|p| p.stage == Stage::Outbound);
    if flies_return && scenario.plan.return_mode == ControlMode::Feedforward && !records_outbound {
        match &track {
            Some(t) if !t.is_empty() => {
                if t.meta.vehicle_hash != scenario.vehicle_hash() {
                    warn!("track was recorded with different vehicle parameters");
                }
            }
            _ => return Err(MissionError::MissingTrack),
        }
    }
    let mut engine = Engine::new(scenario, phases, track)?;
    engine.run();
    Ok(engine.finish())
}

struct Engine<'a> {
    sc: &'a Scenario,
    field: PreparedField,
    phases: Vec<Phase>,
    sensors: Sensors,
    state: VehicleState,
    motor: MotorCommand,
    force_obs: ForceObserver,
    torque_obs: TorqueObserver,
    fused: Option<(FusedEstimator, FusedEstimator)>,
    recording: DisturbanceTrack,
    supplied: Option<DisturbanceTrack>,
    record: Option<DisturbanceRecord>,
    lookup: (f64, f64, f64),
    position: PositionSample,
    desired_force: Vec3,
    force_saturated: bool,
    compensation: Compensation,
    comp_source: f64,
    outbound_end: u64,
    early_lookups: usize,
    status: RunStatus,
    truth: Table,
    onboard: Table,
    positions: Table,
    command: Table,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario, phases: Vec<Phase>, supplied: Option<DisturbanceTrack>) -> Result<Self, MissionError> {
        let dt = sc.rates.onboard_dt();
        let f = &sc.filters;
        let start = start_position(&phases);
        let state = VehicleState::at_rest(start);
        let hover = mix(sc.vehicle.weight(), &Vec3::zeros(), &sc.vehicle).command;
        let meta = TrackMetadata {
            scenario: sc.name.clone(),
            record_hz: sc.rates.command_hz,
            rates: sc.rates.clone(),
            tau_force: f.tau_force,
            tau_torque: f.tau_torque,
            tau_diff: f.tau_diff,
            fallback_distance: f.fallback_distance,
            vehicle_hash: sc.vehicle_hash(),
            ..Default::default()
        };
        let supplied = supplied.map(|mut t| {
            t.meta.fallback_distance = f.fallback_distance;
            t
        });
        let outbound_end = phases.iter().filter(|p| p.stage == Stage::Outbound).map(|p| p.end).max().unwrap_or(0);
        Ok(Self {
            sc,
            field: PreparedField::new(sc.field.clone())?,
            sensors: Sensors::new(sc.noise.clone(), sc.seed),
            state,
            motor: hover,
            force_obs: ForceObserver::new(sc.vehicle.mass, f.tau_force, dt)?,
            torque_obs: TorqueObserver::new(sc.vehicle.inertia_vec(), f.tau_diff, f.tau_torque, dt)?,
            fused: None,
            recording: DisturbanceTrack::new(meta),
            supplied,
            record: None,
            lookup: (-1.0, f64::NAN, 0.0),
            position: PositionSample { t: 0.0, position: start, velocity: Vec3::zeros() },
            desired_force: -sc.vehicle.gravity_vector() * sc.vehicle.mass,
            force_saturated: false,
            compensation: Compensation::default(),
            comp_source: source::NONE,
            outbound_end,
            early_lookups: 0,
            status: RunStatus::Completed,
            truth: Table::new(&truth_columns()),
            onboard: Table::new(&onboard_columns()),
            positions: Table::new(&position_columns()),
            command: Table::new(&command_columns()),
            phases,
        })
    }

    fn mode(&self, stage: Stage) -> ControlMode {
        if stage.is_return_side() {
            self.sc.plan.return_mode
        } else {
            self.sc.plan.outbound_mode
        }
    }

    fn run(&mut self) {
        let sc = self.sc;
        let rates = &sc.rates;
        let onboard = rates.stride(rates.onboard_hz);
        let pos = rates.stride(rates.position_hz);
        let cmd = rates.stride(rates.command_hz);
        let sim_hz = rates.sim_hz as f64;
        let dt = rates.sim_dt();
        let total = self.phases.last().map_or(0, |p| p.end);
        let mut phase_idx = 0;
        for tick in 0..total {
            while tick >= self.phases[phase_idx].end {
                phase_idx += 1;
            }
            let phase = self.phases[phase_idx];
            let t = tick as f64 / sim_hz;
            let air = |p: &Vec3| self.field.air_velocity(p, t);
            let disturbance = drag_wrench(&self.state, air, &self.sc.vehicle) + self.sc.injected.wrench();
            self.log_truth(t, phase.stage, &disturbance.force, &disturbance.torque);

            if tick % pos == 0 {
                self.position = self.sensors.sample_position(t, &self.state);
                let (p, v) = (self.position.position, self.position.velocity);
                self.positions.push(&[t, p.x, p.y, p.z, v.x, v.y, v.z]);
            }
            if tick % onboard == 0 {
                if let Err(reason) = self.onboard_tick(tick, t, &phase, tick % cmd == 0, &disturbance) {
                    self.status = RunStatus::Diverged { t, reason };
                    break;
                }
            }
            match step_dynamics(&self.state, &self.motor, &disturbance, &self.sc.vehicle, dt) {
                Ok(next) if next.is_finite() && next.position.norm() < 1e4 => self.state = next,
                Ok(_) => {
                    self.status = RunStatus::Diverged { t, reason: "state left the finite envelope".into() };
                    break;
                }
                Err(e) => {
                    self.status = RunStatus::Diverged { t, reason: e.to_string() };
                    break;
                }
            }
        }
        if let RunStatus::Diverged { t, reason } = &self.status {
            warn!("simulation diverged at t={t} s: {reason}");
        }
    }

    fn onboard_tick(
        &mut self,
        tick: u64,
        t: f64,
        phase: &Phase,
        command_tick: bool,
        disturbance: &crate::vehicle::Wrench,
    ) -> Result<(), String> {
        let sc = self.sc;
        let params = &sc.vehicle;
        let accel = linear_acceleration(&self.state, &self.motor, disturbance, params);
        let imu = self.sensors.sample_imu(t, &self.state, &accel, &params.gravity_vector());
        let (c_sigma, tau_p) = unmix(&self.motor, params);
        let force = self.force_obs.observe(&imu.accel, &self.state.attitude, c_sigma).map_err(|e| e.to_string())?;
        let torque = self.torque_obs.observe(&imu.gyro, &tau_p).map_err(|e| e.to_string())?.estimate;
        let mode = self.mode(phase.stage);
        let setpoint = phase.setpoint((tick - phase.start) as f64 / sc.rates.sim_hz as f64);

        if command_tick && mode == ControlMode::Feedforward {
            if tick < self.outbound_end {
                self.early_lookups += 1;
            }
            let track = if self.supplied.is_some() && self.recording.is_empty() {
                self.supplied.as_ref()
            } else {
                Some(&self.recording)
            };
            let found = track.filter(|t| !t.is_empty()).map(|t| t.lookup_nearest(&self.position.position));
            let (record, lookup) = match found {
                Some(Ok(Lookup::Hit { index, distance, record })) => (Some(*record), (index as f64, distance, 0.0)),
                Some(Ok(Lookup::Fallback { index, distance })) => (None, (index as f64, distance, 1.0)),
                _ => (None, (-1.0, f64::NAN, 1.0)),
            };
            self.record = record;
            self.lookup = lookup;
        }

        let (compensation, comp_source) = match mode {
            ControlMode::PdOnly => (Compensation::default(), source::NONE),
            ControlMode::Feedback => (feedback_compensation(mode, &force.filtered, &torque.filtered), source::FEEDBACK),
            ControlMode::Feedforward => {
                let dt = sc.rates.onboard_dt();
                let f = &sc.filters;
                if self.fused.is_none() {
                    debug!("feedforward engaged at t={t} s");
                    self.fused = Some((
                        FusedEstimator::new(f.tau_force, dt, force.filtered).map_err(|e| e.to_string())?,
                        FusedEstimator::new(f.tau_torque, dt, torque.filtered).map_err(|e| e.to_string())?,
                    ));
                }
                let (ff, ft) = self.fused.as_mut().expect("created above");
                let rec = self.record;
                let fused_force =
                    ff.fuse(&force.raw, rec.as_ref().map(|r| &r.force), &force.filtered).map_err(|e| e.to_string())?;
                let fused_torque =
                    ft.fuse(&torque.raw, rec.as_ref().map(|r| &r.torque), &torque.filtered).map_err(|e| e.to_string())?;
                let c = compose_feedforward(&fused_force, &fused_torque);
                let src = if c.fallback { source::FALLBACK } else { source::FUSED };
                (c, src)
            }
        };
        self.compensation = compensation;
        self.comp_source = comp_source;

        if command_tick {
            if phase.stage == Stage::Outbound {
                self.recording
                    .append(DisturbanceRecord {
                        t,
                        position: self.position.position,
                        force: force.filtered,
                        torque: torque.filtered,
                    })
                    .map_err(|e| e.to_string())?;
            }
            let raw = position_loop(
                &self.position.position,
                &self.position.velocity,
                &setpoint,
                &self.compensation.force,
                params,
                &sc.gains,
            );
            let (limited, saturated) = saturate_force(&raw, params.max_total_thrust);
            self.desired_force = limited;
            self.force_saturated = saturated;
            self.log_command(t, phase.stage, mode, &setpoint);
        }

        let out = attitude_loop(&self.state.attitude, &imu.gyro, &self.desired_force, sc.plan.yaw, &sc.gains, params);
        let torque_cmd = out.torque - self.compensation.torque;
        let mixed = mix(out.thrust, &torque_cmd, params);
        self.motor = mixed.command;

        let mut row = Vec::with_capacity(self.onboard.width());
        row.extend([t, phase.stage.code()]);
        for v in [
            imu.accel,
            imu.gyro,
            force.raw,
            force.filtered,
            torque.raw,
            torque.filtered,
            disturbance.force,
            disturbance.torque,
            self.compensation.force,
            self.compensation.torque,
        ] {
            row.extend(v.iter());
        }
        row.extend([self.comp_source, out.thrust]);
        row.extend(torque_cmd.iter());
        row.extend(self.motor.forces);
        row.extend([mixed.saturated as u8 as f64, out.thrust_saturated as u8 as f64]);
        self.onboard.push(&row);
        Ok(())
    }

    fn log_truth(&mut self, t: f64, stage: Stage, force: &Vec3, torque: &Vec3) {
        let s = &self.state;
        let air = self.field.air_velocity(&s.position, t);
        let mut row = Vec::with_capacity(self.truth.width());
        row.extend([t, stage.code()]);
        row.extend(s.position.iter());
        row.extend(s.velocity.iter());
        row.extend(s.attitude.wxyz());
        for v in [s.angular_velocity, *force, *torque, air] {
            row.extend(v.iter());
        }
        self.truth.push(&row);
    }

    fn log_command(&mut self, t: f64, stage: Stage, mode: ControlMode, sp: &Setpoint) {
        let mut row = Vec::with_capacity(self.command.width());
        row.extend([t, stage.code(), mode_code(mode)]);
        for v in [
            sp.position,
            sp.velocity,
            sp.acceleration,
            self.position.position,
            self.state.position,
            self.desired_force,
            self.compensation.force,
        ] {
            row.extend(v.iter());
        }
        let (index, distance, fallback) = if mode == ControlMode::Feedforward { self.lookup } else { (-1.0, f64::NAN, 0.0) };
        row.extend([self.force_saturated as u8 as f64, index, distance, fallback]);
        self.command.push(&row);
    }

    fn finish(self) -> MissionLog {
        let sim_hz = self.sc.rates.sim_hz as f64;
        let seed = self.sc.seed;
        let imu = format!("imu (seed {seed}, stream {IMU_STREAM})");
        let position = format!("position (seed {seed}, stream {POSITION_STREAM})");
        let streams = vec![
            ("truth.csv".to_string(), "none".to_string()),
            ("onboard.csv".to_string(), imu.clone()),
            ("position.csv".to_string(), position.clone()),
            ("command.csv".to_string(), position.clone()),
            ("track.csv".to_string(), format!("{imu}; {position}")),
        ];
        MissionLog {
            info: RunInfo {
                scenario: self.sc.name.clone(),
                seed,
                status: self.status,
                phases: self
                    .phases
                    .iter()
                    .map(|p| PhaseInfo { stage: p.stage, start_s: p.start as f64 / sim_hz, end_s: p.end as f64 / sim_hz })
                    .collect(),
                early_lookups: self.early_lookups,
                streams,
            },
            truth: self.truth,
            onboard: self.onboard,
            position: self.positions,
            command: self.command,
            track: self.recording,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::{rmse, Axes};
    use crate::sensing::NoiseParams;

    fn short_scenario() -> Scenario {
        let mut sc = Scenario::default();
        sc.plan.target = [0.4, 0.0, 1.0];
        sc.plan.outbound_speed = 0.2;
        sc.plan.hold = 0.5;
        sc.plan.dwell = 0.5;
        sc.plan.post_hold = 0.5;
        sc
    }

    #[test]
    fn phases_align_to_command_ticks() {
        let sc = Scenario::default();
        let phases = build_phases(&sc, Legs::RoundTrip).unwrap();
        assert_eq!(phases.len(), 5);
        for p in &phases {
            assert_eq!(p.start % 20, 0);
            assert_eq!(p.end % 20, 0);
        }
        // L/v + v/a = 20 + 0.1/0.75 s, rounded up to 20.14 s.
        assert_eq!(phases[1].end - phases[1].start, 20_140);
        assert_eq!(phases[1].start, 2000);
    }

    #[test]
    fn calm_roundtrip_records_and_looks_up() {
        let sc = short_scenario();
        let log = run_roundtrip(&sc).unwrap();
        assert!(log.is_completed());
        assert_eq!(log.info.early_lookups, 0);
        let outbound_rows = log.command.column("stage").unwrap().iter().filter(|s| **s == Stage::Outbound.code()).count();
        assert_eq!(log.track.len(), outbound_rows);
        assert_eq!(log.onboard.len() * 2, log.truth.len());
        assert_eq!(log.position.len() * 5, log.truth.len());
        assert_eq!(log.command.len() * 20, log.truth.len());
        let ret = rmse(&log, Stage::Return, Axes::ALL).unwrap();
        assert!(ret < 0.05, "calm return rmse {ret}");
    }

    #[test]
    fn feedforward_return_needs_a_track() {
        let sc = short_scenario();
        assert!(matches!(run_mission(&sc, Legs::Return, None), Err(MissionError::MissingTrack)));
    }

    #[test]
    fn hover_holds_position() {
        let mut sc = Scenario { noise: NoiseParams::noiseless(), ..Default::default() };
        sc.plan.hold = 3.0;
        let log = run_mission(&sc, Legs::Hover, None).unwrap();
        let z = log.truth.column("pz_m").unwrap();
        assert!(z.iter().all(|v| (v - 1.0).abs() < 1e-6), "noiseless hover drifted");
    }

    #[test]
    fn divergence_is_reported() {
        let mut sc = short_scenario();
        sc.injected.force = [0.0, 0.0, -1e9];
        let log = run_mission(&sc, Legs::Hover, None).unwrap();
        assert!(matches!(log.info.status, RunStatus::Diverged { .. }));
        assert!(log.truth.len() < 500);
    }
}
