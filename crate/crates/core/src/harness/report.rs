//! Summaries computed from mission logs.
//!
//! Every number here is derived from the tables in one output directory, so
//! [`SummaryReport::from_dir`] on a saved run reproduces the report written
//! at the end of the run bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::ControlMode;
use crate::mission::{
    mode_from_code, reduction_percent, rmse, Axes, sha256_hex, FilterSettings, MissionError, MissionLog, RunStatus, Stage, Table,
};

/// Force estimate error below which the observer counts as settled, N.
pub const SETTLE_TOLERANCE_N: f64 = 0.01;

pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARE_FILE: &str = "compare.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegSummary {
    pub stage: Stage,
    pub mode: ControlMode,
    pub start_s: f64,
    pub end_s: f64,
    /// Command-rate samples in the stage.
    pub samples: usize,
    /// Position RMSE over all axes, m.
    pub rmse_m: f64,
    /// Per-axis position RMSE, m.
    pub rmse_axis_m: [f64; 3],
    pub max_error_m: f64,
    /// RMSE of the fused force estimate against the true disturbance, N.
    pub force_estimate_rmse_n: f64,
    pub torque_estimate_rmse_nm: f64,
    /// Time from stage start after which the force estimate error stays
    /// below [`SETTLE_TOLERANCE_N`]; `None` if it never does.
    pub force_settling_s: Option<f64>,
    pub force_saturations: usize,
    pub thrust_saturations: usize,
    pub mixer_saturations: usize,
    pub lookups: usize,
    pub fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub scenario: String,
    pub seed: u64,
    pub status: RunStatus,
    /// SHA-256 of `config.toml` in the same directory.
    pub config_hash: Option<String>,
    pub filters: Option<FilterSettings>,
    pub legs: Vec<LegSummary>,
    pub early_lookups: usize,
    pub track_records: usize,
    pub streams: Vec<(String, String)>,
}

fn err_rmse(table: &Table, rows: &[usize], a: &str, b: &str, unit: &str) -> Result<f64, MissionError> {
    let cols = |p: &str| -> Result<Vec<usize>, MissionError> {
        ["x", "y", "z"].iter().map(|k| table.index_of(&format!("{p}{k}_{unit}"))).collect()
    };
    let (ca, cb) = (cols(a)?, cols(b)?);
    if rows.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = rows
        .iter()
        .map(|&i| {
            let r = table.row(i);
            (0..3).map(|k| (r[ca[k]] - r[cb[k]]).powi(2)).sum::<f64>()
        })
        .sum();
    Ok((sum / rows.len() as f64).sqrt())
}

fn rows_in(table: &Table, stage: Stage) -> Result<Vec<usize>, MissionError> {
    let s = table.index_of("stage")?;
    Ok((0..table.len()).filter(|&i| table.row(i)[s] == stage.code()).collect())
}

fn count(table: &Table, rows: &[usize], column: &str, pred: impl Fn(f64) -> bool) -> Result<usize, MissionError> {
    let c = table.index_of(column)?;
    Ok(rows.iter().filter(|&&i| pred(table.row(i)[c])).count())
}

fn leg_summary(log: &MissionLog, stage: Stage, start_s: f64, end_s: f64) -> Result<Option<LegSummary>, MissionError> {
    let (cmd, onb) = (&log.command, &log.onboard);
    let crow = rows_in(cmd, stage)?;
    if crow.is_empty() {
        return Ok(None);
    }
    let orow = rows_in(onb, stage)?;
    let idx = |t: &Table, p: &str| -> Result<Vec<usize>, MissionError> {
        ["x", "y", "z"].iter().map(|k| t.index_of(&format!("{p}{k}_m"))).collect()
    };
    let (tp, rp) = (idx(cmd, "true_p")?, idx(cmd, "ref_p")?);
    let max_error = crow
        .iter()
        .map(|&i| {
            let r = cmd.row(i);
            (0..3).map(|k| (r[tp[k]] - r[rp[k]]).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    let rmse_axis = [rmse(log, stage, Axes::X)?, rmse(log, stage, Axes::Y)?, rmse(log, stage, Axes::Z)?];

    let force_settling_s = {
        let t = onb.index_of("t_s")?;
        let (ef, tf) = (
            ["x", "y", "z"].map(|k| onb.index_of(&format!("est_f{k}_N"))),
            ["x", "y", "z"].map(|k| onb.index_of(&format!("true_f{k}_N"))),
        );
        let (ef, tf): (Vec<usize>, Vec<usize>) =
            (ef.into_iter().collect::<Result<_, _>>()?, tf.into_iter().collect::<Result<_, _>>()?);
        let error = |i: usize| {
            let r = onb.row(i);
            (0..3).map(|k| (r[ef[k]] - r[tf[k]]).powi(2)).sum::<f64>().sqrt()
        };
        match orow.iter().rposition(|&i| !(error(i) <= SETTLE_TOLERANCE_N)) {
            None => orow.first().map(|&i| onb.row(i)[t] - start_s),
            Some(last) if last + 1 < orow.len() => Some(onb.row(orow[last + 1])[t] - start_s),
            Some(_) => None,
        }
    };

    Ok(Some(LegSummary {
        stage,
        mode: mode_from_code(cmd.row(crow[0])[cmd.index_of("mode")?])
            .ok_or_else(|| MissionError::Plan("unknown control mode code in the command log".into()))?,
        start_s,
        end_s,
        samples: crow.len(),
        rmse_m: rmse(log, stage, Axes::ALL)?,
        rmse_axis_m: rmse_axis,
        max_error_m: max_error,
        force_estimate_rmse_n: err_rmse(onb, &orow, "est_f", "true_f", "N")?,
        torque_estimate_rmse_nm: err_rmse(onb, &orow, "est_t", "true_t", "Nm")?,
        force_settling_s,
        force_saturations: count(cmd, &crow, "force_saturated", |v| v != 0.0)?,
        thrust_saturations: count(onb, &orow, "thrust_saturated", |v| v != 0.0)?,
        mixer_saturations: count(onb, &orow, "mix_saturated", |v| v != 0.0)?,
        lookups: count(cmd, &crow, "lookup_index", |v| v >= 0.0)?,
        fallbacks: count(cmd, &crow, "fallback", |v| v != 0.0)?,
    }))
}

impl SummaryReport {
    pub fn from_log(log: &MissionLog, config_hash: Option<String>, filters: Option<FilterSettings>) -> Result<Self, MissionError> {
        let mut legs = Vec::new();
        for phase in &log.info.phases {
            if let Some(leg) = leg_summary(log, phase.stage, phase.start_s, phase.end_s)? {
                legs.push(leg);
            }
        }
        Ok(Self {
            scenario: log.info.scenario.clone(),
            seed: log.info.seed,
            status: log.info.status.clone(),
            config_hash,
            filters,
            legs,
            early_lookups: log.info.early_lookups,
            track_records: log.track.len(),
            streams: log.info.streams.clone(),
        })
    }

    /// Loads the logs in `dir` and recomputes the summary.
    pub fn from_dir(dir: &Path) -> Result<Self, MissionError> {
        let log = MissionLog::load(dir)?;
        let (hash, filters) = match fs::read_to_string(dir.join(CONFIG_FILE)) {
            Ok(text) => {
                let filters = super::config::RunConfig::parse(&text).ok().map(|c| c.body.filters);
                (Some(sha256_hex(text.as_bytes())), filters)
            }
            Err(_) => (None, None),
        };
        Self::from_log(&log, hash, filters)
    }

    pub fn leg(&self, stage: Stage) -> Option<&LegSummary> {
        self.legs.iter().find(|l| l.stage == stage)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, MissionError> {
        let path = dir.join(SUMMARY_FILE);
        fs::write(&path, self.to_json()).map_err(|source| MissionError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

/// One arm of a paired comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareArm {
    pub label: String,
    pub directory: String,
    pub seed: u64,
    pub return_mode: ControlMode,
    pub return_rmse_m: f64,
    pub return_rmse_axis_m: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub scenario: String,
    pub arms: Vec<CompareArm>,
    /// Feedforward against feedback-only return RMSE, %.
    pub reduction_percent: f64,
    /// Feedback-only against the plain PD return RMSE, %.
    pub feedback_over_pd_percent: f64,
}

pub const COMPARE_ARMS: [(&str, ControlMode); 3] =
    [("pd-only", ControlMode::PdOnly), ("feedback", ControlMode::Feedback), ("feedforward", ControlMode::Feedforward)];

impl CompareReport {
    pub fn from_summaries(scenario: &str, summaries: &[(&str, &SummaryReport)]) -> Result<Self, MissionError> {
        let mut arms = Vec::new();
        for (label, s) in summaries {
            let leg = s.leg(Stage::Return).ok_or(MissionError::EmptyLeg(Stage::Return))?;
            arms.push(CompareArm {
                label: label.to_string(),
                directory: label.to_string(),
                seed: s.seed,
                return_mode: leg.mode,
                return_rmse_m: leg.rmse_m,
                return_rmse_axis_m: leg.rmse_axis_m,
            });
        }
        let rmse = |mode: ControlMode| arms.iter().find(|a| a.return_mode == mode).map(|a| a.return_rmse_m).unwrap_or(f64::NAN);
        let (pd, fb, ff) = (rmse(ControlMode::PdOnly), rmse(ControlMode::Feedback), rmse(ControlMode::Feedforward));
        Ok(Self {
            scenario: scenario.to_string(),
            reduction_percent: reduction_percent(ff, fb),
            feedback_over_pd_percent: reduction_percent(fb, pd),
            arms,
        })
    }

    /// Rebuilds the comparison from the arm subdirectories of `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, MissionError> {
        let mut loaded = Vec::new();
        for (label, _) in COMPARE_ARMS {
            loaded.push((label, SummaryReport::from_dir(&dir.join(label))?));
        }
        let scenario = loaded[0].1.scenario.clone();
        let refs: Vec<(&str, &SummaryReport)> = loaded.iter().map(|(l, s)| (*l, s)).collect();
        Self::from_summaries(&scenario, &refs)
    }

    pub fn arm(&self, mode: ControlMode) -> Option<&CompareArm> {
        self.arms.iter().find(|a| a.return_mode == mode)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes") + "\n"
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, MissionError> {
        let path = dir.join(COMPARE_FILE);
        fs::write(&path, self.to_json()).map_err(|source| MissionError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::{run_roundtrip, Scenario};

    fn short() -> Scenario {
        let mut sc = Scenario::default();
        sc.plan.target = [0.5, 0.0, 1.0];
        sc.plan.outbound_speed = 0.5;
        sc.plan.hold = 1.0;
        sc.plan.dwell = 0.5;
        sc.plan.post_hold = 0.5;
        sc
    }

    #[test]
    fn summary_matches_rmse_and_counts() {
        let log = run_roundtrip(&short()).unwrap();
        let s = SummaryReport::from_log(&log, None, None).unwrap();
        assert_eq!(s.legs.len(), 5);
        let ret = s.leg(Stage::Return).unwrap();
        assert_eq!(ret.rmse_m, crate::mission::rmse(&log, Stage::Return, crate::mission::Axes::ALL).unwrap());
        let axes_sq: f64 = ret.rmse_axis_m.iter().map(|x| x * x).sum();
        assert!((axes_sq.sqrt() - ret.rmse_m).abs() < 1e-12);
        assert_eq!(ret.mode, ControlMode::Feedforward);
        assert_eq!(ret.lookups, ret.samples);
        assert_eq!(s.leg(Stage::Outbound).unwrap().lookups, 0);
        assert_eq!(s.track_records, s.leg(Stage::Outbound).unwrap().samples);
    }

    #[test]
    fn regenerated_from_disk_is_identical() {
        let log = run_roundtrip(&short()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        log.save(dir.path()).unwrap();
        let live = SummaryReport::from_log(&log, None, None).unwrap();
        let again = SummaryReport::from_dir(dir.path()).unwrap();
        assert_eq!(live.to_json(), again.to_json());
    }

    #[test]
    fn calm_hold_settles_immediately() {
        let mut sc = short();
        sc.noise = crate::sensing::NoiseParams::noiseless();
        let log = run_roundtrip(&sc).unwrap();
        let s = SummaryReport::from_log(&log, None, None).unwrap();
        assert_eq!(s.leg(Stage::Hold).unwrap().force_settling_s, Some(0.0));
    }
}
