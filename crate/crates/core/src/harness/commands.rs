//! The operations behind each CLI subcommand. Every run writes its logs,
//! a resolved `config.toml` and a `summary.json` into its own directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use super::report::{CompareReport, SummaryReport, COMPARE_ARMS, CONFIG_FILE};
use crate::math::Vec3;
use crate::mission::{run_mission, Legs, MissionError, MissionLog, RunStatus, Stage, Table};
use crate::recorder::{DisturbanceTrack, TrackError};
use crate::wind::{PreparedField, WindError, WindField};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error("simulation diverged at t = {t} s: {reason} (partial logs in {})", dir.display())]
    Diverged { dir: PathBuf, t: f64, reason: String },
    #[error("no logs found in {}", .0.display())]
    NoLogs(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write sweep table: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit status: 2 for bad input, 3 for a diverged simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Usage(_) => 2,
            HarnessError::Diverged { .. } => 3,
            _ => 1,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// A finished run and where it was written.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub log: MissionLog,
    pub summary: SummaryReport,
}

impl RunOutput {
    /// Turns a diverged run into an error; its logs stay on disk.
    pub fn completed(self) -> Result<Self, HarnessError> {
        match &self.log.info.status {
            RunStatus::Completed => Ok(self),
            RunStatus::Diverged { t, reason } => Err(HarnessError::Diverged { dir: self.dir, t: *t, reason: reason.clone() }),
        }
    }
}

/// Writes logs, the config echo and the summary into `dir`.
pub fn persist(cfg: &RunConfig, log: MissionLog, dir: &Path) -> Result<RunOutput, HarnessError> {
    log.save(dir)?;
    let config = dir.join(CONFIG_FILE);
    fs::write(&config, cfg.echo()).map_err(io(&config))?;
    let summary = SummaryReport::from_log(&log, Some(cfg.hash()), Some(cfg.body.filters.clone()))?;
    summary.write(dir)?;
    Ok(RunOutput { dir: dir.to_path_buf(), log, summary })
}

/// Which part of the mission `simulate` flies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegChoice {
    Outbound,
    Return,
    Hover,
}

impl FromStr for LegChoice {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "outbound" => Ok(LegChoice::Outbound),
            "return" => Ok(LegChoice::Return),
            "hover" => Ok(LegChoice::Hover),
            other => Err(HarnessError::Usage(format!("unknown leg `{other}` (expected outbound, return or hover)"))),
        }
    }
}

/// Flies a single leg. A feedforward return needs a track from an earlier
/// outbound run.
pub fn simulate(cfg: &RunConfig, leg: LegChoice, track: Option<&Path>, dir: &Path) -> Result<RunOutput, HarnessError> {
    let track = track.map(DisturbanceTrack::load).transpose()?;
    let legs = match leg {
        LegChoice::Outbound => Legs::Outbound,
        LegChoice::Return => Legs::Return,
        LegChoice::Hover => Legs::Hover,
    };
    let log = run_mission(&cfg.body, legs, track)?;
    persist(cfg, log, dir)?.completed()
}

pub fn roundtrip(cfg: &RunConfig, dir: &Path) -> Result<RunOutput, HarnessError> {
    let log = run_mission(&cfg.body, Legs::RoundTrip, None)?;
    persist(cfg, log, dir)?.completed()
}

/// Paired round trips that differ only in the return-leg mode, written to
/// `pd-only/`, `feedback/` and `feedforward/` under `dir`.
pub fn compare(cfg: &RunConfig, dir: &Path) -> Result<(CompareReport, Vec<RunOutput>), HarnessError> {
    let mut runs = Vec::new();
    for (label, mode) in COMPARE_ARMS {
        let mut arm = cfg.clone();
        arm.body.plan.return_mode = mode;
        runs.push(roundtrip(&arm, &dir.join(label))?);
    }
    let pairs: Vec<(&str, &SummaryReport)> = COMPARE_ARMS.iter().zip(&runs).map(|((l, _), r)| (*l, &r.summary)).collect();
    let report = CompareReport::from_summaries(&cfg.body.name, &pairs)?;
    fs::create_dir_all(dir).map_err(io(dir))?;
    let config = dir.join(CONFIG_FILE);
    fs::write(&config, cfg.echo()).map_err(io(&config))?;
    report.write(dir)?;
    Ok((report, runs))
}

/// An axis-aligned sampling plane such as `z=1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub axis: usize,
    pub offset: f64,
}

impl Plane {
    /// The two in-plane axes, in x, y, z order.
    pub fn in_plane(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }
}

impl FromStr for Plane {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::Usage(format!("plane must look like `z=1`, got `{s}`"));
        let (axis, value) = s.split_once('=').ok_or_else(bad)?;
        let axis = match axis.trim() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return Err(bad()),
        };
        let offset: f64 = value.trim().parse().map_err(|_| bad())?;
        if !offset.is_finite() {
            return Err(bad());
        }
        Ok(Plane { axis, offset })
    }
}

/// Extent and spacing of a field map, applied to both in-plane axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min: -0.5, max: 2.5, step: 0.05 }
    }
}

pub const FIELDMAP_COLUMNS: [&str; 7] = ["x_m", "y_m", "z_m", "u_mps", "v_mps", "w_mps", "speed_mps"];

/// Samples `field` at time `t` on a square grid in `plane`.
pub fn fieldmap(field: &WindField, plane: Plane, grid: GridSpec, t: f64) -> Result<Table, HarnessError> {
    if !(grid.step > 0.0 && grid.max >= grid.min && grid.min.is_finite() && grid.max.is_finite()) {
        return Err(HarnessError::Usage(format!("bad grid {}..{} step {}", grid.min, grid.max, grid.step)));
    }
    let prepared = PreparedField::new(field.clone())?;
    let n = ((grid.max - grid.min) / grid.step + 1e-9).floor() as usize + 1;
    let [a, b] = plane.in_plane();
    let mut table = Table::new(&FIELDMAP_COLUMNS);
    for i in 0..n {
        for j in 0..n {
            let mut p = Vec3::zeros();
            p[plane.axis] = plane.offset;
            p[a] = grid.min + i as f64 * grid.step;
            p[b] = grid.min + j as f64 * grid.step;
            let v = prepared.air_velocity(&p, t);
            table.push(&[p.x, p.y, p.z, v.x, v.y, v.z, v.norm()]);
        }
    }
    Ok(table)
}

/// Seed for sweep case `index`, drawn from its own ChaCha stream of
/// `master`. Kept to 63 bits so it fits a TOML integer.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64() >> 1
}

/// One row of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCase {
    pub index: usize,
    pub value: String,
    pub seed: u64,
    pub directory: String,
    pub status: String,
    pub outbound_rmse_m: Option<f64>,
    pub return_rmse_m: Option<f64>,
    pub return_force_estimate_rmse_n: Option<f64>,
}

/// Round trips with `param` set to each of `values`, run on `workers`
/// threads. Case `i` uses seed `derive_seed(cfg.seed, i)`. Diverged cases
/// are reported in the table rather than aborting the sweep.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[String], workers: usize, dir: &Path) -> Result<Vec<SweepCase>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Usage("sweep needs at least one value".into()));
    }
    let mut configs = Vec::with_capacity(values.len());
    for (i, raw) in values.iter().enumerate() {
        let mut c = cfg.set(param, raw)?;
        c.body.seed = derive_seed(cfg.body.seed, i as u64);
        configs.push(c);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start worker pool: {e}")))?;
    let cases: Result<Vec<SweepCase>, HarnessError> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let name = format!("case_{i:03}");
                let log = run_mission(&c.body, Legs::RoundTrip, None)?;
                let out = persist(c, log, &dir.join(&name))?;
                let rmse = |s: Stage| out.summary.leg(s).map(|l| l.rmse_m);
                Ok(SweepCase {
                    index: i,
                    value: values[i].clone(),
                    seed: c.body.seed,
                    directory: name,
                    status: match &out.log.info.status {
                        RunStatus::Completed => "completed".into(),
                        RunStatus::Diverged { t, .. } => format!("diverged at {t} s"),
                    },
                    outbound_rmse_m: rmse(Stage::Outbound),
                    return_rmse_m: rmse(Stage::Return),
                    return_force_estimate_rmse_n: out.summary.leg(Stage::Return).map(|l| l.force_estimate_rmse_n),
                })
            })
            .collect()
    });
    let cases = cases?;
    let path = dir.join("sweep.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    for case in &cases {
        writer.serialize(case)?;
    }
    writer.flush().map_err(io(&path))?;
    let config = dir.join(CONFIG_FILE);
    fs::write(&config, cfg.echo()).map_err(io(&config))?;
    Ok(cases)
}

fn run_dirs(root: &Path, found: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    if root.join("run.json").is_file() {
        found.push(root.to_path_buf());
    }
    let mut children: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    for child in children {
        run_dirs(&child, found)?;
    }
    Ok(())
}

/// Rewrites `summary.json` (and `compare.json` for comparison directories)
/// from the logs found under `dir`. Returns the files written.
pub fn report(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if !dir.is_dir() {
        return Err(HarnessError::NoLogs(dir.to_path_buf()));
    }
    let mut runs = Vec::new();
    run_dirs(dir, &mut runs)?;
    if runs.is_empty() {
        return Err(HarnessError::NoLogs(dir.to_path_buf()));
    }
    let mut written = Vec::new();
    for run in &runs {
        written.push(SummaryReport::from_dir(run)?.write(run)?);
    }
    let mut compares = Vec::new();
    for run in &runs {
        if let Some(parent) = run.parent() {
            let paired = COMPARE_ARMS.iter().all(|(label, _)| parent.join(label).join("run.json").is_file());
            if paired && !compares.contains(&parent.to_path_buf()) {
                compares.push(parent.to_path_buf());
            }
        }
    }
    for c in compares {
        written.push(CompareReport::from_dir(&c)?.write(&c)?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> RunConfig {
        let mut cfg = RunConfig::from_preset("jet").unwrap();
        cfg.body.plan.outbound_speed = 0.5;
        cfg.body.plan.hold = 1.0;
        cfg.body.plan.dwell = 0.5;
        cfg.body.plan.post_hold = 0.5;
        cfg
    }

    #[test]
    fn plane_parsing() {
        assert_eq!("z=1".parse::<Plane>().unwrap(), Plane { axis: 2, offset: 1.0 });
        assert_eq!("y = -0.5".parse::<Plane>().unwrap().in_plane(), [0, 2]);
        assert!("w=1".parse::<Plane>().is_err());
        assert!("z".parse::<Plane>().is_err());
    }

    #[test]
    fn jet_fieldmap_peaks_at_reference_speed() {
        let cfg = RunConfig::from_preset("jet").unwrap();
        let table = fieldmap(&cfg.body.field, "z=1".parse().unwrap(), GridSpec::default(), 0.0).unwrap();
        assert_eq!(table.len(), 61 * 61);
        let speed = table.column("speed_mps").unwrap();
        let max = speed.iter().cloned().fold(0.0, f64::max);
        assert!((max - 6.0).abs() < 1e-9, "{max}");
        assert!(table.column("z_m").unwrap().iter().all(|z| *z == 1.0));
    }

    #[test]
    fn derived_seeds_differ_and_repeat() {
        let a: Vec<u64> = (0..8).map(|i| derive_seed(1, i)).collect();
        let b: Vec<u64> = (0..8).map(|i| derive_seed(1, i)).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
        assert_ne!(derive_seed(2, 0), a[0]);
    }

    #[test]
    fn roundtrip_then_report_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let out = roundtrip(&short(), dir.path()).unwrap();
        let before = fs::read(dir.path().join("summary.json")).unwrap();
        assert_eq!(before, out.summary.to_json().into_bytes());
        let written = report(dir.path()).unwrap();
        assert_eq!(written.len(), 1);
        assert_eq!(fs::read(dir.path().join("summary.json")).unwrap(), before);
        let echoed = RunConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(echoed.body, short().body);
    }

    #[test]
    fn report_on_empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let err = report(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no logs found"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn sweep_writes_one_row_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let values = vec!["0.05".to_string(), "0.2".to_string()];
        let cases = sweep(&short(), "filters.tau_force", &values, 2, dir.path()).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[1].seed, derive_seed(1, 1));
        let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        let again = RunConfig::load(&dir.path().join("case_001").join(CONFIG_FILE)).unwrap();
        assert_eq!(again.body.filters.tau_force, 0.2);
    }
}
