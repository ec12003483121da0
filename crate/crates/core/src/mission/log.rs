//! Mission logs: one numeric table per rate group plus run metadata.
//!
//! Every cell is an `f64` written with the shortest representation that
//! parses back to the same bits, so logs reload exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MissionError, Stage};
use crate::recorder::DisturbanceTrack;

/// Appends the shortest text that parses back to `v` exactly, switching to
/// exponent form for very small or very large magnitudes.
pub fn write_f64(out: &mut String, v: f64) {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        write!(out, "{v:e}").expect("writing to a String");
    } else {
        write!(out, "{v}").expect("writing to a String");
    }
}

pub fn format_f64(v: f64) -> String {
    let mut s = String::new();
    write_f64(&mut s, v);
    s
}

/// Column-named numeric table stored row-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    data: Vec<f64>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), data: Vec::new() }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.data.len() / self.columns.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width(), "row width does not match the header");
        self.data.extend_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width()..(i + 1) * self.width()]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width().max(1))
    }

    pub fn index_of(&self, name: &str) -> Result<usize, MissionError> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| MissionError::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, MissionError> {
        let i = self.index_of(name)?;
        Ok(self.rows().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 12);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in self.rows() {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_f64(&mut out, *v);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("missing header")?;
        let mut table = Table::new(&header.split(',').collect::<Vec<_>>());
        for (n, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("line {}: {e}", n + 2))?;
            if row.len() != table.width() {
                return Err(format!("line {}: expected {} fields, found {}", n + 2, table.width(), row.len()));
            }
            table.data.extend(row);
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<(), MissionError> {
        fs::write(path, self.to_csv()).map_err(|source| MissionError::Io { path: path.to_path_buf(), source })
    }

    pub fn read(path: &Path) -> Result<Self, MissionError> {
        let text = fs::read_to_string(path).map_err(|source| MissionError::Io { path: path.to_path_buf(), source })?;
        Table::from_csv(&text).map_err(|message| MissionError::Parse { path: path.to_path_buf(), message })
    }
}

pub fn xyz(prefix: &str, unit: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}{a}_{unit}"))
}

fn columns(groups: &[&[String]]) -> Vec<String> {
    groups.iter().flat_map(|g| g.iter().cloned()).collect()
}

pub fn truth_columns() -> Vec<String> {
    columns(&[
        &["t_s".into(), "stage".into()],
        &xyz("p", "m"),
        &xyz("v", "mps"),
        &["qw".into(), "qx".into(), "qy".into(), "qz".into()],
        &xyz("w", "radps"),
        &xyz("dist_f", "N"),
        &xyz("dist_t", "Nm"),
        &xyz("air_", "mps"),
    ])
}

pub fn onboard_columns() -> Vec<String> {
    columns(&[
        &["t_s".into(), "stage".into()],
        &xyz("acc_", "mps2"),
        &xyz("gyr_", "radps"),
        &xyz("raw_f", "N"),
        &xyz("est_f", "N"),
        &xyz("raw_t", "Nm"),
        &xyz("est_t", "Nm"),
        &xyz("true_f", "N"),
        &xyz("true_t", "Nm"),
        &xyz("comp_f", "N"),
        &xyz("comp_t", "Nm"),
        &["comp_source".into(), "thrust_N".into()],
        &xyz("cmd_t", "Nm"),
        &["m1_N".into(), "m2_N".into(), "m3_N".into(), "m4_N".into()],
        &["mix_saturated".into(), "thrust_saturated".into()],
    ])
}

pub fn position_columns() -> Vec<String> {
    columns(&[&["t_s".into()], &xyz("p", "m"), &xyz("v", "mps")])
}

pub fn command_columns() -> Vec<String> {
    columns(&[
        &["t_s".into(), "stage".into(), "mode".into()],
        &xyz("ref_p", "m"),
        &xyz("ref_v", "mps"),
        &xyz("ref_a", "mps2"),
        &xyz("meas_p", "m"),
        &xyz("true_p", "m"),
        &xyz("fdes_", "N"),
        &xyz("comp_f", "N"),
        &["force_saturated".into(), "lookup_index".into(), "lookup_distance_m".into(), "fallback".into()],
    ])
}

/// Source of the compensation in the onboard log `comp_source` column.
pub mod source {
    pub const NONE: f64 = 0.0;
    pub const FEEDBACK: f64 = 1.0;
    pub const FUSED: f64 = 2.0;
    pub const FALLBACK: f64 = 3.0;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { t: f64, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseInfo {
    pub stage: Stage,
    pub start_s: f64,
    pub end_s: f64,
}

/// Run metadata written next to the tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub scenario: String,
    pub seed: u64,
    pub status: RunStatus,
    pub phases: Vec<PhaseInfo>,
    /// Return-leg lookups issued before the outbound leg finished; always 0.
    pub early_lookups: usize,
    /// Random stream behind each emitted file.
    pub streams: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissionLog {
    pub info: RunInfo,
    /// Simulation rate: ground truth state and disturbance.
    pub truth: Table,
    /// Onboard rate: IMU, estimates, compensation, motors.
    pub onboard: Table,
    /// Position-measurement rate.
    pub position: Table,
    /// Command rate: references, measurements, desired force, lookups.
    pub command: Table,
    /// Records taken on the outbound leg (empty if none was flown).
    pub track: DisturbanceTrack,
}

pub const LOG_FILES: [&str; 4] = ["truth.csv", "onboard.csv", "position.csv", "command.csv"];

impl MissionLog {
    pub fn is_completed(&self) -> bool {
        self.info.status == RunStatus::Completed
    }

    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>, MissionError> {
        fs::create_dir_all(dir).map_err(|source| MissionError::Io { path: dir.to_path_buf(), source })?;
        let mut written = Vec::new();
        for (name, table) in LOG_FILES.iter().zip([&self.truth, &self.onboard, &self.position, &self.command]) {
            let path = dir.join(name);
            table.write(&path)?;
            written.push(path);
        }
        self.track.save(dir, "track")?;
        written.push(dir.join("track.csv"));
        written.push(dir.join("track.json"));
        let info = dir.join("run.json");
        let text = serde_json::to_string_pretty(&self.info)? + "\n";
        fs::write(&info, text).map_err(|source| MissionError::Io { path: info.clone(), source })?;
        written.push(info);
        Ok(written)
    }

    pub fn load(dir: &Path) -> Result<Self, MissionError> {
        let info_path = dir.join("run.json");
        let text = fs::read_to_string(&info_path).map_err(|source| MissionError::Io { path: info_path, source })?;
        let info: RunInfo = serde_json::from_str(&text)?;
        let table = |name: &str| Table::read(&dir.join(name));
        Ok(Self {
            info,
            truth: table(LOG_FILES[0])?,
            onboard: table(LOG_FILES[1])?,
            position: table(LOG_FILES[2])?,
            command: table(LOG_FILES[3])?,
            track: DisturbanceTrack::load(&dir.join("track.csv"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(&[0.1 + 0.2, -0.0, f64::NAN]);
        t.push(&[1e-310, f64::INFINITY, 123456789.12345679]);
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.columns(), t.columns());
        for (a, b) in back.rows().flatten().zip(t.rows().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn tiny_values_use_exponent_form() {
        assert_eq!(format_f64(5.1e-51), "5.1e-51");
        assert_eq!(format_f64(0.25), "0.25");
        assert_eq!(format_f64(-3.0), "-3");
        assert_eq!(format_f64(0.0), "0");
    }

    proptest::proptest! {
        #[test]
        fn any_finite_value_reloads_exactly(bits in proptest::prelude::any::<u64>()) {
            let v = f64::from_bits(bits);
            proptest::prop_assume!(v.is_finite());
            proptest::prop_assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), bits);
        }
    }

    #[test]
    fn column_lookup() {
        let mut t = Table::new(&["x", "y"]);
        t.push(&[1.0, 2.0]);
        t.push(&[3.0, 4.0]);
        assert_eq!(t.column("y").unwrap(), vec![2.0, 4.0]);
        assert!(matches!(t.column("z"), Err(MissionError::MissingColumn(_))));
        assert_eq!(t.len(), 2);
        assert_eq!(t.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Table::from_csv("a,b\n1,2\n3\n").is_err());
        assert!(Table::from_csv("a\nfoo\n").is_err());
    }

    #[test]
    fn headers_have_units() {
        for cols in [truth_columns(), onboard_columns(), position_columns(), command_columns()] {
            let unique: std::collections::HashSet<_> = cols.iter().collect();
            assert_eq!(unique.len(), cols.len());
        }
        assert_eq!(onboard_columns().len(), 2 + 3 * 10 + 2 + 3 + 4 + 2);
    }
}
