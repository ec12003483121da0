//! Position-keyed disturbance recording and nearest-record retrieval.
//!
//! The outbound leg appends one [`DisturbanceRecord`] per record tick. The
//! return leg asks for the record closest to the current position with a
//! linear scan over the whole track. A uniform-grid index is available for
//! large synthetic tracks and returns exactly the same answers.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{is_finite, Vec3};
use crate::sensing::RateSchedule;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("record at t={t} s does not follow the last timestamp {last} s")]
    OutOfOrder { t: f64, last: f64 },
    #[error("record at t={0} s has non-finite values")]
    NonFinite(f64),
    #[error("track is empty")]
    Empty,
    #[error("track file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisturbanceRecord {
    /// s
    pub t: f64,
    /// World frame, m.
    pub position: Vec3,
    /// World frame, N.
    pub force: Vec3,
    /// Body frame, N·m.
    pub torque: Vec3,
}

impl DisturbanceRecord {
    fn values(&self) -> [f64; 10] {
        let (p, f, q) = (&self.position, &self.force, &self.torque);
        [self.t, p.x, p.y, p.z, f.x, f.y, f.z, q.x, q.y, q.z]
    }
}

/// Settings the track was recorded under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackMetadata {
    pub scenario: String,
    pub record_hz: u32,
    pub rates: RateSchedule,
    pub tau_force: f64,
    pub tau_torque: f64,
    pub tau_diff: f64,
    /// Queries farther than this from every record fall back to feedback, m.
    pub fallback_distance: f64,
    /// SHA-256 of the vehicle parameter block the track was recorded with.
    pub vehicle_hash: String,
    pub units: BTreeMap<String, String>,
}

impl Default for TrackMetadata {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            record_hz: 50,
            rates: RateSchedule::default(),
            tau_force: 0.1,
            tau_torque: 0.05,
            tau_diff: 0.01,
            fallback_distance: 0.5,
            vehicle_hash: String::new(),
            units: default_units(),
        }
    }
}

fn default_units() -> BTreeMap<String, String> {
    [("t", "s"), ("px", "m"), ("py", "m"), ("pz", "m"), ("fx", "N"), ("fy", "N"), ("fz", "N"), ("tx", "N m"), ("ty", "N m"), ("tz", "N m")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub const TRACK_COLUMNS: [&str; 10] = ["t", "px", "py", "pz", "fx", "fy", "fz", "tx", "ty", "tz"];

/// Result of a nearest-record query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lookup<'a> {
    Hit { index: usize, distance: f64, record: &'a DisturbanceRecord },
    /// Nearest record is beyond the fallback distance.
    Fallback { index: usize, distance: f64 },
}

impl<'a> Lookup<'a> {
    pub fn index(&self) -> usize {
        match self {
            Lookup::Hit { index, .. } | Lookup::Fallback { index, .. } => *index,
        }
    }

    pub fn distance(&self) -> f64 {
        match self {
            Lookup::Hit { distance, .. } | Lookup::Fallback { distance, .. } => *distance,
        }
    }

    pub fn record(&self) -> Option<&'a DisturbanceRecord> {
        match self {
            Lookup::Hit { record, .. } => Some(record),
            Lookup::Fallback { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DisturbanceTrack {
    records: Vec<DisturbanceRecord>,
    pub meta: TrackMetadata,
}

impl DisturbanceTrack {
    pub fn new(meta: TrackMetadata) -> Self {
        Self { records: Vec::new(), meta }
    }

    pub fn records(&self) -> &[DisturbanceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn append(&mut self, record: DisturbanceRecord) -> Result<(), TrackError> {
        if !(record.t.is_finite() && is_finite(&record.position) && is_finite(&record.force) && is_finite(&record.torque)) {
            return Err(TrackError::NonFinite(record.t));
        }
        if let Some(last) = self.records.last() {
            if !(record.t > last.t) {
                return Err(TrackError::OutOfOrder { t: record.t, last: last.t });
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Nearest record by Euclidean distance, scanning every record. Ties go
    /// to the lowest index.
    pub fn lookup_nearest(&self, query: &Vec3) -> Result<Lookup<'_>, TrackError> {
        let (index, d2) = nearest_linear(&self.records, query).ok_or(TrackError::Empty)?;
        Ok(self.classify(index, d2))
    }

    fn classify(&self, index: usize, d2: f64) -> Lookup<'_> {
        let distance = d2.sqrt();
        if distance > self.meta.fallback_distance {
            Lookup::Fallback { index, distance }
        } else {
            Lookup::Hit { index, distance, record: &self.records[index] }
        }
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), TrackError> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let file = File::create(&csv_path).map_err(|source| TrackError::Io { path: csv_path.clone(), source })?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(TRACK_COLUMNS)?;
        for r in &self.records {
            writer.write_record(r.values().iter().map(|v| crate::mission::format_f64(*v)))?;
        }
        writer.flush().map_err(|source| TrackError::Io { path: csv_path.clone(), source })?;

        let json_path = dir.join(format!("{stem}.json"));
        let mut file = BufWriter::new(File::create(&json_path).map_err(|source| TrackError::Io { path: json_path.clone(), source })?);
        serde_json::to_writer_pretty(&mut file, &self.meta)?;
        file.write_all(b"\n").map_err(|source| TrackError::Io { path: json_path, source })?;
        Ok(())
    }

    /// Loads a track from its CSV file; the metadata sidecar is read from the
    /// same path with a `.json` extension.
    pub fn load(csv_path: &Path) -> Result<Self, TrackError> {
        let format_err = |message: String| TrackError::Format { path: csv_path.to_path_buf(), message };
        let json_path = csv_path.with_extension("json");
        let meta_file = File::open(&json_path).map_err(|source| TrackError::Io { path: json_path.clone(), source })?;
        let meta: TrackMetadata = serde_json::from_reader(BufReader::new(meta_file))?;

        let file = File::open(csv_path).map_err(|source| TrackError::Io { path: csv_path.to_path_buf(), source })?;
        let mut reader = csv::Reader::from_reader(BufReader::new(file));
        let header = reader.headers()?.clone();
        if header.iter().ne(TRACK_COLUMNS) {
            return Err(format_err(format!("expected columns {TRACK_COLUMNS:?}, found {header:?}")));
        }
        let mut track = DisturbanceTrack::new(meta);
        for (line, row) in reader.records().enumerate() {
            let row = row?;
            let v: Vec<f64> = row
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format_err(format!("row {}: {e}", line + 1)))?;
            if v.len() != TRACK_COLUMNS.len() {
                return Err(format_err(format!("row {} has {} fields", line + 1, v.len())));
            }
            track.append(DisturbanceRecord {
                t: v[0],
                position: Vec3::new(v[1], v[2], v[3]),
                force: Vec3::new(v[4], v[5], v[6]),
                torque: Vec3::new(v[7], v[8], v[9]),
            })?;
        }
        Ok(track)
    }
}

/// Index and squared distance of the nearest record, lowest index on ties.
pub fn nearest_linear(records: &[DisturbanceRecord], query: &Vec3) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        let d2 = (r.position - query).norm_squared();
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best
}

type Cell = (i64, i64, i64);

/// Uniform grid over record positions. Queries visit cells in growing
/// Chebyshev rings until no unvisited cell can hold a closer record.
#[derive(Clone, Debug)]
pub struct GridIndex<'a> {
    track: &'a DisturbanceTrack,
    cell_size: f64,
    cells: HashMap<Cell, Vec<usize>>,
    lo: Cell,
    hi: Cell,
}

impl<'a> GridIndex<'a> {
    pub fn new(track: &'a DisturbanceTrack, cell_size: f64) -> Result<Self, TrackError> {
        if track.is_empty() {
            return Err(TrackError::Empty);
        }
        assert!(cell_size > 0.0, "cell size must be positive");
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, r) in track.records().iter().enumerate() {
            let c = cell_of(&r.position, cell_size);
            lo = (lo.0.min(c.0), lo.1.min(c.1), lo.2.min(c.2));
            hi = (hi.0.max(c.0), hi.1.max(c.1), hi.2.max(c.2));
            cells.entry(c).or_default().push(i);
        }
        Ok(Self { track, cell_size, cells, lo, hi })
    }

    pub fn lookup_nearest(&self, query: &Vec3) -> Lookup<'a> {
        let q = cell_of(query, self.cell_size);
        let reach = [q.0 - self.lo.0, self.hi.0 - q.0, q.1 - self.lo.1, self.hi.1 - q.1, q.2 - self.lo.2, self.hi.2 - q.2]
            .into_iter()
            .map(i64::abs)
            .max()
            .unwrap_or(0);
        let records = self.track.records();
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=reach {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let Some(indices) = self.cells.get(&(q.0 + dx, q.1 + dy, q.2 + dz)) else { continue };
                        for &i in indices {
                            let d2 = (records[i].position - query).norm_squared();
                            let better = match best {
                                None => true,
                                Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
                            };
                            if better {
                                best = Some((i, d2));
                            }
                        }
                    }
                }
            }
            if let Some((_, d2)) = best {
                // Cells in later rings are at least `ring * cell_size` away.
                let bound = ring as f64 * self.cell_size;
                if d2.sqrt() < bound {
                    break;
                }
            }
        }
        let (index, d2) = best.expect("non-empty track");
        self.track.classify(index, d2)
    }
}

fn cell_of(p: &Vec3, size: f64) -> Cell {
    ((p.x / size).floor() as i64, (p.y / size).floor() as i64, (p.z / size).floor() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(t: f64, p: [f64; 3]) -> DisturbanceRecord {
        DisturbanceRecord { t, position: Vec3::from(p), force: Vec3::new(t, 0.0, 0.0), torque: Vec3::zeros() }
    }

    #[test]
    fn append_counts_and_order() {
        let mut track = DisturbanceTrack::default();
        track.append(rec(0.0, [0.0; 3])).unwrap();
        assert_eq!(track.len(), 1);
        assert!(matches!(track.append(rec(0.0, [1.0, 0.0, 0.0])), Err(TrackError::OutOfOrder { .. })));
        assert!(matches!(track.append(rec(-1.0, [1.0, 0.0, 0.0])), Err(TrackError::OutOfOrder { .. })));
        assert_eq!(track.len(), 1);

        let mut long = DisturbanceTrack::default();
        for k in 0..(25 * 50) {
            long.append(rec(k as f64 / 50.0, [k as f64 * 0.002, 0.0, 1.0])).unwrap();
        }
        assert_eq!(long.len(), 1250);
    }

    #[test]
    fn non_finite_rejected() {
        let mut track = DisturbanceTrack::default();
        assert!(matches!(track.append(rec(0.0, [f64::NAN, 0.0, 0.0])), Err(TrackError::NonFinite(_))));
    }

    #[test]
    fn empty_lookup_errors() {
        assert!(matches!(DisturbanceTrack::default().lookup_nearest(&Vec3::zeros()), Err(TrackError::Empty)));
    }

    #[test]
    fn exact_match_and_ties() {
        let mut track = DisturbanceTrack::default();
        track.append(rec(0.0, [1.0, 0.0, 0.0])).unwrap();
        track.append(rec(1.0, [-1.0, 0.0, 0.0])).unwrap();
        track.append(rec(2.0, [0.0, 3.0, 0.0])).unwrap();
        let hit = track.lookup_nearest(&Vec3::new(0.0, 3.0, 0.0)).unwrap();
        assert_eq!(hit.index(), 2);
        assert_eq!(hit.distance(), 0.0);
        assert_eq!(hit.record().unwrap().t, 2.0);
        // Equidistant from records 0 and 1.
        let tie = track.lookup_nearest(&Vec3::new(0.0, 0.0, 0.4)).unwrap();
        assert_eq!(tie.index(), 0);
    }

    #[test]
    fn far_query_falls_back() {
        let mut track = DisturbanceTrack::default();
        track.append(rec(0.0, [0.0; 3])).unwrap();
        let out = track.lookup_nearest(&Vec3::new(0.0, 0.6, 0.0)).unwrap();
        assert!(matches!(out, Lookup::Fallback { index: 0, .. }));
        assert!(out.record().is_none());
        let near = track.lookup_nearest(&Vec3::new(0.0, 0.4, 0.0)).unwrap();
        assert!(near.record().is_some());
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut track = DisturbanceTrack::new(TrackMetadata { scenario: "unit".into(), ..Default::default() });
        for k in 0..300 {
            track
                .append(DisturbanceRecord {
                    t: k as f64 * 0.02,
                    position: Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                    force: Vec3::new(rng.gen::<f64>() * 1e-3, -rng.gen::<f64>(), 1e-300),
                    torque: Vec3::new(rng.gen::<f64>() * 1e-5, 0.0, -0.0),
                })
                .unwrap();
        }
        track.save(dir.path(), "track").unwrap();
        let back = DisturbanceTrack::load(&dir.path().join("track.csv")).unwrap();
        assert_eq!(back, track);
        for (a, b) in back.records().iter().zip(track.records()) {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn load_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        DisturbanceTrack::default().save(dir.path(), "track").unwrap();
        std::fs::write(dir.path().join("track.csv"), "t,x\n0,1\n").unwrap();
        assert!(matches!(DisturbanceTrack::load(&dir.path().join("track.csv")), Err(TrackError::Format { .. })));
    }

    #[test]
    fn grid_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut track = DisturbanceTrack::new(TrackMetadata { fallback_distance: 0.3, ..Default::default() });
        for k in 0..2000 {
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.0..1.0)];
            track.append(rec(k as f64, p)).unwrap();
        }
        // Duplicate positions exercise the tie rule.
        let dup = track.records()[17].position;
        track.append(DisturbanceRecord { t: 5000.0, position: dup, force: Vec3::zeros(), torque: Vec3::zeros() }).unwrap();
        let grid = GridIndex::new(&track, 0.25).unwrap();
        for _ in 0..500 {
            let q = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..2.0));
            assert_eq!(grid.lookup_nearest(&q), track.lookup_nearest(&q).unwrap());
        }
        assert_eq!(grid.lookup_nearest(&dup).index(), 17);
    }

    proptest! {
        #[test]
        fn nearest_is_no_farther_than_any_record(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..40),
            q in (-6.0f64..6.0, -6.0f64..6.0, -6.0f64..6.0),
        ) {
            let mut track = DisturbanceTrack::default();
            for (i, p) in pts.iter().enumerate() {
                track.append(rec(i as f64, [p.0, p.1, p.2])).unwrap();
            }
            let q = Vec3::new(q.0, q.1, q.2);
            let out = track.lookup_nearest(&q).unwrap();
            let first = track.lookup_nearest(&q).unwrap();
            prop_assert_eq!(out, first);
            for r in track.records() {
                prop_assert!(out.distance() <= (r.position - q).norm());
            }
        }
    }
}
