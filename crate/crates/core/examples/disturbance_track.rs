//! Build a disturbance track by hand, save and reload it, and query it with
//! the exhaustive scan and the grid index.

use std::path::Path;

use windtrip::math::Vec3;
use windtrip::recorder::{DisturbanceRecord, DisturbanceTrack, GridIndex, TrackMetadata};

/// Returns the number of queries that fell back (too far from the track).
pub fn run(out: &Path) -> windtrip::Result<usize> {
    let mut track = DisturbanceTrack::new(TrackMetadata { scenario: "handmade".into(), ..Default::default() });
    for k in 0..=100 {
        let x = k as f64 * 0.02;
        // A crosswind bump centered on x = 1.
        let fy = 0.3 * (-((x - 1.0) / 0.25f64).powi(2)).exp();
        track.append(DisturbanceRecord {
            t: k as f64 * 0.02,
            position: Vec3::new(x, 0.0, 1.0),
            force: Vec3::new(0.0, fy, 0.0),
            torque: Vec3::zeros(),
        })?;
    }
    track.save(out, "handmade")?;
    let track = DisturbanceTrack::load(&out.join("handmade.csv"))?;
    let index = GridIndex::new(&track, 0.1)?;

    let mut fallbacks = 0;
    for q in [Vec3::new(1.003, 0.05, 1.0), Vec3::new(0.5, -0.1, 0.98), Vec3::new(1.0, 2.0, 1.0)] {
        let scan = track.lookup_nearest(&q)?;
        let grid = index.lookup_nearest(&q);
        assert_eq!(scan.index(), grid.index());
        match scan.record() {
            Some(r) => println!("query {:?}: record {} at {:.3} m, fy {:.4} N", q.as_slice(), scan.index(), scan.distance(), r.force.y),
            None => {
                fallbacks += 1;
                println!("query {:?}: nearest record {:.2} m away, falling back to feedback", q.as_slice(), scan.distance());
            }
        }
    }
    Ok(fallbacks)
}

fn main() -> windtrip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/disturbance_track".into());
    std::fs::create_dir_all(&out).expect("create output directory");
    run(Path::new(&out)).map(|_| ())
}
