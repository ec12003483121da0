//! Sample the preset wind fields on the flight plane and write CSV grids.
//!
//! ```text
//! cargo run --example fieldmap -- runs/fields
//! ```

use std::path::Path;

use windtrip::harness::commands::{fieldmap, GridSpec, Plane};
use windtrip::harness::presets::preset;

/// Returns the peak speed of each field, m/s.
pub fn run(out: &Path) -> windtrip::Result<Vec<(String, f64)>> {
    std::fs::create_dir_all(out).map_err(|source| windtrip::mission::MissionError::Io { path: out.into(), source })?;
    let plane: Plane = "z=1".parse()?;
    let mut peaks = Vec::new();
    for name in ["jet", "complex", "gusty"] {
        let field = preset(name).expect("preset").field;
        let table = fieldmap(&field, plane, GridSpec::default(), 0.0)?;
        let speed = table.column("speed_mps")?;
        let (i, peak) = speed.iter().enumerate().fold((0, 0.0), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        let row = table.row(i);
        println!("{name:<8} peak {peak:.2} m/s at ({:.2}, {:.2}, {:.2}), {} points", row[0], row[1], row[2], table.len());
        table.write(&out.join(format!("{name}.csv")))?;
        peaks.push((name.to_string(), peak));
    }
    Ok(peaks)
}

fn main() -> windtrip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/fieldmap".into());
    run(Path::new(&out)).map(|_| ())
}
