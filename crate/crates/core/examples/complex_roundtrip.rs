//! The same paired comparison in a harder flow: the jet with a blocked
//! nozzle quadrant and boundary turbulence, plus an upward floor fan.
//!
//! ```text
//! cargo run --release --example complex_roundtrip -- runs/complex
//! ```

use std::path::Path;

use windtrip::harness::commands::compare;
use windtrip::harness::config::RunConfig;
use windtrip::harness::report::CompareReport;

pub fn run(out: &Path) -> windtrip::Result<CompareReport> {
    let cfg = RunConfig::from_preset("complex")?;
    let (report, _) = compare(&cfg, out)?;
    for arm in &report.arms {
        let [x, y, z] = arm.return_rmse_axis_m;
        println!("{:<12} return rmse {:.4} m  (x {x:.4}, y {y:.4}, z {z:.4})", arm.label, arm.return_rmse_m);
    }
    println!("reduction {:.1}%", report.reduction_percent);
    Ok(report)
}

fn main() -> windtrip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/complex_roundtrip".into());
    run(Path::new(&out)).map(|_| ())
}
