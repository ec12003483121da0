//! A jet whose strength breathes ±30% with a 4 s period. The return leg
//! replays a snapshot taken at a different phase of the cycle.
//!
//! ```text
//! cargo run --release --example unsteady_flow -- runs/gusty
//! ```

use std::path::Path;

use windtrip::harness::commands::compare;
use windtrip::harness::config::RunConfig;

/// Returns the feedforward reduction, %.
pub fn run(out: &Path) -> windtrip::Result<f64> {
    let cfg = RunConfig::from_preset("gusty")?;
    let (report, _) = compare(&cfg, out)?;
    for arm in &report.arms {
        println!("{:<12} return rmse {:.4} m", arm.label, arm.return_rmse_m);
    }
    println!("reduction {:.1}% in unsteady flow", report.reduction_percent);
    Ok(report.reduction_percent)
}

fn main() -> windtrip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/unsteady_flow".into());
    run(Path::new(&out)).map(|_| ())
}
