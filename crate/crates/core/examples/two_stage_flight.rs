//! Record on one flight, replay on another: fly only the outbound leg, keep
//! its `track.csv`, then fly the return leg from that file.
//!
//! ```text
//! cargo run --release --example two_stage_flight -- runs/two_stage
//! ```

use std::path::Path;

use windtrip::harness::commands::{simulate, LegChoice};
use windtrip::harness::config::RunConfig;
use windtrip::mission::Stage;

/// Returns the return-leg RMSE with and without the stored track, m.
pub fn run(out: &Path) -> windtrip::Result<(f64, f64)> {
    let cfg = RunConfig::from_preset("jet")?;
    let outbound = simulate(&cfg, LegChoice::Outbound, None, &out.join("outbound"))?;
    let track = outbound.dir.join("track.csv");
    println!("recorded {} records to {}", outbound.log.track.len(), track.display());

    let replay = simulate(&cfg, LegChoice::Return, Some(&track), &out.join("return"))?;
    let live = simulate(&cfg.set("plan.return_mode", "feedback")?, LegChoice::Return, None, &out.join("return_feedback"))?;

    let rmse = |s: &windtrip::harness::report::SummaryReport| s.leg(Stage::Return).map(|l| l.rmse_m).unwrap_or(f64::NAN);
    let (ff, fb) = (rmse(&replay.summary), rmse(&live.summary));
    println!("return rmse: feedforward from file {ff:.4} m, feedback only {fb:.4} m");
    Ok((ff, fb))
}

fn main() -> windtrip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/two_stage_flight".into());
    run(Path::new(&out)).map(|_| ())
}
