//! Both legs flown slowly with observer feedback only. With nothing fed
//! forward, the two legs see the same jet and track about equally well.
//!
//! ```text
//! cargo run --release --example outbound_baseline
//! ```

use windtrip::harness::presets::preset;
use windtrip::mission::{rmse, run_roundtrip, Axes, Stage};

/// Returns (outbound, return) RMSE, m.
pub fn run() -> windtrip::Result<(f64, f64)> {
    let scenario = preset("baseline").expect("baseline preset");
    let log = run_roundtrip(&scenario)?;
    let out = rmse(&log, Stage::Outbound, Axes::ALL)?;
    let back = rmse(&log, Stage::Return, Axes::ALL)?;
    println!("outbound {out:.4} m, return {back:.4} m at {} m/s both ways", scenario.plan.outbound_speed);
    println!("lateral: outbound {:.4} m, return {:.4} m", rmse(&log, Stage::Outbound, Axes::Y)?, rmse(&log, Stage::Return, Axes::Y)?);
    Ok((out, back))
}

fn main() -> windtrip::Result<()> {
    run().map(|_| ())
}
