//! Hover in the jet core and watch the wrench observer converge.
//!
//! ```text
//! cargo run --example hover_observer
//! ```

use windtrip::harness::presets::preset;
use windtrip::harness::report::SummaryReport;
use windtrip::mission::{run_mission, Legs, Stage};

/// Returns the settling time of the force estimate, s.
pub fn run() -> windtrip::Result<f64> {
    let scenario = preset("hover").expect("hover preset");
    let log = run_mission(&scenario, Legs::Hover, None)?;

    let t = log.onboard.column("t_s")?;
    let est = log.onboard.column("est_fy_N")?;
    let truth = log.onboard.column("true_fy_N")?;
    println!("{:>6}  {:>10}  {:>10}", "t [s]", "est fy [N]", "true fy [N]");
    for i in (0..t.len()).step_by(500) {
        println!("{:>6.2}  {:>10.4}  {:>10.4}", t[i], est[i], truth[i]);
    }

    let summary = SummaryReport::from_log(&log, None, None)?;
    let hold = summary.leg(Stage::Hold).expect("hover log has a hold stage");
    let settling = hold.force_settling_s.unwrap_or(f64::INFINITY);
    println!("force estimate rmse {:.4} N, settled within 10 mN after {settling:.2} s", hold.force_estimate_rmse_n);
    println!("position rmse {:.4} m", hold.rmse_m);
    Ok(settling)
}

fn main() -> windtrip::Result<()> {
    run().map(|_| ())
}
