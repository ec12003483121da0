//! Out through the lab jet at 0.1 m/s, back at 1 m/s, three ways: plain PD,
//! live observer feedback, and recorded feedforward.
//!
//! ```text
//! cargo run --release --example jet_roundtrip -- runs/jet
//! ```

use std::path::Path;

use windtrip::harness::commands::compare;
use windtrip::harness::config::RunConfig;
use windtrip::harness::report::CompareReport;

pub fn run(out: &Path) -> windtrip::Result<CompareReport> {
    let cfg = RunConfig::from_preset("jet")?;
    let (report, runs) = compare(&cfg, out)?;
    for (arm, run) in report.arms.iter().zip(&runs) {
        println!(
            "{:<12} return rmse {:.4} m  (lateral {:.4} m)  {} records, {} lookups",
            arm.label,
            arm.return_rmse_m,
            arm.return_rmse_axis_m[1],
            run.summary.track_records,
            run.summary.legs.iter().map(|l| l.lookups).sum::<usize>(),
        );
    }
    println!("feedforward reduces the return error by {:.1}%", report.reduction_percent);
    Ok(report)
}

fn main() -> windtrip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/jet_roundtrip".into());
    run(Path::new(&out)).map(|_| ())
}
