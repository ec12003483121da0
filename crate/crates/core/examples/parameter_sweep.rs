//! Sweep the return speed on a worker pool and tabulate the feedforward
//! return error. Each case gets its own seed derived from the master seed.
//!
//! ```text
//! cargo run --release --example parameter_sweep -- runs/sweep
//! ```

use std::path::Path;

use windtrip::harness::commands::{sweep, SweepCase};
use windtrip::harness::config::RunConfig;

pub fn run(out: &Path, workers: usize) -> windtrip::Result<Vec<SweepCase>> {
    let cfg = RunConfig::from_preset("jet")?;
    let values: Vec<String> = ["0.5", "1.0", "1.5"].map(String::from).to_vec();
    let cases = sweep(&cfg, "plan.return_speed", &values, workers, out)?;
    for c in &cases {
        println!("return_speed {:>4} m/s  seed {:>20}  return rmse {:.4} m", c.value, c.seed, c.return_rmse_m.unwrap_or(f64::NAN));
    }
    Ok(cases)
}

fn main() -> windtrip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/parameter_sweep".into());
    run(Path::new(&out), 3).map(|_| ())
}
