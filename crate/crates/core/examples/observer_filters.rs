//! The force observer on its own: a vehicle held level under a constant
//! 0.15 N push, with the low-pass time constant varied.

use windtrip::estimation::ForceObserver;
use windtrip::math::{Rotation, Vec3};
use windtrip::vehicle::VehicleParams;

/// Returns, for each time constant, the first time the estimate is within 1%.
pub fn run() -> windtrip::Result<Vec<(f64, f64)>> {
    let params = VehicleParams::default();
    let push = Vec3::new(0.15, 0.0, 0.0);
    let dt = 0.002;
    let thrust = params.weight();
    // Specific force the IMU would read: (thrust + push) / m in the body frame.
    let accel = (Vec3::new(0.0, 0.0, thrust) + push) / params.mass;
    let mut out = Vec::new();
    for tau in [0.02, 0.05, 0.1, 0.2] {
        let mut obs = ForceObserver::new(params.mass, tau, dt)?;
        let mut settled = f64::NAN;
        for k in 1..=1000 {
            let est = obs.observe(&accel, &Rotation::identity(), thrust)?;
            if settled.is_nan() && (est.filtered - push).norm() <= 0.01 * push.norm() {
                settled = k as f64 * dt;
            }
        }
        println!("tau {tau:.2} s: within 1% after {settled:.3} s (ideal {:.3} s)", tau * 100f64.ln());
        out.push((tau, settled));
    }
    Ok(out)
}

fn main() -> windtrip::Result<()> {
    run().map(|_| ())
}
