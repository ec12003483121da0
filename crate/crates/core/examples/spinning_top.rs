//! Integrate a torque-free symmetric rigid body and compare it with the
//! closed-form precession of its body rates.

use windtrip::math::{Rotation, Vec3};
use windtrip::vehicle::{step_dynamics, MotorCommand, VehicleParams, VehicleState, Wrench};

/// Returns the largest body-rate error against the analytic solution, rad/s.
pub fn run() -> windtrip::Result<f64> {
    let params = VehicleParams { inertia: [0.01, 0.01, 0.02], ..Default::default() };
    let [i1, _, i3] = params.inertia;
    let w0 = Vec3::new(0.3, -0.2, 2.0);
    let omega = (i3 - i1) / i1 * w0.z;
    let mut state = VehicleState { angular_velocity: w0, attitude: Rotation::identity(), ..VehicleState::at_rest(Vec3::zeros()) };
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    for k in 1..=10_000 {
        state = step_dynamics(&state, &MotorCommand::default(), &Wrench::zero(), &params, dt)?;
        let t = k as f64 * dt;
        let (s, c) = (omega * t).sin_cos();
        let exact = Vec3::new(w0.x * c - w0.y * s, w0.x * s + w0.y * c, w0.z);
        worst = worst.max((state.angular_velocity - exact).norm());
    }
    let w = state.angular_velocity;
    let energy = |w: &Vec3| 0.5 * (i1 * (w.x * w.x + w.y * w.y) + i3 * w.z * w.z);
    println!("after 10 s: body rates {:?}", w.as_slice());
    println!("max rate error {worst:.2e} rad/s, energy drift {:.2e}", (energy(&w) - energy(&w0)).abs() / energy(&w0));
    Ok(worst)
}

fn main() -> windtrip::Result<()> {
    run().map(|_| ())
}
