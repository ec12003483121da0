//! Every example runs and shows what it claims.

#[path = "../examples/hover_observer.rs"]
#[allow(dead_code)]
mod hover_observer;
#[path = "../examples/jet_roundtrip.rs"]
#[allow(dead_code)]
mod jet_roundtrip;
#[path = "../examples/complex_roundtrip.rs"]
#[allow(dead_code)]
mod complex_roundtrip;
#[path = "../examples/two_stage_flight.rs"]
#[allow(dead_code)]
mod two_stage_flight;
#[path = "../examples/outbound_baseline.rs"]
#[allow(dead_code)]
mod outbound_baseline;
#[path = "../examples/fieldmap.rs"]
#[allow(dead_code)]
mod fieldmap;
#[path = "../examples/disturbance_track.rs"]
#[allow(dead_code)]
mod disturbance_track;
#[path = "../examples/unsteady_flow.rs"]
#[allow(dead_code)]
mod unsteady_flow;
#[path = "../examples/observer_filters.rs"]
#[allow(dead_code)]
mod observer_filters;
#[path = "../examples/parameter_sweep.rs"]
#[allow(dead_code)]
mod parameter_sweep;
#[path = "../examples/spinning_top.rs"]
#[allow(dead_code)]
mod spinning_top;

use windtrip::control::ControlMode;

#[test]
fn hover_observer_settles() {
    let settling = hover_observer::run().unwrap();
    assert!(settling < 1.0, "{settling}");
}

#[test]
fn jet_roundtrip_orders_the_three_modes() {
    let dir = tempfile::tempdir().unwrap();
    let report = jet_roundtrip::run(dir.path()).unwrap();
    let rmse = |m| report.arm(m).unwrap().return_rmse_m;
    assert!(rmse(ControlMode::PdOnly) > rmse(ControlMode::Feedback));
    assert!(rmse(ControlMode::Feedback) > rmse(ControlMode::Feedforward));
    assert!(dir.path().join("compare.json").is_file());
}

#[test]
fn complex_roundtrip_improves() {
    let dir = tempfile::tempdir().unwrap();
    assert!(complex_roundtrip::run(dir.path()).unwrap().reduction_percent > 0.0);
}

#[test]
fn two_stage_flight_matches_single_mission() {
    let dir = tempfile::tempdir().unwrap();
    let (ff, fb) = two_stage_flight::run(dir.path()).unwrap();
    assert!(ff < fb);
}

#[test]
fn baseline_legs_are_alike() {
    let (out, back) = outbound_baseline::run().unwrap();
    assert!((out - back).abs() < 0.5 * out.max(back), "{out} vs {back}");
}

#[test]
fn fieldmaps_peak_at_jet_speed() {
    let dir = tempfile::tempdir().unwrap();
    for (name, peak) in fieldmap::run(dir.path()).unwrap() {
        assert!((peak - 6.0).abs() < 0.5, "{name}: {peak}");
        assert!(dir.path().join(format!("{name}.csv")).is_file());
    }
}

#[test]
fn handmade_track_falls_back_far_away() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(disturbance_track::run(dir.path()).unwrap(), 1);
}

#[test]
fn unsteady_flow_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(unsteady_flow::run(dir.path()).unwrap().is_finite());
}

#[test]
fn observer_settles_in_about_ln100_tau() {
    for (tau, settled) in observer_filters::run().unwrap() {
        let ideal = tau * 100f64.ln();
        assert!(settled >= ideal - 0.002 && settled <= ideal + 0.02, "tau {tau}: {settled} vs {ideal}");
    }
}

#[test]
fn sweep_example_covers_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let cases = parameter_sweep::run(dir.path(), 2).unwrap();
    assert_eq!(cases.len(), 3);
    assert!(cases.iter().all(|c| c.status == "completed"));
}

#[test]
fn spinning_top_matches_closed_form() {
    assert!(spinning_top::run().unwrap() < 1e-6);
}
