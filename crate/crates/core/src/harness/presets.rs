//! Named scenario presets. The geometry is a reconstruction: a 2 m leg at
//! 1 m altitude crossed halfway by a 6 m/s jet.

use crate::control::ControlMode;
use crate::mission::Scenario;
use crate::wind::{BoundaryTurbulence, Gain, JetFlow, SectorMask, WindField};

pub const PRESETS: [&str; 6] = ["jet", "complex", "hover", "baseline", "calm", "gusty"];

/// Nozzle 0.3 m to the side of the path midpoint, blowing across it.
pub fn lab_jet() -> JetFlow {
    JetFlow {
        exit: [1.0, -0.3, 1.0],
        axis: [0.0, 1.0, 0.0],
        reference_speed: 6.0,
        reference_distance: 0.3,
        core_radius: 0.2,
        half_width: 0.3,
        blocked: None,
        turbulence: None,
    }
}

/// The lab jet with one quadrant of the nozzle blocked, plus an upward floor
/// fan just past the jet along the path.
pub fn complex_flow() -> WindField {
    let nozzle = JetFlow {
        blocked: Some(SectorMask { reference: [1.0, 0.0, 0.0], start: 0.0, end: std::f64::consts::FRAC_PI_2 }),
        turbulence: Some(BoundaryTurbulence { gain: 0.02, seed: 7 }),
        ..lab_jet()
    };
    let fan = JetFlow {
        exit: [1.35, 0.0, 0.4],
        axis: [0.0, 0.0, 1.0],
        reference_speed: 4.0,
        reference_distance: 0.3,
        core_radius: 0.06,
        half_width: 0.14,
        blocked: None,
        turbulence: None,
    };
    WindField::Composite { components: vec![WindField::Jet(nozzle), WindField::Jet(fan)] }
}

pub fn preset(name: &str) -> Option<Scenario> {
    let mut sc = Scenario { name: name.to_string(), ..Default::default() };
    match name {
        "jet" => sc.field = WindField::Jet(lab_jet()),
        "complex" => sc.field = complex_flow(),
        "hover" => {
            // Hold in the jet core at the reference distance.
            sc.field = WindField::Jet(lab_jet());
            sc.plan.origin = [1.0, 0.0, 1.0];
            sc.plan.target = [2.0, 0.0, 1.0];
            sc.plan.hold = 10.0;
        }
        "baseline" => {
            sc.field = WindField::Jet(lab_jet());
            sc.plan.return_speed = sc.plan.outbound_speed;
            sc.plan.return_mode = ControlMode::Feedback;
        }
        "calm" => {}
        "gusty" => {
            sc.field = WindField::TimeVarying {
                base: Box::new(WindField::Jet(lab_jet())),
                gain: Gain::Sinusoid { mean: 1.0, amplitude: 0.3, period: 4.0, phase: 0.0 },
            };
        }
        _ => return None,
    }
    Some(sc)
}
