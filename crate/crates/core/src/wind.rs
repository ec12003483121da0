//! Analytic air-velocity fields: round jets with an optional blocked sector,
//! uniform flow, sums of fields and time-modulated fields.

use std::f64::consts::{LN_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindError {
    #[error("invalid wind field: {0}")]
    Invalid(String),
}

/// Angular sector of a jet cross-section in which the flow is blocked.
///
/// Angles are measured about the jet axis from `reference` (projected
/// perpendicular to the axis) towards `axis × reference`. The blocked range is
/// `[start, end)` in radians, taken modulo 2π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SectorMask {
    pub reference: [f64; 3],
    pub start: f64,
    pub end: f64,
}

/// Zero-mean velocity fluctuation at the jet boundary, scaled by the local
/// radial speed gradient. Realized as a seeded sum of sinusoids in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BoundaryTurbulence {
    /// Fluctuation amplitude per unit of radial speed gradient, m.
    pub gain: f64,
    pub seed: u64,
}

/// Round jet: flat core with a Gaussian skirt, decaying as `d_ref / max(s, d_ref)`
/// with axial distance `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct JetFlow {
    /// Nozzle exit center, m.
    pub exit: [f64; 3],
    /// Flow direction (normalized on use).
    pub axis: [f64; 3],
    /// Centerline speed at `reference_distance`, m/s.
    pub reference_speed: f64,
    /// m
    pub reference_distance: f64,
    /// Radius of the uniform core, m.
    pub core_radius: f64,
    /// Radius at which the speed falls to half the centerline value, m.
    pub half_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocked: Option<SectorMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbulence: Option<BoundaryTurbulence>,
}

/// Time modulation applied to a base field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Gain {
    Constant { value: f64 },
    Sinusoid { mean: f64, amplitude: f64, period: f64, phase: f64 },
    /// Holds `values[i]` from `times[i]` until the next breakpoint; 1 before the first.
    Piecewise { times: Vec<f64>, values: Vec<f64> },
}

impl Gain {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Gain::Constant { value } => *value,
            Gain::Sinusoid { mean, amplitude, period, phase } => mean + amplitude * (TAU * t / period + phase).sin(),
            Gain::Piecewise { times, values } => {
                let idx = times.partition_point(|bp| *bp <= t);
                if idx == 0 {
                    1.0
                } else {
                    values[idx - 1]
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindField {
    #[default]
    Calm,
    Uniform { velocity: [f64; 3] },
    Jet(JetFlow),
    Composite { components: Vec<WindField> },
    TimeVarying { base: Box<WindField>, gain: Gain },
}

const TURBULENCE_MODES: usize = 6;

/// Pre-computed jet geometry so evaluation does no normalization.
#[derive(Clone, Debug)]
struct JetGeometry {
    exit: Vec3,
    axis: Vec3,
    sector: Option<(Vec3, Vec3, f64, f64)>,
    modes: Vec<([f64; 3], f64, [f64; 3])>,
}

impl JetFlow {
    fn geometry(&self) -> JetGeometry {
        let axis = Vec3::from(self.axis).normalize();
        let sector = self.blocked.as_ref().map(|mask| {
            let r = Vec3::from(mask.reference);
            let e1 = (r - axis * axis.dot(&r)).normalize();
            let e2 = axis.cross(&e1);
            (e1, e2, mask.start.rem_euclid(TAU), mask.end.rem_euclid(TAU))
        });
        let modes = match &self.turbulence {
            Some(turb) => {
                let mut rng = ChaCha8Rng::seed_from_u64(turb.seed);
                (0..TURBULENCE_MODES)
                    .map(|_| {
                        let amp = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                        let freq = rng.gen_range(1.0..10.0);
                        let phase = [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
                        (amp, freq, phase)
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        JetGeometry { exit: Vec3::from(self.exit), axis, sector, modes }
    }

    pub fn validate(&self) -> Result<(), WindError> {
        let axis = Vec3::from(self.axis);
        if !(axis.norm() > 1e-9) {
            return Err(WindError::Invalid("jet axis must be non-zero".into()));
        }
        if !(self.reference_distance > 0.0 && self.reference_speed >= 0.0) {
            return Err(WindError::Invalid("jet reference distance must be positive and speed non-negative".into()));
        }
        if !(self.core_radius >= 0.0 && self.half_width > self.core_radius) {
            return Err(WindError::Invalid("jet half-width must exceed the core radius".into()));
        }
        if let Some(mask) = &self.blocked {
            let r = Vec3::from(mask.reference);
            if (r - axis.normalize() * axis.normalize().dot(&r)).norm() < 1e-9 {
                return Err(WindError::Invalid("sector reference must not be parallel to the jet axis".into()));
            }
        }
        Ok(())
    }

    /// Normalized radial profile: 1 inside the core, Gaussian skirt beyond.
    pub fn radial_profile(&self, r: f64) -> f64 {
        if r <= self.core_radius {
            1.0
        } else {
            let x = (r - self.core_radius) / (self.half_width - self.core_radius);
            (-LN_2 * x * x).exp()
        }
    }

    fn radial_slope(&self, r: f64) -> f64 {
        if r <= self.core_radius {
            0.0
        } else {
            let w = self.half_width - self.core_radius;
            let x = (r - self.core_radius) / w;
            -2.0 * LN_2 * x / w * (-LN_2 * x * x).exp()
        }
    }

    /// Centerline decay with axial distance `s` from the exit plane.
    pub fn axial_decay(&self, s: f64) -> f64 {
        if s >= 0.0 {
            self.reference_distance / s.max(self.reference_distance)
        } else {
            let x = s / self.half_width;
            (-x * x).exp()
        }
    }

    fn evaluate(&self, geo: &JetGeometry, position: &Vec3, t: f64) -> Vec3 {
        let rel = position - geo.exit;
        let s = rel.dot(&geo.axis);
        let radial = rel - geo.axis * s;
        let r = radial.norm();
        if let Some((e1, e2, start, end)) = &geo.sector {
            if r > 0.0 {
                let angle = radial.dot(e2).atan2(radial.dot(e1)).rem_euclid(TAU);
                let blocked = if start <= end { angle >= *start && angle < *end } else { angle >= *start || angle < *end };
                if blocked {
                    return Vec3::zeros();
                }
            }
        }
        let centerline = self.reference_speed * self.axial_decay(s);
        let mut v = geo.axis * (centerline * self.radial_profile(r));
        if let Some(turb) = &self.turbulence {
            let gradient = (centerline * self.radial_slope(r)).abs();
            if gradient > 0.0 {
                let mut fluct = Vec3::zeros();
                for (amp, freq, phase) in &geo.modes {
                    for i in 0..3 {
                        fluct[i] += amp[i] * (TAU * freq * t + phase[i]).sin();
                    }
                }
                v += fluct * (turb.gain * gradient / (TURBULENCE_MODES as f64).sqrt());
            }
        }
        v
    }
}

/// A wind field prepared for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PreparedField {
    field: WindField,
    jets: Vec<JetGeometry>,
}

impl PreparedField {
    pub fn new(field: WindField) -> Result<Self, WindError> {
        field.validate()?;
        let mut jets = Vec::new();
        collect_jets(&field, &mut jets);
        Ok(Self { field, jets })
    }

    pub fn field(&self) -> &WindField {
        &self.field
    }

    /// Air velocity at `position` and time `t`, m/s.
    pub fn air_velocity(&self, position: &Vec3, t: f64) -> Vec3 {
        let mut next_jet = 0;
        eval(&self.field, &self.jets, &mut next_jet, position, t)
    }
}

fn collect_jets(field: &WindField, out: &mut Vec<JetGeometry>) {
    match field {
        WindField::Jet(jet) => out.push(jet.geometry()),
        WindField::Composite { components } => components.iter().for_each(|c| collect_jets(c, out)),
        WindField::TimeVarying { base, .. } => collect_jets(base, out),
        WindField::Calm | WindField::Uniform { .. } => {}
    }
}

fn eval(field: &WindField, jets: &[JetGeometry], next: &mut usize, position: &Vec3, t: f64) -> Vec3 {
    match field {
        WindField::Calm => Vec3::zeros(),
        WindField::Uniform { velocity } => Vec3::from(*velocity),
        WindField::Jet(jet) => {
            let geo = &jets[*next];
            *next += 1;
            jet.evaluate(geo, position, t)
        }
        WindField::Composite { components } => {
            let mut sum = Vec3::zeros();
            for c in components {
                sum += eval(c, jets, next, position, t);
            }
            sum
        }
        WindField::TimeVarying { base, gain } => eval(base, jets, next, position, t) * gain.at(t),
    }
}

impl WindField {
    pub fn validate(&self) -> Result<(), WindError> {
        match self {
            WindField::Calm => Ok(()),
            WindField::Uniform { velocity } => {
                if velocity.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(WindError::Invalid("uniform velocity must be finite".into()))
                }
            }
            WindField::Jet(jet) => jet.validate(),
            WindField::Composite { components } => components.iter().try_for_each(WindField::validate),
            WindField::TimeVarying { base, gain } => {
                if let Gain::Piecewise { times, values } = gain {
                    if times.len() != values.len() || times.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(WindError::Invalid("piecewise gain needs increasing times matching values".into()));
                    }
                }
                if let Gain::Sinusoid { period, .. } = gain {
                    if !(*period > 0.0) {
                        return Err(WindError::Invalid("sinusoid period must be positive".into()));
                    }
                }
                base.validate()
            }
        }
    }

    /// True when evaluation does not depend on time.
    pub fn is_static(&self) -> bool {
        match self {
            WindField::Calm | WindField::Uniform { .. } => true,
            WindField::Jet(jet) => jet.turbulence.is_none(),
            WindField::Composite { components } => components.iter().all(WindField::is_static),
            WindField::TimeVarying { base, gain } => matches!(gain, Gain::Constant { .. }) && base.is_static(),
        }
    }

    /// Convenience one-shot evaluation. Prefer [`PreparedField`] in loops.
    pub fn air_velocity(&self, position: &Vec3, t: f64) -> Vec3 {
        let mut jets = Vec::new();
        collect_jets(self, &mut jets);
        let mut next = 0;
        eval(self, &jets, &mut next, position, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2 as QUARTER;

    fn jet() -> JetFlow {
        JetFlow {
            exit: [1.0, -0.3, 1.0],
            axis: [0.0, 1.0, 0.0],
            reference_speed: 6.0,
            reference_distance: 0.3,
            core_radius: 0.08,
            half_width: 0.15,
            blocked: None,
            turbulence: None,
        }
    }

    #[test]
    fn reference_point_has_reference_speed() {
        let f = WindField::Jet(jet());
        let v = f.air_velocity(&Vec3::new(1.0, 0.0, 1.0), 0.0);
        assert_eq!(v, Vec3::new(0.0, 6.0, 0.0));
    }

    #[test]
    fn far_off_axis_is_calm() {
        let fields = [
            WindField::Jet(jet()),
            WindField::Composite {
                components: vec![
                    WindField::Jet(jet()),
                    WindField::Jet(JetFlow { exit: [1.4, 0.0, 0.3], axis: [0.0, 0.0, 1.0], ..jet() }),
                ],
            },
            WindField::TimeVarying {
                base: Box::new(WindField::Jet(jet())),
                gain: Gain::Sinusoid { mean: 1.0, amplitude: 0.5, period: 2.0, phase: 0.0 },
            },
        ];
        for f in &fields {
            let v = f.air_velocity(&Vec3::new(101.0, 0.0, 1.0), 3.0);
            assert!(v.norm() < 1e-3, "{f:?}");
        }
    }

    #[test]
    fn half_width_gives_half_speed() {
        let j = jet();
        // Profile oracle: exp(-ln2 * ((h - c)/(h - c))^2) = 1/2.
        assert!((j.radial_profile(j.half_width) - 0.5).abs() < 1e-15);
        let f = WindField::Jet(j.clone());
        let v = f.air_velocity(&Vec3::new(1.0 + j.half_width, 0.0, 1.0), 0.0);
        assert!((v.y - 3.0).abs() < 1e-12);
    }

    #[test]
    fn axial_decay_monotone_beyond_core() {
        let j = jet();
        let mut prev = f64::INFINITY;
        for k in 0..500 {
            let s = j.reference_distance + k as f64 * 0.01;
            let d = j.axial_decay(s);
            assert!(d <= prev);
            prev = d;
        }
    }

    #[test]
    fn blocked_quadrant_zeroes_flow() {
        let mut j = jet();
        j.exit[2] = 0.95;
        j.blocked = Some(SectorMask { reference: [0.0, 0.0, 1.0], start: 0.0, end: QUARTER });
        let f = PreparedField::new(WindField::Jet(j)).unwrap();
        // Above the axis and towards +x is blocked, towards -x is open.
        assert_eq!(f.air_velocity(&Vec3::new(1.03, 0.0, 1.0), 0.0), Vec3::zeros());
        assert!(f.air_velocity(&Vec3::new(0.97, 0.0, 1.0), 0.0).y > 5.0);
    }

    #[test]
    fn unit_gain_reproduces_base() {
        let base = WindField::Jet(jet());
        let tv = WindField::TimeVarying { base: Box::new(base.clone()), gain: Gain::Constant { value: 1.0 } };
        for k in 0..50 {
            let p = Vec3::new(0.9 + 0.005 * k as f64, 0.1, 1.02);
            assert_eq!(tv.air_velocity(&p, k as f64), base.air_velocity(&p, k as f64));
        }
    }

    #[test]
    fn piecewise_gain_holds_values() {
        let g = Gain::Piecewise { times: vec![1.0, 2.0], values: vec![0.5, 0.0] };
        assert_eq!(g.at(0.5), 1.0);
        assert_eq!(g.at(1.0), 0.5);
        assert_eq!(g.at(1.9), 0.5);
        assert_eq!(g.at(5.0), 0.0);
    }

    #[test]
    fn turbulence_is_seeded_and_confined_to_boundary() {
        let mut j = jet();
        j.turbulence = Some(BoundaryTurbulence { gain: 0.05, seed: 7 });
        let a = PreparedField::new(WindField::Jet(j.clone())).unwrap();
        let b = PreparedField::new(WindField::Jet(j)).unwrap();
        let edge = Vec3::new(1.12, 0.0, 1.0);
        assert_eq!(a.air_velocity(&edge, 0.37), b.air_velocity(&edge, 0.37));
        assert_ne!(a.air_velocity(&edge, 0.37), a.air_velocity(&edge, 0.71));
        let core = Vec3::new(1.0, 0.0, 1.0);
        assert_eq!(a.air_velocity(&core, 0.37), a.air_velocity(&core, 0.71));
    }

    #[test]
    fn invalid_jets_rejected() {
        let mut j = jet();
        j.half_width = j.core_radius;
        assert!(WindField::Jet(j).validate().is_err());
        let mut j = jet();
        j.axis = [0.0; 3];
        assert!(WindField::Jet(j).validate().is_err());
    }

    #[test]
    fn static_fields_ignore_time() {
        let f = PreparedField::new(WindField::Composite {
            components: vec![WindField::Jet(jet()), WindField::Uniform { velocity: [0.2, 0.0, 0.0] }],
        })
        .unwrap();
        assert!(f.field().is_static());
        let p = Vec3::new(1.05, 0.02, 0.98);
        let v0 = f.air_velocity(&p, 0.0);
        assert_eq!(v0, f.air_velocity(&p, 5.0));
        assert_eq!(v0, f.air_velocity(&p, 25.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn composite_is_sum_of_components(x in -1.0f64..3.0, y in -1.0f64..2.0, z in 0.0f64..2.0, t in 0.0f64..30.0) {
            let mut blocked = jet();
            blocked.blocked = Some(SectorMask { reference: [0.0, 0.0, 1.0], start: 0.0, end: QUARTER });
            let parts = vec![
                WindField::Jet(blocked),
                WindField::Jet(JetFlow { exit: [1.4, 0.0, 0.3], axis: [0.0, 0.0, 1.0], ..jet() }),
                WindField::Uniform { velocity: [0.1, -0.2, 0.0] },
            ];
            let p = Vec3::new(x, y, z);
            let composite = PreparedField::new(WindField::Composite { components: parts.clone() }).unwrap();
            let sum: Vec3 = parts.iter().map(|c| c.air_velocity(&p, t)).sum();
            prop_assert!((composite.air_velocity(&p, t) - sum).norm() < 1e-12);
        }
    }
}
