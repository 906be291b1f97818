//! Builders and analyzers for the physics constructions: entangled-pair
//! worldlines with collapse cones, delayed-choice detection geometry,
//! linked-detector reduction, extended measurement regions, and the
//! atom-interferometer timing model.

use crate::collapse::{CollapseError, CollapseStructure, MeasurementEvent, Outcome, Scenario};
use crate::geometry::{CausalClass, Event, GeometryError, LightCone, Worldline, DEFAULT_EPS};
use serde::Serialize;
use thiserror::Error;

/// Light speed in m/s used by the SI-facing timing analyses.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Beam separation of the reference atom-interferometer setup, in meters.
pub const REFERENCE_BEAM_SEPARATION: f64 = 0.002;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("collapse: {0}")]
    Collapse(#[from] CollapseError),
    #[error("pair speed must satisfy 0 < v <= 1, got {0}")]
    BadPairSpeed(f64),
    #[error("detection at t = {0} happens before the source event")]
    DetectionBeforeSource(f64),
    #[error(
        "arm `{name}`: path length {path} is shorter than the straight-line distance {straight}"
    )]
    PathTooShort {
        name: String,
        path: f64,
        straight: f64,
    },
    #[error("arm `{name}`: propagation speed {speed} is outside (0, c]")]
    BadArmSpeed { name: String, speed: f64 },
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("no detector events given")]
    NoDetectors,
    #[error("no measurement-region samples given")]
    NoSamples,
    #[error("combination worldline never enters the causal future of detector {0}")]
    NoCausalCombination(usize),
}

/// Two particles flying apart from a common source, with position
/// detections on both arms and the collapse cones those detections drag
/// along.
#[derive(Clone, Debug)]
pub struct EprScenario {
    pub scenario: Scenario,
    pub source: Event,
    /// Detection events on the (+v, -v) arms.
    pub detections: (Event, Event),
    /// Where each detection's past cone crosses the partner arm. At v = 1
    /// both sit exactly at the source: the photons collapse right where
    /// they were created.
    pub partner_crossings: (Event, Event),
}

/// Build the two-arm pair scenario: worldlines `x = +v t` and `x = -v t`
/// from the source at the origin, detected at the given times. The
/// detection on the plus arm counts as Found, the other as its null
/// confirmation.
pub fn epr_pair(v: f64, detection_times: (f64, f64)) -> Result<EprScenario, ScenarioError> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(ScenarioError::BadPairSpeed(v));
    }
    let (t_plus, t_minus) = detection_times;
    for t in [t_plus, t_minus] {
        if !(t > 0.0) {
            return Err(ScenarioError::DetectionBeforeSource(t));
        }
    }
    let source = Event::d1(0.0, 0.0);
    let plus = Worldline::new("plus", vec![source], None, Some(vec![v]))?;
    let minus = Worldline::new("minus", vec![source], None, Some(vec![-v]))?;
    let detection_plus = Event::d1(t_plus, v * t_plus);
    let detection_minus = Event::d1(t_minus, -v * t_minus);
    let measurements = vec![
        MeasurementEvent::new(detection_plus, "plus", Outcome::Found),
        MeasurementEvent::new(detection_minus, "minus", Outcome::Null),
    ];
    let crossing_on_minus = LightCone::past_of(detection_plus)
        .cross_worldline(&minus)
        .expect("partner arm reaches the detection's past");
    let crossing_on_plus = LightCone::past_of(detection_minus)
        .cross_worldline(&plus)
        .expect("partner arm reaches the detection's past");
    let scenario = Scenario::new(vec![plus, minus], vec![0.5, 0.5], measurements)?;
    Ok(EprScenario {
        scenario,
        source,
        detections: (detection_plus, detection_minus),
        partner_crossings: (crossing_on_minus, crossing_on_plus),
    })
}

/// One detector arm of a delayed-choice layout: a detector position, the
/// (possibly roundabout) path length the signal travels to reach it, and
/// the effective propagation speed along that path.
#[derive(Clone, Debug)]
pub struct DetectorArm {
    pub name: String,
    pub position: Vec<f64>,
    pub path_length: f64,
    pub speed: f64,
}

#[derive(Clone, Debug)]
pub struct DelayedChoiceGeometry {
    pub source: Vec<f64>,
    pub arms: Vec<DetectorArm>,
    pub c: f64,
}

impl DelayedChoiceGeometry {
    pub fn new(source: Vec<f64>, arms: Vec<DetectorArm>, c: f64) -> Result<Self, ScenarioError> {
        if !(c > 0.0) {
            return Err(ScenarioError::NonPositive("light speed", c));
        }
        for arm in &arms {
            let straight = distance(&arm.position, &source);
            if arm.path_length < straight * (1.0 - 1e-12) {
                return Err(ScenarioError::PathTooShort {
                    name: arm.name.clone(),
                    path: arm.path_length,
                    straight,
                });
            }
            if !(arm.speed > 0.0) || arm.speed > c * (1.0 + 1e-12) {
                return Err(ScenarioError::BadArmSpeed {
                    name: arm.name.clone(),
                    speed: arm.speed,
                });
            }
        }
        Ok(DelayedChoiceGeometry { source, arms, c })
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MarginVerdict {
    /// The detection's past cone clears the source: the collapse happens
    /// on the way, not at the origin.
    CollapseAboveSource,
    /// The past cone reaches exactly back to the source event.
    CollapseAtSource,
}

/// Margin analysis for one arm: how much later the detection happens than
/// a straight light signal from the source would need.
#[derive(Clone, Debug, Serialize)]
pub struct ArmMargin {
    pub name: String,
    pub detection_time: f64,
    pub light_time: f64,
    pub margin: f64,
    pub verdict: MarginVerdict,
}

/// Check each detector: `margin = L/speed - |x - source|/c`. Zero margin
/// means the collapse reaches right back to the source — the situation a
/// roundabout route or holding pattern is there to avoid.
pub fn delayed_choice_check(g: &DelayedChoiceGeometry) -> Vec<ArmMargin> {
    g.arms
        .iter()
        .map(|arm| {
            let detection_time = arm.path_length / arm.speed;
            let light_time = distance(&arm.position, &g.source) / g.c;
            let margin = detection_time - light_time;
            let verdict = if margin.abs() <= 1e-12 * detection_time.max(1e-300) {
                MarginVerdict::CollapseAtSource
            } else {
                MarginVerdict::CollapseAboveSource
            };
            ArmMargin {
                name: arm.name.clone(),
                detection_time,
                light_time,
                margin,
                verdict,
            }
        })
        .collect()
}

/// Timing parameters of the two-beam interferometer layout, SI units.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterferometerTiming {
    /// Transverse distance between the beamlines, meters.
    pub beam_separation: f64,
    /// Beam speed along the lines, m/s (does not enter the transverse
    /// timing; recorded for the scenario description).
    pub beam_speed: f64,
    /// Time spent crossing the probe laser, seconds.
    pub laser_transit: f64,
    /// Half-life of the excited state, seconds.
    pub half_life: f64,
    /// Time allowed for fluorescent decay before the detectors, seconds.
    pub decay_window: f64,
    /// Light speed, m/s.
    pub c: f64,
}

impl InterferometerTiming {
    pub fn new(
        beam_separation: f64,
        beam_speed: f64,
        laser_transit: f64,
        half_life: f64,
        decay_window: f64,
    ) -> Result<Self, ScenarioError> {
        for (name, v) in [
            ("beam separation", beam_separation),
            ("beam speed", beam_speed),
            ("laser transit", laser_transit),
            ("half life", half_life),
            ("decay window", decay_window),
        ] {
            if !(v > 0.0) {
                return Err(ScenarioError::NonPositive(name, v));
            }
        }
        Ok(InterferometerTiming {
            beam_separation,
            beam_speed,
            laser_transit,
            half_life,
            decay_window,
            c: SPEED_OF_LIGHT,
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterferometerReport {
    /// How far before the detections the collapse reaches the other beam:
    /// separation / c.
    pub precollapse_time: f64,
    /// Fraction of excited atoms that radiate within the decay window.
    pub decay_fraction: f64,
    /// Beam separation needed to fit excitation plus decay inside the
    /// pre-collapse window.
    pub required_separation: f64,
    /// required_separation over the reference 2 mm setup.
    pub upgrade_factor: f64,
    /// Whether the pre-collapse window covers excitation plus decay.
    pub feasible: bool,
}

pub fn interferometer_report(t: &InterferometerTiming) -> InterferometerReport {
    let precollapse_time = t.beam_separation / t.c;
    let decay_fraction = 1.0 - (2f64).powf(-t.decay_window / t.half_life);
    let needed_time = t.laser_transit + t.decay_window;
    let required_separation = t.c * needed_time;
    InterferometerReport {
        precollapse_time,
        decay_fraction,
        required_separation,
        upgrade_factor: required_separation / REFERENCE_BEAM_SEPARATION,
        feasible: precollapse_time >= needed_time,
    }
}

/// Reduce a linked measurement — several detectors whose outputs are
/// carried to one combining device — to its effective collapse apex: the
/// earliest point of the combination worldline lying in the causal future
/// of every detector event.
pub fn reduce_linked_measurement(
    detector_events: &[Event],
    combination_worldline: &Worldline,
) -> Result<Event, ScenarioError> {
    if detector_events.is_empty() {
        return Err(ScenarioError::NoDetectors);
    }
    let mut apex: Option<Event> = None;
    for (i, e) in detector_events.iter().enumerate() {
        let reach = LightCone::future_of(*e)
            .cross_worldline(combination_worldline)
            .ok_or(ScenarioError::NoCausalCombination(i))?;
        apex = Some(match apex {
            None => reach,
            Some(a) if reach.t() > a.t() => reach,
            Some(a) => a,
        });
    }
    let apex = apex.expect("nonempty detectors");
    for (i, e) in detector_events.iter().enumerate() {
        let class = e.classify(&apex, DEFAULT_EPS);
        if !matches!(
            class,
            CausalClass::AbsoluteFuture | CausalClass::FutureLightCone | CausalClass::Coincident
        ) {
            return Err(ScenarioError::NoCausalCombination(i));
        }
    }
    Ok(apex)
}

/// Collapse structure of a measurement extended over a spacetime region,
/// approximated by sampled apices, plus the lead time by which the collapse
/// precedes the measurement: (spatial diameter) / c.
pub fn extended_region_collapse(
    apex_samples: &[Event],
    c: f64,
) -> Result<(CollapseStructure, f64), ScenarioError> {
    if apex_samples.is_empty() {
        return Err(ScenarioError::NoSamples);
    }
    if !(c > 0.0) {
        return Err(ScenarioError::NonPositive("light speed", c));
    }
    let mut diameter: f64 = 0.0;
    for i in 0..apex_samples.len() {
        for j in (i + 1)..apex_samples.len() {
            diameter = diameter.max(apex_samples[i].spatial_distance(&apex_samples[j]));
        }
    }
    let structure = CollapseStructure::from_apices(apex_samples.to_vec())?;
    Ok((structure, diameter / c))
}
