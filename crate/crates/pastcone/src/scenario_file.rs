//! The JSON scenario format: worldlines, weights, measurements, audit
//! configuration and render hints, with SI units converted to natural units
//! (`c = 1`) at this boundary and nowhere else.

use crate::audit::SurfaceFamily;
use crate::collapse::{MeasurementEvent, Outcome, Scenario};
use crate::geometry::{Event, Worldline};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {msg}")]
    Syntax {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// On-disk scenario. Coordinates are in the declared units; everything is
/// converted to natural units when the scenario is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub units: Units,
    pub dimension: usize,
    pub worldlines: Vec<WorldlineSpec>,
    /// Per-line initial weights; omitted means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<MeasurementSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderHints>,
}

/// Unit system of the file: `c` in (length unit)/(time unit). Natural units
/// (`c = 1`) are the default; an SI file would say `c = 2.998e8`,
/// `time = "s"`, `length = "m"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub c: f64,
    #[serde(default = "default_unit_name")]
    pub time: String,
    #[serde(default = "default_unit_name")]
    pub length: String,
}

fn default_unit_name() -> String {
    "natural".into()
}

impl Default for Units {
    fn default() -> Self {
        Units {
            c: 1.0,
            time: default_unit_name(),
            length: default_unit_name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldlineSpec {
    pub id: String,
    /// Vertices as `[t, x...]` rows in file units.
    pub vertices: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_velocity: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    /// `[t, x...]` in file units.
    pub apex: Vec<f64>,
    pub target: String,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub seed: u64,
    pub surfaces: usize,
    #[serde(default = "default_families")]
    pub families: Vec<FamilySpec>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    crate::audit::AUDIT_TOL
}

fn default_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::BoostedFlat { v_max: 0.99 },
        FamilySpec::LipschitzGraph { slope_max: 0.999 },
    ]
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            seed: 0,
            surfaces: 100,
            families: default_families(),
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    BoostedFlat { v_max: f64 },
    LipschitzGraph { slope_max: f64 },
}

impl From<FamilySpec> for SurfaceFamily {
    fn from(f: FamilySpec) -> SurfaceFamily {
        match f {
            FamilySpec::BoostedFlat { v_max } => SurfaceFamily::BoostedFlat { v_max },
            FamilySpec::LipschitzGraph { slope_max } => {
                SurfaceFamily::LipschitzGraph { slope_max }
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderHints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
}

/// A parsed and validated scenario, ready to run.
#[derive(Clone, Debug)]
pub struct ParsedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub audit: AuditConfig,
    pub render: RenderHints,
}

/// Parse and validate a scenario document. Syntax errors carry line and
/// column; semantic rejections name the violated constraint.
pub fn parse_scenario(text: &str) -> Result<ParsedScenario, ParseError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    build(file)
}

fn build(file: ScenarioFile) -> Result<ParsedScenario, ParseError> {
    if file.version != 1 {
        return Err(ParseError::Invalid(format!(
            "unsupported version {} (expected 1)",
            file.version
        )));
    }
    if !(1..=3).contains(&file.dimension) {
        return Err(ParseError::Invalid(format!(
            "dimension must be 1, 2 or 3, got {}",
            file.dimension
        )));
    }
    let c = file.units.c;
    if !(c > 0.0) || !c.is_finite() {
        return Err(ParseError::Invalid(format!(
            "units.c must be positive and finite, got {c}"
        )));
    }
    let d = file.dimension;

    let to_event = |coords: &[f64], what: &str| -> Result<Event, ParseError> {
        if coords.len() != d + 1 {
            return Err(ParseError::Invalid(format!(
                "{what}: expected [t, x...] with {d} spatial coordinates, got {} entries",
                coords.len()
            )));
        }
        // Natural units measure time in length units: t_nat = c * t_file.
        Event::new(c * coords[0], &coords[1..])
            .map_err(|e| ParseError::Invalid(format!("{what}: {e}")))
    };
    let to_velocity = |v: &[f64], what: &str| -> Result<Vec<f64>, ParseError> {
        if v.len() != d {
            return Err(ParseError::Invalid(format!(
                "{what}: expected {d} velocity components, got {}",
                v.len()
            )));
        }
        Ok(v.iter().map(|u| u / c).collect())
    };

    let mut worldlines = Vec::with_capacity(file.worldlines.len());
    for spec in &file.worldlines {
        let vertices = spec
            .vertices
            .iter()
            .map(|row| to_event(row, &format!("worldline `{}` vertex", spec.id)))
            .collect::<Result<Vec<_>, _>>()?;
        let initial = spec
            .initial_velocity
            .as_deref()
            .map(|v| to_velocity(v, &format!("worldline `{}` initial velocity", spec.id)))
            .transpose()?;
        let terminal = spec
            .terminal_velocity
            .as_deref()
            .map(|v| to_velocity(v, &format!("worldline `{}` terminal velocity", spec.id)))
            .transpose()?;
        let line = Worldline::new(spec.id.clone(), vertices, initial, terminal)
            .map_err(|e| ParseError::Invalid(e.to_string()))?;
        worldlines.push(line);
    }

    let weights: Vec<f64> = match &file.weights {
        None => {
            let n = worldlines.len().max(1);
            vec![1.0 / n as f64; n]
        }
        Some(map) => {
            for id in map.keys() {
                if !worldlines.iter().any(|w| w.id() == id) {
                    return Err(ParseError::Invalid(format!(
                        "weights name unknown worldline `{id}`"
                    )));
                }
            }
            worldlines
                .iter()
                .map(|w| {
                    map.get(w.id()).copied().ok_or_else(|| {
                        ParseError::Invalid(format!("no weight given for worldline `{}`", w.id()))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };

    let measurements = file
        .measurements
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(MeasurementEvent::new(
                to_event(&m.apex, &format!("measurement {i} apex"))?,
                m.target.clone(),
                m.outcome,
            ))
        })
        .collect::<Result<Vec<_>, ParseError>>()?;

    let scenario = Scenario::new(worldlines, weights, measurements)
        .map_err(|e| ParseError::Invalid(e.to_string()))?;

    Ok(ParsedScenario {
        audit: file.audit.clone().unwrap_or_default(),
        render: file.render.clone().unwrap_or_default(),
        scenario,
        file,
    })
}

/// Serialize a scenario document; `parse_scenario` round-trips it.
pub fn to_json(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario serializes");
    s.push('\n');
    s
}

/// Describe a natural-units scenario as a file document.
pub fn from_scenario(sc: &Scenario, render: Option<RenderHints>) -> ScenarioFile {
    let worldlines = sc
        .worldlines
        .iter()
        .map(|w| WorldlineSpec {
            id: w.id().to_string(),
            vertices: w
                .vertices()
                .iter()
                .map(|v| {
                    let mut row = vec![v.t()];
                    row.extend_from_slice(v.x());
                    row
                })
                .collect(),
            initial_velocity: w.initial_velocity().map(|v| v.to_vec()),
            terminal_velocity: w.terminal_velocity().map(|v| v.to_vec()),
        })
        .collect();
    let weights = sc
        .worldlines
        .iter()
        .zip(&sc.weights)
        .map(|(w, &wt)| (w.id().to_string(), wt))
        .collect();
    let measurements = sc
        .measurements
        .iter()
        .map(|m| {
            let mut apex = vec![m.apex.t()];
            apex.extend_from_slice(m.apex.x());
            MeasurementSpec {
                apex,
                target: m.target.clone(),
                outcome: m.outcome,
            }
        })
        .collect();
    ScenarioFile {
        version: 1,
        units: Units::default(),
        dimension: sc.dim,
        worldlines,
        weights: Some(weights),
        measurements,
        audit: None,
        render,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "dimension": 1,
        "worldlines": [
            {"id": "left", "vertices": [[0.0, 0.0]],
             "initial_velocity": [0.0], "terminal_velocity": [0.0]},
            {"id": "right", "vertices": [[0.0, 1.0]],
             "initial_velocity": [0.0], "terminal_velocity": [0.0]}
        ],
        "measurements": [
            {"apex": [0.0, 0.0], "target": "left", "outcome": "found"}
        ]
    }"#;

    #[test]
    fn minimal_scenario_parses_with_uniform_weights() {
        let parsed = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parsed.scenario.weights, vec![0.5, 0.5]);
        assert_eq!(parsed.scenario.measurements.len(), 1);
    }

    #[test]
    fn weight_sum_violations_name_the_constraint() {
        let text = MINIMAL.replace(
            "\"measurements\"",
            "\"weights\": {\"left\": 0.5, \"right\": 0.4}, \"measurements\"",
        );
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("sum"), "{err}");
    }

    #[test]
    fn superluminal_segments_are_rejected() {
        let text = r#"{
            "version": 1,
            "dimension": 1,
            "worldlines": [
                {"id": "a", "vertices": [[0.0, 0.0], [1.0, 2.0]]},
                {"id": "b", "vertices": [[0.0, 5.0]], "terminal_velocity": [0.0],
                 "initial_velocity": [0.0]}
            ]
        }"#;
        let err = parse_scenario(text).unwrap_err();
        assert!(err.to_string().contains("superluminal"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_scenario("{\n  \"version\": 1,,\n}").unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn si_units_convert_at_the_boundary() {
        // One light-second apart in SI units.
        let text = r#"{
            "version": 1,
            "units": {"c": 2.998e8, "time": "s", "length": "m"},
            "dimension": 1,
            "worldlines": [
                {"id": "a", "vertices": [[0.0, 0.0]],
                 "initial_velocity": [0.0], "terminal_velocity": [0.0]},
                {"id": "b", "vertices": [[0.0, 2.998e8]],
                 "initial_velocity": [0.0], "terminal_velocity": [0.0]}
            ],
            "measurements": [
                {"apex": [1.0, 0.0], "target": "a", "outcome": "null"}
            ]
        }"#;
        let parsed = parse_scenario(text).unwrap();
        // Natural units: the apex time is c * 1 s.
        let apex = parsed.scenario.measurements[0].apex;
        assert!((apex.t() - 2.998e8).abs() < 1.0);
        // The null's cone crosses b exactly at t = 0 in natural units.
        let map =
            crate::collapse::sequential_apply(&parsed.scenario, &parsed.scenario.measurements)
                .unwrap();
        assert!((map.lines[1].jumps[0].at.t() - 0.0).abs() < 1e-6);
    }

    #[test]
    fn round_trip_preserves_the_document() {
        let parsed = parse_scenario(MINIMAL).unwrap();
        let json = to_json(&parsed.file);
        let again = parse_scenario(&json).unwrap();
        assert_eq!(parsed.file, again.file);
    }

    #[test]
    fn from_scenario_round_trips_through_parse() {
        let epr = crate::scenarios::epr_pair(0.5, (2.0, 3.0)).unwrap();
        let file = from_scenario(&epr.scenario, None);
        let json = to_json(&file);
        let parsed = parse_scenario(&json).unwrap();
        assert_eq!(parsed.file, file);
        assert_eq!(parsed.scenario.line_count(), 2);
    }
}
