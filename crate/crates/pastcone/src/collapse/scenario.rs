use super::{CollapseError, CollapseStructure, MeasurementEvent};
use crate::geometry::{Boost, SpatialBounds, Worldline};
use std::collections::HashMap;

/// Tolerance for the weight-sum and apex-on-target validations.
const VALIDATION_TOL: f64 = 1e-9;

/// A complete collapse scenario: worldlines carrying a probability
/// distribution, plus the measurements applied to it.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub dim: usize,
    pub worldlines: Vec<Worldline>,
    /// Initial per-line weights; sum to 1.
    pub weights: Vec<f64>,
    pub measurements: Vec<MeasurementEvent>,
    index: HashMap<String, usize>,
}

impl Scenario {
    pub fn new(
        worldlines: Vec<Worldline>,
        weights: Vec<f64>,
        measurements: Vec<MeasurementEvent>,
    ) -> Result<Self, CollapseError> {
        if worldlines.is_empty() {
            return Err(CollapseError::Invalid("scenario needs at least one worldline".into()));
        }
        if measurements.len() > 64 {
            return Err(CollapseError::TooManyMeasurements(measurements.len()));
        }
        let dim = worldlines[0].dim();
        let mut index = HashMap::new();
        for (i, w) in worldlines.iter().enumerate() {
            if w.dim() != dim {
                return Err(CollapseError::Invalid(format!(
                    "worldline `{}` has dimension {}, scenario dimension is {dim}",
                    w.id(),
                    w.dim()
                )));
            }
            if index.insert(w.id().to_string(), i).is_some() {
                return Err(CollapseError::Invalid(format!(
                    "duplicate worldline id `{}`",
                    w.id()
                )));
            }
        }
        if weights.len() != worldlines.len() {
            return Err(CollapseError::Invalid(format!(
                "{} weights for {} worldlines",
                weights.len(),
                worldlines.len()
            )));
        }
        for (w, line) in weights.iter().zip(&worldlines) {
            if !(0.0..=1.0).contains(w) {
                return Err(CollapseError::Invalid(format!(
                    "weight {w} on `{}` is outside [0, 1]",
                    line.id()
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(CollapseError::Invalid(format!(
                "weights sum to {total}, must sum to 1"
            )));
        }
        for (mi, m) in measurements.iter().enumerate() {
            let li = *index
                .get(&m.target)
                .ok_or_else(|| CollapseError::UnknownTarget(m.target.clone()))?;
            if m.apex.dim() != dim {
                return Err(CollapseError::Invalid(format!(
                    "measurement {mi} apex has dimension {}, scenario dimension is {dim}",
                    m.apex.dim()
                )));
            }
            if !worldlines[li].contains_event(&m.apex, VALIDATION_TOL) {
                return Err(CollapseError::ApexOffTarget {
                    index: mi,
                    apex: m.apex,
                    target: m.target.clone(),
                });
            }
        }
        Ok(Scenario {
            dim,
            worldlines,
            weights,
            measurements,
            index,
        })
    }

    /// Uniform distribution over the given lines, no measurements yet.
    pub fn uniform(worldlines: Vec<Worldline>) -> Result<Self, CollapseError> {
        let n = worldlines.len();
        let weights = vec![1.0 / n as f64; n];
        Scenario::new(worldlines, weights, Vec::new())
    }

    pub fn with_measurements(
        mut self,
        measurements: Vec<MeasurementEvent>,
    ) -> Result<Self, CollapseError> {
        self.measurements.clear();
        Scenario::new(self.worldlines, self.weights, measurements)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn line_count(&self) -> usize {
        self.worldlines.len()
    }

    pub fn structure(&self) -> CollapseStructure {
        CollapseStructure::from_measurements(&self.measurements)
            .expect("measurement count validated")
    }

    /// The same scenario described in the frame moving with `b`: all events
    /// transform, outcomes and weight values are scalars and carry over.
    pub fn boosted(&self, b: &Boost) -> Scenario {
        let worldlines = self.worldlines.iter().map(|w| w.boosted(b)).collect();
        let measurements = self
            .measurements
            .iter()
            .map(|m| MeasurementEvent {
                apex: b.apply(&m.apex),
                target: m.target.clone(),
                outcome: m.outcome,
            })
            .collect();
        Scenario::new(worldlines, self.weights.clone(), measurements)
            .expect("boost preserves scenario validity")
    }

    /// Spatial box around everything of interest: worldline vertices and
    /// measurement apices.
    pub fn spatial_bounds(&self) -> SpatialBounds {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        let mut touch = |x: &[f64]| {
            for i in 0..self.dim {
                min[i] = min[i].min(x[i]);
                max[i] = max[i].max(x[i]);
            }
        };
        for w in &self.worldlines {
            for v in w.vertices() {
                touch(v.x());
            }
        }
        for m in &self.measurements {
            touch(m.apex.x());
        }
        for i in 0..self.dim {
            if min[i] > max[i] {
                min[i] = 0.0;
                max[i] = 0.0;
            }
        }
        SpatialBounds::new(&min[..self.dim], &max[..self.dim])
    }

    /// Time window around the scenario's vertices and apices.
    pub fn time_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for w in &self.worldlines {
            for v in w.vertices() {
                lo = lo.min(v.t());
                hi = hi.max(v.t());
            }
        }
        for m in &self.measurements {
            lo = lo.min(m.apex.t());
            hi = hi.max(m.apex.t());
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::Outcome;
    use crate::geometry::Event;

    #[test]
    fn rejects_bad_weight_sum() {
        let lines = vec![Worldline::at_rest("a", &[0.0]), Worldline::at_rest("b", &[1.0])];
        let r = Scenario::new(lines, vec![0.5, 0.4], vec![]);
        assert!(matches!(r, Err(CollapseError::Invalid(msg)) if msg.contains("sum")));
    }

    #[test]
    fn rejects_apex_off_target() {
        let lines = vec![Worldline::at_rest("a", &[0.0]), Worldline::at_rest("b", &[1.0])];
        let m = MeasurementEvent::new(Event::d1(0.0, 0.5), "a", Outcome::Found);
        let r = Scenario::new(lines, vec![0.5, 0.5], vec![m]);
        assert!(matches!(r, Err(CollapseError::ApexOffTarget { .. })));
    }

    #[test]
    fn rejects_unknown_target() {
        let lines = vec![Worldline::at_rest("a", &[0.0]), Worldline::at_rest("b", &[1.0])];
        let m = MeasurementEvent::new(Event::d1(0.0, 0.0), "zz", Outcome::Found);
        let r = Scenario::new(lines, vec![0.5, 0.5], vec![m]);
        assert!(matches!(r, Err(CollapseError::UnknownTarget(_))));
    }

    #[test]
    fn boost_preserves_membership() {
        let lines = vec![Worldline::at_rest("a", &[0.0]), Worldline::at_rest("b", &[1.0])];
        let m = MeasurementEvent::new(Event::d1(0.0, 0.0), "a", Outcome::Found);
        let sc = Scenario::new(lines, vec![0.5, 0.5], vec![m]).unwrap();
        let b = Boost::along_x(0.7, 1).unwrap();
        let sb = sc.boosted(&b);
        assert_eq!(sb.measurements.len(), 1);
        assert_eq!(sb.line_index("b"), Some(1));
    }
}
