use super::{CollapseError, MeasurementEvent, Outcome, Scenario};
use crate::geometry::{Event, LightCone, Worldline};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

const CONTRADICTION_TOL: f64 = 1e-12;

/// Piecewise-constant probability weights along every worldline.
///
/// Weights jump exactly at cone crossings (and at apices on target lines);
/// a point sitting exactly on a breakpoint reads the pre-jump value, since
/// cone points stay on the pre-collapse side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    pub lines: Vec<LineProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineProfile {
    pub id: String,
    /// Weight before any collapse reaches the line.
    pub base: f64,
    /// Sorted by time; each entry is the value strictly above its event.
    pub jumps: Vec<WeightJump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightJump {
    pub at: Event,
    pub to: f64,
}

impl WeightMap {
    /// The pre-measurement map of a scenario.
    pub fn initial(sc: &Scenario) -> WeightMap {
        WeightMap {
            lines: sc
                .worldlines
                .iter()
                .zip(&sc.weights)
                .map(|(w, &base)| LineProfile {
                    id: w.id().to_string(),
                    base,
                    jumps: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn bases(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.base).collect()
    }

    /// Weight of line `k` at time `t`, with the strictly-above convention:
    /// a jump takes effect only after its own event.
    pub fn value_on_line_at(&self, k: usize, t: f64) -> f64 {
        let line = &self.lines[k];
        let idx = line.jumps.partition_point(|j| j.at.t() < t);
        if idx == 0 {
            line.base
        } else {
            line.jumps[idx - 1].to
        }
    }

    /// Sorted, no-op-free form; maps built by the engine are already
    /// canonical, so this mostly serves equality comparisons on
    /// hand-assembled maps.
    pub fn canonicalized(&self) -> WeightMap {
        let lines = self
            .lines
            .iter()
            .map(|l| {
                let mut jumps = l.jumps.clone();
                jumps.sort_by(|a, b| a.at.t().partial_cmp(&b.at.t()).expect("finite"));
                let mut out: Vec<WeightJump> = Vec::new();
                let mut current = l.base;
                for j in jumps {
                    if j.to != current {
                        current = j.to;
                        out.push(j);
                    }
                }
                LineProfile {
                    id: l.id.clone(),
                    base: l.base,
                    jumps: out,
                }
            })
            .collect();
        WeightMap { lines }
    }
}

/// Posterior of a base distribution conditioned on a found line or a set of
/// nulled lines: the complement rule `w_k / (1 - excluded mass)`. Also used
/// by the naive instantaneous-collapse audit, which applies the same rule on
/// flat planes instead of cones.
pub fn conditioned_weight(
    bases: &[f64],
    found_line: Option<usize>,
    nulled_lines: &std::collections::BTreeSet<usize>,
    k: usize,
) -> f64 {
    posterior(bases, found_line, nulled_lines, k)
}

/// Posterior of the base distribution conditioned on a set of outcomes.
/// The denominator is summed over nulled lines in ascending index order so
/// the value is bit-identical for the same set however it was assembled.
pub(crate) fn posterior(
    bases: &[f64],
    found_line: Option<usize>,
    nulled_lines: &BTreeSet<usize>,
    k: usize,
) -> f64 {
    if let Some(f) = found_line {
        return if k == f { 1.0 } else { 0.0 };
    }
    if nulled_lines.contains(&k) {
        return 0.0;
    }
    let excluded: f64 = nulled_lines.iter().map(|&i| bases[i]).sum();
    bases[k] / (1.0 - excluded)
}

/// Crossing of measurement `mi`'s collapse cone with line `k`: the apex on
/// the target line, the past-cone crossing elsewhere, `None` for lines that
/// never reach the apex's absolute past (those stay untouched).
pub(crate) fn crossing_on_line(
    m: &MeasurementEvent,
    target_idx: usize,
    k: usize,
    line: &Worldline,
) -> Option<Event> {
    if k == target_idx {
        Some(m.apex)
    } else {
        LightCone::past_of(m.apex).cross_worldline(line)
    }
}

pub(crate) struct ResolvedMeasurements {
    /// Line index per measurement.
    pub targets: Vec<usize>,
    /// crossings[mi][k]
    pub crossings: Vec<Vec<Option<Event>>>,
}

pub(crate) fn resolve(
    lines: &[Worldline],
    line_index: impl Fn(&str) -> Option<usize>,
    ms: &[MeasurementEvent],
) -> Result<ResolvedMeasurements, CollapseError> {
    let mut targets = Vec::with_capacity(ms.len());
    for m in ms {
        targets.push(
            line_index(&m.target).ok_or_else(|| CollapseError::UnknownTarget(m.target.clone()))?,
        );
    }
    let crossings = ms
        .iter()
        .zip(&targets)
        .map(|(m, &ti)| {
            lines
                .iter()
                .enumerate()
                .map(|(k, line)| crossing_on_line(m, ti, k, line))
                .collect()
        })
        .collect();
    Ok(ResolvedMeasurements { targets, crossings })
}

/// Outcome-consistency checks: at most one Found, no found-and-null card,
/// no null on a certain card, no found on an excluded one, and the nulls
/// must not exhaust the whole distribution.
fn validate_outcomes(
    bases: &[f64],
    lines: &[Worldline],
    ms: &[MeasurementEvent],
    resolved: &ResolvedMeasurements,
) -> Result<(), CollapseError> {
    let mut found_at: Option<usize> = None;
    for (mi, m) in ms.iter().enumerate() {
        if m.outcome == Outcome::Found {
            if let Some(first) = found_at {
                return Err(CollapseError::TwoFound { first, second: mi });
            }
            found_at = Some(mi);
        }
    }
    if let Some(f) = found_at {
        let f_line = resolved.targets[f];
        for (mi, m) in ms.iter().enumerate() {
            if m.outcome == Outcome::Null && resolved.targets[mi] == f_line {
                return Err(CollapseError::FoundAndNullSameLine {
                    line: lines[f_line].id().to_string(),
                });
            }
        }
    }

    // Value just below each apex on its own target line, conditioned on the
    // measurements whose crossings sit strictly below it there.
    for (mi, m) in ms.iter().enumerate() {
        let ti = resolved.targets[mi];
        let apex_t = m.apex.t();
        let mut found_line = None;
        let mut nulled = BTreeSet::new();
        for (mj, other) in ms.iter().enumerate() {
            if mj == mi {
                continue;
            }
            let Some(c) = &resolved.crossings[mj][ti] else {
                continue;
            };
            if c.t() < apex_t {
                match other.outcome {
                    Outcome::Found => found_line = Some(resolved.targets[mj]),
                    Outcome::Null => {
                        nulled.insert(resolved.targets[mj]);
                    }
                }
            }
        }
        let below = posterior(bases, found_line, &nulled, ti);
        match m.outcome {
            Outcome::Null if below >= 1.0 - CONTRADICTION_TOL => {
                return Err(CollapseError::NullOnCertainLine {
                    index: mi,
                    line: lines[ti].id().to_string(),
                });
            }
            Outcome::Found if below <= CONTRADICTION_TOL => {
                return Err(CollapseError::FoundOnExcludedLine {
                    index: mi,
                    line: lines[ti].id().to_string(),
                });
            }
            _ => {}
        }
    }

    if found_at.is_none() {
        let nulled: BTreeSet<usize> = ms
            .iter()
            .enumerate()
            .filter(|(_, m)| m.outcome == Outcome::Null)
            .map(|(mi, _)| resolved.targets[mi])
            .collect();
        let excluded: f64 = nulled.iter().map(|&i| bases[i]).sum();
        if excluded >= 1.0 - CONTRADICTION_TOL {
            return Err(CollapseError::AllExcluded);
        }
    }
    Ok(())
}

/// Rebuild the full weight map for a measurement set. The value of a line
/// at any point is the posterior conditioned on exactly the measurements
/// whose collapse has reached that point, so the result is independent of
/// the order the measurements are listed in.
pub(crate) fn build_map(
    lines: &[Worldline],
    bases: &[f64],
    ms: &[MeasurementEvent],
    resolved: &ResolvedMeasurements,
) -> Result<WeightMap, CollapseError> {
    validate_outcomes(bases, lines, ms, resolved)?;

    let mut out = Vec::with_capacity(lines.len());
    for (k, line) in lines.iter().enumerate() {
        let mut crossings: Vec<(f64, usize, Event)> = Vec::new();
        for mi in 0..ms.len() {
            if let Some(c) = &resolved.crossings[mi][k] {
                crossings.push((c.t(), mi, *c));
            }
        }
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));

        let mut jumps = Vec::new();
        let mut current = bases[k];
        let mut found_line: Option<usize> = None;
        let mut nulled: BTreeSet<usize> = BTreeSet::new();
        let mut i = 0;
        while i < crossings.len() {
            let t = crossings[i].0;
            let at = crossings[i].2;
            while i < crossings.len() && crossings[i].0 == t {
                let mi = crossings[i].1;
                match ms[mi].outcome {
                    Outcome::Found => found_line = Some(resolved.targets[mi]),
                    Outcome::Null => {
                        nulled.insert(resolved.targets[mi]);
                    }
                }
                i += 1;
            }
            let value = posterior(bases, found_line, &nulled, k);
            if value != current {
                current = value;
                jumps.push(WeightJump { at, to: value });
            }
        }
        out.push(LineProfile {
            id: line.id().to_string(),
            base: bases[k],
            jumps,
        });
    }
    Ok(WeightMap { lines: out })
}

/// Apply one measurement on top of the structure built so far. `weights`
/// supplies the pre-collapse distribution (its per-line bases); the
/// returned map reflects `prior` plus `m` in conjunction.
pub fn apply_measurement(
    sc: &Scenario,
    weights: &WeightMap,
    m: &MeasurementEvent,
    prior: &[MeasurementEvent],
) -> Result<WeightMap, CollapseError> {
    let mut all: Vec<MeasurementEvent> = prior.to_vec();
    all.push(m.clone());
    let bases = weights.bases();
    let resolved = resolve(&sc.worldlines, |id| sc.line_index(id), &all)?;
    check_apices(sc, &all, &resolved)?;
    build_map(&sc.worldlines, &bases, &all, &resolved)
}

/// Fold a list of measurements into a weight map. Spacelike-separated
/// measurements on distinct targets commute exactly; nested stacks come out
/// in their causal order automatically.
pub fn sequential_apply(
    sc: &Scenario,
    measurements: &[MeasurementEvent],
) -> Result<WeightMap, CollapseError> {
    let resolved = resolve(&sc.worldlines, |id| sc.line_index(id), measurements)?;
    check_apices(sc, measurements, &resolved)?;
    build_map(&sc.worldlines, &sc.weights, measurements, &resolved)
}

fn check_apices(
    sc: &Scenario,
    ms: &[MeasurementEvent],
    resolved: &ResolvedMeasurements,
) -> Result<(), CollapseError> {
    for (mi, m) in ms.iter().enumerate() {
        let ti = resolved.targets[mi];
        if !sc.worldlines[ti].contains_event(&m.apex, 1e-9) {
            return Err(CollapseError::ApexOffTarget {
                index: mi,
                apex: m.apex,
                target: m.target.clone(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Worldline;

    fn two_cards() -> Scenario {
        let lines = vec![
            Worldline::at_rest("left", &[0.0]),
            Worldline::at_rest("right", &[1.0]),
        ];
        Scenario::uniform(lines).unwrap()
    }

    fn found(apex: Event, target: &str) -> MeasurementEvent {
        MeasurementEvent::new(apex, target, Outcome::Found)
    }

    fn null(apex: Event, target: &str) -> MeasurementEvent {
        MeasurementEvent::new(apex, target, Outcome::Null)
    }

    #[test]
    fn found_collapses_partner_at_cone_crossing() {
        let sc = two_cards();
        let m = found(Event::d1(0.0, 0.0), "left");
        let map = sequential_apply(&sc, &[m]).unwrap();

        // Left: 1 above the apex.
        assert_eq!(map.lines[0].jumps.len(), 1);
        assert_eq!(map.lines[0].jumps[0].to, 1.0);
        assert_eq!(map.lines[0].jumps[0].at.t(), 0.0);
        // Right: 0 above D = (-1, 1).
        assert_eq!(map.lines[1].jumps.len(), 1);
        assert_eq!(map.lines[1].jumps[0].to, 0.0);
        assert!((map.lines[1].jumps[0].at.t() - (-1.0)).abs() < 1e-12);
        assert!((map.lines[1].jumps[0].at.x()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_renormalizes_partner_by_the_complement_rule() {
        let sc = two_cards();
        let m = null(Event::d1(0.0, 0.0), "left");
        let map = sequential_apply(&sc, &[m]).unwrap();
        assert_eq!(map.lines[0].jumps[0].to, 0.0);
        assert_eq!(map.lines[1].jumps[0].to, 1.0);
    }

    #[test]
    fn fifty_two_cards_single_null() {
        let lines: Vec<Worldline> = (0..52)
            .map(|i| Worldline::at_rest(format!("c{i}"), &[i as f64]))
            .collect();
        let sc = Scenario::uniform(lines).unwrap();
        let m = null(Event::d1(0.0, 7.0), "c7");
        let map = sequential_apply(&sc, &[m]).unwrap();
        assert_eq!(map.lines[7].jumps[0].to, 0.0);
        for k in (0..52).filter(|&k| k != 7) {
            let v = map.lines[k].jumps[0].to;
            assert!((v - 1.0 / 51.0).abs() < 1e-15, "line {k}: {v}");
        }
    }

    #[test]
    fn null_on_zero_weight_line_changes_nothing() {
        let lines = vec![
            Worldline::at_rest("a", &[0.0]),
            Worldline::at_rest("b", &[1.0]),
            Worldline::at_rest("c", &[2.0]),
        ];
        let sc = Scenario::new(lines, vec![0.0, 0.5, 0.5], vec![]).unwrap();
        let map = sequential_apply(&sc, &[null(Event::d1(0.0, 0.0), "a")]).unwrap();
        for l in &map.lines {
            assert!(l.jumps.is_empty(), "expected no-op, got {:?}", l.jumps);
        }
    }

    #[test]
    fn empty_measurement_list_is_identity() {
        let sc = two_cards();
        let map = sequential_apply(&sc, &[]).unwrap();
        assert_eq!(map, WeightMap::initial(&sc));
    }

    #[test]
    fn double_inspection_matches_the_joint_pattern() {
        // Inspections at A = (0,0) on the left and B = (0,1) on the right,
        // card found at A. The left line rises to 1 already at C = (-1, 0),
        // the right line drops to 0 at D = (-1, 1).
        let sc = two_cards();
        let ms = [
            found(Event::d1(0.0, 0.0), "left"),
            null(Event::d1(0.0, 1.0), "right"),
        ];
        let map = sequential_apply(&sc, &ms).unwrap();

        assert_eq!(map.lines[0].jumps.len(), 1);
        assert!((map.lines[0].jumps[0].at.t() - (-1.0)).abs() < 1e-12);
        assert_eq!(map.lines[0].jumps[0].to, 1.0);

        assert_eq!(map.lines[1].jumps.len(), 1);
        assert!((map.lines[1].jumps[0].at.t() - (-1.0)).abs() < 1e-12);
        assert_eq!(map.lines[1].jumps[0].to, 0.0);
    }

    #[test]
    fn spacelike_measurements_commute_exactly() {
        let sc = two_cards();
        let m1 = found(Event::d1(0.0, 0.0), "left");
        let m2 = null(Event::d1(0.0, 1.0), "right");
        let ab = sequential_apply(&sc, &[m1.clone(), m2.clone()]).unwrap();
        let ba = sequential_apply(&sc, &[m2, m1]).unwrap();
        assert_eq!(ab.canonicalized(), ba.canonicalized());
        assert_eq!(ab, ba);
    }

    #[test]
    fn two_found_is_inconsistent() {
        let sc = two_cards();
        let ms = [
            found(Event::d1(0.0, 0.0), "left"),
            found(Event::d1(0.0, 1.0), "right"),
        ];
        assert!(matches!(
            sequential_apply(&sc, &ms),
            Err(CollapseError::TwoFound { .. })
        ));
    }

    #[test]
    fn found_then_null_on_same_card_is_inconsistent() {
        let sc = two_cards();
        let ms = [
            found(Event::d1(0.0, 0.0), "left"),
            null(Event::d1(2.0, 0.0), "left"),
        ];
        assert!(matches!(
            sequential_apply(&sc, &ms),
            Err(CollapseError::FoundAndNullSameLine { .. })
        ));
    }

    #[test]
    fn null_on_certain_card_is_inconsistent() {
        let lines = vec![
            Worldline::at_rest("a", &[0.0]),
            Worldline::at_rest("b", &[1.0]),
        ];
        let sc = Scenario::new(lines, vec![1.0, 0.0], vec![]).unwrap();
        assert!(matches!(
            sequential_apply(&sc, &[null(Event::d1(0.0, 0.0), "a")]),
            Err(CollapseError::NullOnCertainLine { .. })
        ));
    }

    #[test]
    fn found_on_excluded_card_is_inconsistent() {
        let lines = vec![
            Worldline::at_rest("a", &[0.0]),
            Worldline::at_rest("b", &[1.0]),
        ];
        let sc = Scenario::new(lines, vec![0.0, 1.0], vec![]).unwrap();
        assert!(matches!(
            sequential_apply(&sc, &[found(Event::d1(0.0, 0.0), "a")]),
            Err(CollapseError::FoundOnExcludedLine { .. })
        ));
    }

    #[test]
    fn exhausting_nulls_are_inconsistent() {
        // With spanning lines, the later inspection always sees the earlier
        // collapse, so the contradiction surfaces as a null on a card whose
        // weight has already risen to 1.
        let sc = two_cards();
        let ms = [
            null(Event::d1(0.0, 0.0), "left"),
            null(Event::d1(0.0, 1.0), "right"),
        ];
        assert!(matches!(
            sequential_apply(&sc, &ms),
            Err(CollapseError::NullOnCertainLine { .. } | CollapseError::AllExcluded)
        ));
    }

    #[test]
    fn uncollapsed_region_weights_never_move() {
        let sc = two_cards();
        let ms = [
            found(Event::d1(0.0, 0.0), "left"),
            null(Event::d1(0.0, 1.0), "right"),
        ];
        let map = sequential_apply(&sc, &ms).unwrap();
        // Deep past sits inside every absolute past; the base survives.
        for k in 0..2 {
            assert_eq!(map.value_on_line_at(k, -50.0), 0.5);
        }
        // Exactly at a breakpoint the pre-jump value is read.
        assert_eq!(map.value_on_line_at(0, -1.0), 0.5);
    }

    #[test]
    fn apply_measurement_extends_the_structure() {
        let sc = two_cards();
        let m1 = found(Event::d1(0.0, 0.0), "left");
        let m2 = null(Event::d1(0.0, 1.0), "right");
        let step1 = apply_measurement(&sc, &WeightMap::initial(&sc), &m1, &[]).unwrap();
        let step2 = apply_measurement(&sc, &step1, &m2, &[m1.clone()]).unwrap();
        let joint = sequential_apply(&sc, &[m1, m2]).unwrap();
        assert_eq!(step2, joint);
    }

    #[test]
    fn untouched_line_outside_the_past() {
        // A line beginning in the apex's ambiguous region never crosses the
        // cone and keeps its weight.
        let lines = vec![
            Worldline::at_rest("a", &[0.0]),
            Worldline::at_rest("b", &[1.0]),
            Worldline::new(
                "latecomer",
                vec![Event::d1(0.5, 4.0), Event::d1(2.0, 4.0)],
                None,
                Some(vec![0.0]),
            )
            .unwrap(),
        ];
        let sc = Scenario::new(lines, vec![0.25, 0.25, 0.5], vec![]).unwrap();
        let map = sequential_apply(&sc, &[null(Event::d1(0.0, 0.0), "a")]).unwrap();
        assert!(map.lines[2].jumps.is_empty());
        assert_eq!(map.value_on_line_at(2, 1.0), 0.5);
    }
}
