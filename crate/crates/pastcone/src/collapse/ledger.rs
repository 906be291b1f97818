use super::weights::{posterior, resolve, ResolvedMeasurements};
use super::{CollapseError, MeasurementEvent, Outcome, Scenario, WeightMap};
use crate::geometry::{CausalClass, Event, LightCone, Worldline, DEFAULT_EPS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Signed probability in transit along null generators of the collapse
/// cones. Together with the worldline weights it makes the total on every
/// spacelike slice come out to 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitLedger {
    pub entries: Vec<TransitEntry>,
}

/// One constant-weight stretch of a null generator, running from `from` up
/// to `to` on the past cone of measurement `measurement`. Where a generator
/// pierces another measurement's cone its carried weight changes, so a
/// single jump can contribute several stretches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitEntry {
    pub measurement: usize,
    pub line: String,
    pub from: Event,
    pub to: Event,
    pub weight: f64,
}

impl TransitLedger {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Build the in-transit ledger for a collapse. `before` supplies the
/// pre-collapse distribution; `after` is validated against the cone
/// structure (every jump must sit on some measurement's past cone, or be an
/// apex jump on the target line).
pub fn transit_ledger(
    sc: &Scenario,
    before: &WeightMap,
    after: &WeightMap,
    measurements: &[MeasurementEvent],
) -> Result<TransitLedger, CollapseError> {
    let resolved = resolve(&sc.worldlines, |id| sc.line_index(id), measurements)?;
    validate_jumps_on_cones(sc, after, measurements, &resolved)?;
    let bases = before.bases();
    build_ledger(&sc.worldlines, &bases, measurements, &resolved)
}

fn validate_jumps_on_cones(
    sc: &Scenario,
    after: &WeightMap,
    ms: &[MeasurementEvent],
    resolved: &ResolvedMeasurements,
) -> Result<(), CollapseError> {
    for (k, profile) in after.lines.iter().enumerate() {
        for jump in &profile.jumps {
            let on_some_cone = ms.iter().enumerate().any(|(mi, m)| {
                let scale = m.apex.scale_with(&jump.at).max(1.0);
                let g = (jump.at.t() - m.apex.t()) + m.apex.spatial_distance(&jump.at);
                g.abs() <= 1e-9 * scale || resolved.targets[mi] == k && jump.at == m.apex
            });
            if !on_some_cone {
                return Err(CollapseError::JumpOffCone {
                    at: jump.at,
                    line: sc.worldlines[k].id().to_string(),
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn build_ledger(
    lines: &[Worldline],
    bases: &[f64],
    ms: &[MeasurementEvent],
    resolved: &ResolvedMeasurements,
) -> Result<TransitLedger, CollapseError> {
    let mut entries = Vec::new();
    for (mi, m) in ms.iter().enumerate() {
        for (k, line) in lines.iter().enumerate() {
            if resolved.targets[mi] == k {
                continue; // apex jumps stay on the line, nothing in transit
            }
            let Some(q) = &resolved.crossings[mi][k] else {
                continue; // line never reaches this absolute past
            };
            let scale = m.apex.scale_with(q).max(1.0);
            let atol = 1e-12 * scale;
            let dt = m.apex.t() - q.t();
            if dt <= atol {
                continue; // zero-length generator
            }
            let ray = Worldline::new(
                format!("generator:{mi}:{}", line.id()),
                vec![*q, m.apex],
                None,
                None,
            )?;

            // Points where the generator pierces other cones; the carried
            // weight changes there.
            let mut cuts: Vec<Event> = Vec::new();
            for (mj, other) in ms.iter().enumerate() {
                if mj == mi {
                    continue;
                }
                if let Some(x) = LightCone::past_of(other.apex).cross_worldline(&ray) {
                    if x.t() > q.t() + atol && x.t() < m.apex.t() - atol {
                        cuts.push(x);
                    }
                }
            }
            cuts.sort_by(|a, b| a.t().partial_cmp(&b.t()).expect("finite"));
            cuts.dedup_by(|a, b| (a.t() - b.t()).abs() <= atol);

            let mut nodes = Vec::with_capacity(cuts.len() + 2);
            nodes.push(*q);
            nodes.extend(cuts);
            nodes.push(m.apex);

            let seg = ray.segments()[0];
            for pair in nodes.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let t_mid = 0.5 * (lo.t() + hi.t());
                let mid = seg.position_at(t_mid);

                // Outcomes already applied at this stretch, not counting
                // this measurement's own cone the stretch is riding on.
                let mut found_line = None;
                let mut nulled = BTreeSet::new();
                for (mj, other) in ms.iter().enumerate() {
                    if mj == mi {
                        continue;
                    }
                    let applied = !matches!(
                        other.apex.classify(&mid, DEFAULT_EPS),
                        CausalClass::AbsolutePast
                            | CausalClass::PastLightCone
                            | CausalClass::Coincident
                    );
                    if applied {
                        match other.outcome {
                            Outcome::Found => found_line = Some(resolved.targets[mj]),
                            Outcome::Null => {
                                nulled.insert(resolved.targets[mj]);
                            }
                        }
                    }
                }
                let below = posterior(bases, found_line, &nulled, k);
                let above = {
                    let mut nulled = nulled.clone();
                    let mut found_line = found_line;
                    match m.outcome {
                        Outcome::Found => found_line = Some(resolved.targets[mi]),
                        Outcome::Null => {
                            nulled.insert(resolved.targets[mi]);
                        }
                    }
                    posterior(bases, found_line, &nulled, k)
                };
                let weight = below - above;
                if weight != 0.0 {
                    entries.push(TransitEntry {
                        measurement: mi,
                        line: line.id().to_string(),
                        from: lo,
                        to: hi,
                        weight,
                    });
                }
            }
        }
    }
    Ok(TransitLedger { entries })
}

/// Diagnostic: every endpoint of the flow network balances. Jump points
/// emit exactly the weight the line loses, apices absorb exactly the target
/// jump, and interior junctions cancel. Returns a description of the first
/// imbalance found.
pub fn verify_flow_balance(
    map: &WeightMap,
    ledger: &TransitLedger,
    tol: f64,
) -> Result<(), String> {
    // Node flux: arriving minus departing transit weight, plus the line
    // jump absorbed there, must vanish.
    #[derive(Default)]
    struct Flux {
        arriving: f64,
        departing: f64,
        jump: f64,
    }
    let mut nodes: Vec<(Event, Flux)> = Vec::new();
    let scale = {
        let mut s: f64 = 1.0;
        for e in ledger
            .entries
            .iter()
            .flat_map(|en| [en.from, en.to])
        {
            s = s.max(e.t().abs());
            for &c in e.x() {
                s = s.max(c.abs());
            }
        }
        s
    };
    let atol = 1e-9 * scale;
    let mut touch = |at: Event, f: &mut dyn FnMut(&mut Flux)| {
        for (e, flux) in nodes.iter_mut() {
            if (e.t() - at.t()).abs() <= atol && e.spatial_distance(&at) <= atol {
                f(flux);
                return;
            }
        }
        let mut flux = Flux::default();
        f(&mut flux);
        nodes.push((at, flux));
    };

    for en in &ledger.entries {
        touch(en.from, &mut |f| f.departing += en.weight);
        touch(en.to, &mut |f| f.arriving += en.weight);
    }
    for profile in &map.lines {
        let mut prev = profile.base;
        for jump in &profile.jumps {
            let delta = jump.to - prev;
            prev = jump.to;
            touch(jump.at, &mut |f| f.jump += delta);
        }
    }

    for (e, flux) in &nodes {
        let net = flux.arriving - flux.departing - flux.jump;
        if net.abs() > tol {
            return Err(format!(
                "flux imbalance {net:+.3e} at {e:?} (arriving {}, departing {}, jump {})",
                flux.arriving, flux.departing, flux.jump
            ));
        }
    }
    Ok(())
}
