//! The card game over scattered worldlines: dealing, inspection schedules,
//! collapse evolution, an exact enumeration oracle, Monte Carlo frequency
//! checks, and the insider-trading fairness test for schedules.

use crate::collapse::{
    apply_measurement, transit_ledger, CollapseError, MeasurementEvent, Outcome, Scenario,
    TransitLedger, WeightMap,
};
use crate::geometry::{
    CausalClass, Event, GeometryError, GraphSurface, Worldline, DEFAULT_EPS,
};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("collapse: {0}")]
    Collapse(#[from] CollapseError),
    #[error("a deal needs at least two cards, got {0}")]
    TooFewCards(usize),
    #[error("cards `{0}` and `{1}` share a location")]
    DuplicateLocations(String, String),
    #[error("fairness needs at least two inspections")]
    TooFewInspections,
    #[error("schedule is unfair: inspections {first} and {second} are timelike-ordered")]
    UnfairSchedule { first: usize, second: usize },
    #[error("inspection {index} does not lie on worldline `{line}`")]
    InspectionOffLine { index: usize, line: String },
    #[error("null set excludes every card")]
    AllCardsExcluded,
    #[error("null set names card {0} outside the deal of {1}")]
    NullOutOfRange(usize, usize),
    #[error("monte carlo needs at least one trial")]
    NoTrials,
}

/// A dealt game: cards on worldlines, each carrying weight `1/n`, with the
/// winning card's location fixed (but hidden) at deal time.
#[derive(Clone, Debug)]
pub struct Deal {
    pub scenario: Scenario,
    pub seed: u64,
    queen: usize,
}

impl Deal {
    pub fn n(&self) -> usize {
        self.scenario.line_count()
    }

    /// The hidden truth; inspect through `run_schedule` instead to play
    /// fair.
    pub fn queen_index(&self) -> usize {
        self.queen
    }
}

/// Deal the winning card uniformly among `locations` under `seed`.
pub fn deal(locations: Vec<Worldline>, seed: u64) -> Result<Deal, GameError> {
    let n = locations.len();
    if n < 2 {
        return Err(GameError::TooFewCards(n));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let t_ref = locations[i].vertices()[0]
                .t()
                .max(locations[j].vertices()[0].t());
            if let (Some(a), Some(b)) = (locations[i].event_at(t_ref), locations[j].event_at(t_ref))
            {
                let scale = a.scale_with(&b).max(1.0);
                if a.spatial_distance(&b) <= 1e-9 * scale {
                    return Err(GameError::DuplicateLocations(
                        locations[i].id().to_string(),
                        locations[j].id().to_string(),
                    ));
                }
            }
        }
    }
    let queen = ChaCha8Rng::seed_from_u64(seed).random_range(0..n);
    let scenario = Scenario::uniform(locations)?;
    Ok(Deal {
        scenario,
        seed,
        queen,
    })
}

/// Cards at rest at x = 0, 1, ..., n-1.
pub fn standard_deal(n: usize, seed: u64) -> Result<Deal, GameError> {
    let lines = (0..n)
        .map(|i| Worldline::at_rest(format!("card{i}"), &[i as f64]))
        .collect();
    deal(lines, seed)
}

/// An ordered list of inspection points, each on its card's worldline.
#[derive(Clone, Debug)]
pub struct InspectionSchedule {
    pub stops: Vec<(Event, String)>,
}

impl InspectionSchedule {
    pub fn new(stops: Vec<(Event, String)>) -> Self {
        InspectionSchedule { stops }
    }

    /// Inspect every card of a standard deal at the same coordinate time.
    pub fn simultaneous(deal: &Deal, t: f64) -> Result<Self, GameError> {
        let mut stops = Vec::new();
        for line in &deal.scenario.worldlines {
            let e = line.event_at(t).ok_or_else(|| GameError::InspectionOffLine {
                index: stops.len(),
                line: line.id().to_string(),
            })?;
            stops.push((e, line.id().to_string()));
        }
        Ok(InspectionSchedule { stops })
    }
}

/// The trace of a played game: the weight map after each inspection, the
/// final map with its transit ledger, and where (or whether) the card
/// turned up.
#[derive(Clone, Debug)]
pub struct GameRun {
    pub measurements: Vec<MeasurementEvent>,
    pub steps: Vec<WeightMap>,
    pub final_map: WeightMap,
    pub ledger: TransitLedger,
    pub found_at: Option<usize>,
}

/// Play out a schedule against the hidden truth, collapsing as we go and
/// stopping at the first Found. Unfair schedules are rejected unless
/// `force` is set.
pub fn run_schedule(
    deal: &Deal,
    schedule: &InspectionSchedule,
    force: bool,
) -> Result<GameRun, GameError> {
    if !force && schedule.stops.len() >= 2 {
        let report = fairness_check(schedule)?;
        if let FairnessVerdict::Unfair { first, second, .. } = report.verdict {
            return Err(GameError::UnfairSchedule { first, second });
        }
    }
    for (index, (at, line)) in schedule.stops.iter().enumerate() {
        let k = deal
            .scenario
            .line_index(line)
            .ok_or(CollapseError::UnknownTarget(line.clone()))?;
        if !deal.scenario.worldlines[k].contains_event(at, 1e-9) {
            return Err(GameError::InspectionOffLine {
                index,
                line: line.clone(),
            });
        }
    }

    let mut measurements: Vec<MeasurementEvent> = Vec::new();
    let mut steps = Vec::new();
    let mut map = WeightMap::initial(&deal.scenario);
    let mut found_at = None;
    for (at, line) in &schedule.stops {
        let k = deal.scenario.line_index(line).expect("validated above");
        let outcome = if k == deal.queen {
            Outcome::Found
        } else {
            Outcome::Null
        };
        let m = MeasurementEvent::new(*at, line.clone(), outcome);
        map = apply_measurement(&deal.scenario, &map, &m, &measurements)?;
        measurements.push(m);
        steps.push(map.clone());
        if outcome == Outcome::Found {
            found_at = Some(k);
            break; // the collapse process has come to its end
        }
    }
    let ledger = transit_ledger(
        &deal.scenario,
        &WeightMap::initial(&deal.scenario),
        &map,
        &measurements,
    )?;
    Ok(GameRun {
        measurements,
        steps,
        final_map: map,
        ledger,
        found_at,
    })
}

/// Exact posterior over card positions after a set of null inspections,
/// by brute-force enumeration of every placement in rational arithmetic.
pub fn oracle_posterior(
    n: usize,
    null_set: &BTreeSet<usize>,
) -> Result<Vec<Ratio<u64>>, GameError> {
    if n < 2 {
        return Err(GameError::TooFewCards(n));
    }
    if let Some(&bad) = null_set.iter().find(|&&i| i >= n) {
        return Err(GameError::NullOutOfRange(bad, n));
    }
    // Every placement of the winning card is equally likely a priori;
    // condition on it being none of the nulled ones.
    let mut survivors = vec![false; n];
    let mut count = 0u64;
    for placement in 0..n {
        if !null_set.contains(&placement) {
            survivors[placement] = true;
            count += 1;
        }
    }
    if count == 0 {
        return Err(GameError::AllCardsExcluded);
    }
    Ok(survivors
        .into_iter()
        .map(|alive| Ratio::new(u64::from(alive), count))
        .collect())
}

/// Schedule fairness against insider trading.
#[derive(Clone, Debug, PartialEq)]
pub enum FairnessVerdict {
    /// All inspection points mutually spacelike: a common spacelike
    /// hypersurface through all of them exists (and is constructed).
    Fair,
    /// The limiting case: every other inspection sits on one point's past
    /// light cone.
    FairBoundary { cone_apex: usize },
    /// Some pair is causally ordered; the first offender is reported.
    Unfair {
        first: usize,
        second: usize,
        reason: String,
    },
}

#[derive(Clone, Debug)]
pub struct FairnessReport {
    pub verdict: FairnessVerdict,
    /// For Fair verdicts, a spacelike graph surface through every
    /// inspection point: constructive evidence, not just an existence
    /// claim.
    pub witness: Option<GraphSurface>,
}

/// Classify a schedule: Fair iff all pairs are mutually spacelike,
/// FairBoundary iff all points lie on one inspection's past light cone,
/// Unfair otherwise. Mutually lightlike points that do not share a common
/// cone are unfair; the reason string records that case.
pub fn fairness_check(schedule: &InspectionSchedule) -> Result<FairnessReport, GameError> {
    let stops = &schedule.stops;
    if stops.len() < 2 {
        return Err(GameError::TooFewInspections);
    }
    let mut lightlike_pairs = Vec::new();
    for i in 0..stops.len() {
        for j in (i + 1)..stops.len() {
            match stops[i].0.classify(&stops[j].0, DEFAULT_EPS) {
                CausalClass::AbsoluteFuture | CausalClass::AbsolutePast => {
                    return Ok(FairnessReport {
                        verdict: FairnessVerdict::Unfair {
                            first: i,
                            second: j,
                            reason: "timelike-ordered pair".into(),
                        },
                        witness: None,
                    });
                }
                CausalClass::PastLightCone | CausalClass::FutureLightCone => {
                    lightlike_pairs.push((i, j));
                }
                CausalClass::Ambiguous | CausalClass::Coincident => {}
            }
        }
    }
    if lightlike_pairs.is_empty() {
        let witness = witness_surface(stops);
        return Ok(FairnessReport {
            verdict: FairnessVerdict::Fair,
            witness: Some(witness),
        });
    }
    // Limiting case: all points on one past light cone.
    for apex in 0..stops.len() {
        let all_on_cone = (0..stops.len()).filter(|&i| i != apex).all(|i| {
            stops[apex].0.classify(&stops[i].0, DEFAULT_EPS) == CausalClass::PastLightCone
        });
        if all_on_cone {
            return Ok(FairnessReport {
                verdict: FairnessVerdict::FairBoundary { cone_apex: apex },
                witness: None,
            });
        }
    }
    let (first, second) = lightlike_pairs[0];
    Ok(FairnessReport {
        verdict: FairnessVerdict::Unfair {
            first,
            second,
            reason: "lightlike pair not on a common past cone".into(),
        },
        witness: None,
    })
}

/// Spacelike surface through all inspection points: the lower envelope of
/// their future cones, relaxed to slope 0.99 (or halfway between the
/// steepest pair and 1 when pairs run closer to null than that).
fn witness_surface(stops: &[(Event, String)]) -> GraphSurface {
    let mut steepest: f64 = 0.0;
    for i in 0..stops.len() {
        for j in (i + 1)..stops.len() {
            let (a, b) = (&stops[i].0, &stops[j].0);
            let dx = a.spatial_distance(b);
            if dx > 0.0 {
                steepest = steepest.max((b.t() - a.t()).abs() / dx);
            }
        }
    }
    let slope = (0.99f64).max(0.5 * (1.0 + steepest)).min(0.9999);
    let points: Vec<(f64, Vec<f64>)> = stops
        .iter()
        .map(|(e, _)| (e.t(), e.x().to_vec()))
        .collect();
    let pts = points.clone();
    let f = move |x: &[f64]| -> f64 {
        pts.iter()
            .map(|(t, px)| {
                let d2: f64 = x
                    .iter()
                    .zip(px.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                t + slope * d2.sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    GraphSurface::custom(
        Arc::new(f),
        slope,
        format!("fairness_witness(slope={slope:.4};points={})", points.len()),
    )
}

/// Empirical Found-location frequencies against the dealt weights.
#[derive(Clone, Debug)]
pub struct FrequencyTable {
    pub trials: u64,
    pub counts: Vec<u64>,
    pub not_found: u64,
    pub frequencies: Vec<f64>,
    pub expected: Vec<f64>,
    /// Largest |frequency - expected| over the inspected cards.
    pub max_deviation: f64,
    /// Binomial three-sigma bound for the expected weights.
    pub three_sigma: f64,
    pub pass: bool,
}

impl FrequencyTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("card,count,frequency,expected\n");
        for (k, (&c, (&f, &e))) in self
            .counts
            .iter()
            .zip(self.frequencies.iter().zip(self.expected.iter()))
            .enumerate()
        {
            out.push_str(&format!(
                "{k},{c},{},{}\n",
                crate::audit::format_significant(f, 12),
                crate::audit::format_significant(e, 12)
            ));
        }
        out
    }
}

/// Repeat the game `trials` times with fresh deals, inspecting lines in the
/// template order until the card is found. Trial `i` draws from stream `i`
/// of `seed`, so runs are reproducible and order-independent.
pub fn monte_carlo(
    n: usize,
    inspect_order: &[usize],
    trials: u64,
    seed: u64,
) -> Result<FrequencyTable, GameError> {
    if n < 2 {
        return Err(GameError::TooFewCards(n));
    }
    if trials == 0 {
        return Err(GameError::NoTrials);
    }
    let mut counts = vec![0u64; n];
    let mut not_found = 0u64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial.wrapping_add(1));
        let queen = rng.random_range(0..n);
        // The outcome is fixed at deal time; inspection order only decides
        // when it surfaces.
        if inspect_order.contains(&queen) {
            counts[queen] += 1;
        } else {
            not_found += 1;
        }
    }
    let expected: Vec<f64> = (0..n)
        .map(|k| {
            if inspect_order.contains(&k) {
                1.0 / n as f64
            } else {
                0.0
            }
        })
        .collect();
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    let mut max_deviation: f64 = 0.0;
    let mut pass = true;
    let mut three_sigma: f64 = 0.0;
    for k in 0..n {
        let p = expected[k];
        if p == 0.0 {
            continue;
        }
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        three_sigma = three_sigma.max(3.0 * sigma);
        let dev = (frequencies[k] - p).abs();
        max_deviation = max_deviation.max(dev);
        if dev > 3.0 * sigma {
            pass = false;
        }
    }
    Ok(FrequencyTable {
        trials,
        counts,
        not_found,
        frequencies,
        expected,
        max_deviation,
        three_sigma,
        pass,
    })
}

/// Fold a run's final weights into a plain vector, read far above every
/// cone.
pub fn final_weights(run: &GameRun, deal: &Deal) -> Vec<f64> {
    let (_, t_hi) = deal.scenario.time_bounds();
    let bounds = deal.scenario.spatial_bounds();
    let mut diam: f64 = 1.0;
    for i in 0..bounds.dim {
        diam = diam.max(bounds.max[i] - bounds.min[i]);
    }
    let far = t_hi + 2.0 * diam + 1.0;
    (0..deal.scenario.line_count())
        .map(|k| run.final_map.value_on_line_at(k, far))
        .collect()
}
