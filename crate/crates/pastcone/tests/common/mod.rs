//! Shared generators for the integration suites: randomized but seeded
//! collapse scenarios with consistent outcomes.

use pastcone::collapse::{
    sequential_apply, transit_ledger, MeasurementEvent, Outcome, Scenario, TransitLedger,
    WeightMap,
};
use pastcone::geometry::Worldline;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random 1+1 dimensional card scenario: 2..=52 lines (some moving),
/// 1..=5 measurements on distinct targets whose outcomes come from a hidden
/// uniform placement, so they are always mutually consistent.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=52usize);
    let spacing = rng.random_range(0.5..2.0f64);
    let mut lines = Vec::with_capacity(n);
    for k in 0..n {
        let x0 = k as f64 * spacing + rng.random_range(-0.2..0.2) * spacing;
        if rng.random_bool(0.3) {
            let v = rng.random_range(-0.9..0.9f64);
            lines.push(Worldline::uniform(format!("card{k}"), 0.0, &[x0], &[v]).unwrap());
        } else {
            lines.push(Worldline::at_rest(format!("card{k}"), &[x0]));
        }
    }

    let queen = rng.random_range(0..n);
    let m = rng.random_range(1..=5usize.min(n - 1));
    let mut targets: Vec<usize> = Vec::new();
    while targets.len() < m {
        let t = rng.random_range(0..n);
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    let measurements = targets
        .iter()
        .map(|&k| {
            let t = rng.random_range(-1.0..3.0f64);
            let apex = lines[k].event_at(t).expect("lines span all time");
            let outcome = if k == queen {
                Outcome::Found
            } else {
                Outcome::Null
            };
            MeasurementEvent::new(apex, lines[k].id().to_string(), outcome)
        })
        .collect();

    Scenario::new(lines, vec![1.0 / n as f64; n], measurements).expect("generated scenario valid")
}

/// Collapse the scenario's measurements into a final map and its transit
/// ledger.
pub fn collapse_all(sc: &Scenario) -> (WeightMap, TransitLedger) {
    let map = sequential_apply(sc, &sc.measurements).expect("consistent by construction");
    let ledger = transit_ledger(sc, &WeightMap::initial(sc), &map, &sc.measurements)
        .expect("jumps lie on cones");
    (map, ledger)
}
