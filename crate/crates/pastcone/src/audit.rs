//! Probability-conservation audits: slice totals with the transit ledger,
//! the failure of naive instantaneous collapse under boosts, reproducible
//! random spacelike surfaces, and the infinite-light-speed limit.

use crate::collapse::{CollapseError, Outcome, Scenario, TransitLedger, WeightMap};
use crate::geometry::{
    Boost, Event, GeometryError, GraphSurface, Hypersurface, SpatialBounds,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

/// Default absolute tolerance on audit totals.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("collapse: {0}")]
    Collapse(#[from] CollapseError),
    #[error("surface is not spacelike: {0}")]
    NonSpacelike(String),
    #[error("light speed must be positive, got {0}")]
    BadLightSpeed(f64),
    #[error("light-speed values must be strictly increasing")]
    CValuesNotIncreasing,
}

/// A single crossing of the audited surface with a worldline.
#[derive(Clone, Debug, Serialize)]
pub struct LineCrossing {
    pub line: String,
    pub at: Event,
    pub weight: f64,
}

/// A crossed in-transit generator stretch.
#[derive(Clone, Debug, Serialize)]
pub struct TransitCrossing {
    pub measurement: usize,
    pub line: String,
    pub weight: f64,
}

/// Everything a conservation audit saw on one surface.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub surface: String,
    pub crossings: Vec<LineCrossing>,
    pub transit: Vec<TransitCrossing>,
    pub total: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Sum the probability crossing a spacelike surface: worldline weights at
/// their crossings plus every in-transit generator stretch the surface
/// separates. With the ledger included the total is 1 on every admissible
/// surface; without it, only on surfaces avoiding the collapse cones.
pub fn audit_slice(
    sc: &Scenario,
    surface: &Hypersurface,
    map: &WeightMap,
    ledger: &TransitLedger,
    tolerance: f64,
) -> Result<AuditReport, AuditError> {
    let required = sc.spatial_bounds().with_margin(0.1);
    surface.check_spans(&required)?;
    let check = surface.validate_spacelike_in(&required, 0)?;
    if !check.spacelike {
        return Err(AuditError::NonSpacelike(check.diagnostic));
    }

    let mut crossings = Vec::with_capacity(sc.worldlines.len());
    let mut total = 0.0;
    for (k, line) in sc.worldlines.iter().enumerate() {
        let at = surface.cross_worldline(line)?;
        let weight = map.value_on_line_at(k, at.t());
        total += weight;
        crossings.push(LineCrossing {
            line: line.id().to_string(),
            at,
            weight,
        });
    }
    let mut transit = Vec::new();
    for entry in &ledger.entries {
        if surface.separates(&entry.from, &entry.to) {
            total += entry.weight;
            transit.push(TransitCrossing {
                measurement: entry.measurement,
                line: entry.line.clone(),
                weight: entry.weight,
            });
        }
    }
    Ok(AuditReport {
        surface: surface.descriptor(),
        crossings,
        transit,
        total,
        tolerance,
        pass: (total - 1.0).abs() <= tolerance,
    })
}

/// Audit a batch of surfaces concurrently; results keep the input order.
pub fn audit_batch(
    sc: &Scenario,
    surfaces: &[Hypersurface],
    map: &WeightMap,
    ledger: &TransitLedger,
    tolerance: f64,
) -> Vec<Result<AuditReport, AuditError>> {
    surfaces
        .par_iter()
        .map(|s| audit_slice(sc, s, map, ledger, tolerance))
        .collect()
}

/// Both readings of a naive-collapse audit whose slice grazes jump points:
/// taking grazed lines just before their jump, and just after.
#[derive(Clone, Debug)]
pub struct NaiveAudit {
    pub below: AuditReport,
    pub above: AuditReport,
}

impl NaiveAudit {
    /// The side exhibiting the larger conservation violation.
    pub fn worst(&self) -> &AuditReport {
        if (self.above.total - 1.0).abs() > (self.below.total - 1.0).abs() {
            &self.above
        } else {
            &self.below
        }
    }

    pub fn pass(&self) -> bool {
        self.below.pass && self.above.pass
    }
}

/// Audit the *naive* collapse prescription — weights jump on the flat
/// `t = const` plane of each measurement instead of its past cone, with no
/// transit ledger — against the boosted equal-time slice through the first
/// apex. Generic boosts break conservation, which is the point.
pub fn audit_naive_instantaneous(
    sc: &Scenario,
    boost: &Boost,
    tolerance: f64,
) -> Result<NaiveAudit, AuditError> {
    if sc.measurements.is_empty() {
        return Err(AuditError::Collapse(CollapseError::EmptyStructure));
    }
    let pivot = sc.measurements[0].apex;
    let surface = Hypersurface::flat(*boost, boost.boosted_time(&pivot));

    // Naive jump times: every line jumps at each measurement's coordinate
    // time.
    let jump_times: Vec<f64> = sc.measurements.iter().map(|m| m.apex.t()).collect();
    let scale = jump_times
        .iter()
        .fold(1.0f64, |s, t| s.max(t.abs()))
        .max(pivot.scale_with(&pivot));
    let atol = 1e-9 * scale;

    let run = |grazed_after: bool| -> Result<AuditReport, AuditError> {
        let mut crossings = Vec::new();
        let mut total = 0.0;
        for (k, line) in sc.worldlines.iter().enumerate() {
            let at = surface.cross_worldline(line)?;
            let mut found_line = None;
            let mut nulled = std::collections::BTreeSet::new();
            for (mi, m) in sc.measurements.iter().enumerate() {
                let applied = at.t() > jump_times[mi] + atol
                    || ((at.t() - jump_times[mi]).abs() <= atol && grazed_after);
                if applied {
                    let ti = sc.line_index(&m.target).expect("validated target");
                    match m.outcome {
                        Outcome::Found => found_line = Some(ti),
                        Outcome::Null => {
                            nulled.insert(ti);
                        }
                    }
                }
            }
            let weight = crate::collapse::conditioned_weight(&sc.weights, found_line, &nulled, k);
            total += weight;
            crossings.push(LineCrossing {
                line: line.id().to_string(),
                at,
                weight,
            });
        }
        Ok(AuditReport {
            surface: format!(
                "naive:{} grazed={}",
                surface.descriptor(),
                if grazed_after { "above" } else { "below" }
            ),
            crossings,
            transit: Vec::new(),
            total,
            tolerance,
            pass: (total - 1.0).abs() <= tolerance,
        })
    };

    Ok(NaiveAudit {
        below: run(false)?,
        above: run(true)?,
    })
}

/// Families of random audit surfaces.
#[derive(Clone, Copy, Debug)]
pub enum SurfaceFamily {
    /// Flat equal-time slices of random frames with `|v| <= v_max`.
    BoostedFlat { v_max: f64 },
    /// Curved graphs `t = t0 + sum_j a_j |x - c_j|` with total slope
    /// `<= slope_max`.
    LipschitzGraph { slope_max: f64 },
}

impl SurfaceFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceFamily::BoostedFlat { .. } => "boosted_flat",
            SurfaceFamily::LipschitzGraph { .. } => "lipschitz_graph",
        }
    }
}

/// Spacetime window the random surfaces are aimed through.
#[derive(Clone, Copy, Debug)]
pub struct AuditWindow {
    pub spatial: SpatialBounds,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl AuditWindow {
    pub fn of_scenario(sc: &Scenario) -> Self {
        let spatial = sc.spatial_bounds().with_margin(0.25);
        let (t_lo, t_hi) = sc.time_bounds();
        let mut diam: f64 = 1.0;
        for i in 0..spatial.dim {
            diam = diam.max(spatial.max[i] - spatial.min[i]);
        }
        AuditWindow {
            spatial,
            t_lo: t_lo - 0.75 * diam,
            t_hi: t_hi + 0.75 * diam,
        }
    }
}

/// Deterministic random spacelike surfaces: surface `i` is drawn from an
/// independent counter-based stream of `seed`, so any prefix or subset
/// reproduces bit-for-bit.
pub fn random_surfaces(
    seed: u64,
    n: usize,
    family: &SurfaceFamily,
    window: &AuditWindow,
) -> Vec<Hypersurface> {
    (0..n)
        .map(|i| random_surface(seed, i as u64, family, window))
        .collect()
}

fn random_surface(
    seed: u64,
    index: u64,
    family: &SurfaceFamily,
    window: &AuditWindow,
) -> Hypersurface {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    let dim = window.spatial.dim;
    match family {
        SurfaceFamily::BoostedFlat { v_max } => {
            let speed = rng.random_range(0.0..*v_max);
            let dir = random_direction(&mut rng, dim);
            let v: Vec<f64> = dir.iter().map(|d| d * speed).collect();
            let frame = Boost::new(&v).expect("|v| < 1 by construction");
            let pivot = random_point(&mut rng, window, dim);
            Hypersurface::flat(frame, frame.boosted_time(&pivot))
        }
        SurfaceFamily::LipschitzGraph { slope_max } => {
            let kinks = rng.random_range(1..=4usize);
            let slope = rng.random_range(0.25 * slope_max..*slope_max);
            let mut shares: Vec<f64> = (0..kinks)
                .map(|_| rng.random_range(-1.0..1.0f64))
                .collect();
            let norm: f64 = shares.iter().map(|s| s.abs()).sum();
            for s in &mut shares {
                *s *= slope / norm;
            }
            let centers: Vec<Vec<f64>> = (0..kinks)
                .map(|_| {
                    (0..dim)
                        .map(|a| rng.random_range(window.spatial.min[a]..=window.spatial.max[a]))
                        .collect()
                })
                .collect();
            let t0 = rng.random_range(window.t_lo..=window.t_hi);
            let descriptor =
                format!("lipschitz_graph(seed={seed};i={index};slope={slope:.6};kinks={kinks})");
            let f = move |x: &[f64]| -> f64 {
                let mut t = t0;
                for (a, c) in shares.iter().zip(&centers) {
                    let d2: f64 = x
                        .iter()
                        .zip(c.iter())
                        .map(|(xi, ci)| (xi - ci) * (xi - ci))
                        .sum();
                    t += a * d2.sqrt();
                }
                t
            };
            Hypersurface::graph(GraphSurface::custom(Arc::new(f), slope, descriptor))
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![if rng.random_bool(0.5) { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0f64)).collect();
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, window: &AuditWindow, dim: usize) -> Event {
    let t = rng.random_range(window.t_lo..=window.t_hi);
    let x: Vec<f64> = (0..dim)
        .map(|a| rng.random_range(window.spatial.min[a]..=window.spatial.max[a]))
        .collect();
    Event::new(t, &x).expect("window is finite")
}

/// One row of the infinite-light-speed table: where the collapse boundary
/// sits at a given spatial offset from the apex, for a finite light speed.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NewtonianRow {
    pub c: f64,
    pub boundary_time: f64,
    pub lead_time: f64,
}

/// Collapse-boundary times at `offset` from an apex at `apex_time`, for a
/// list of light speeds. As `c` grows the boundary climbs monotonically to
/// the apex time with error `offset / c`, recovering the flat instantaneous
/// collapse.
pub fn newtonian_limit(
    apex_time: f64,
    offset: f64,
    c_values: &[f64],
) -> Result<Vec<NewtonianRow>, AuditError> {
    let mut prev: Option<f64> = None;
    for &c in c_values {
        if !(c > 0.0) {
            return Err(AuditError::BadLightSpeed(c));
        }
        if let Some(p) = prev {
            if c <= p {
                return Err(AuditError::CValuesNotIncreasing);
            }
        }
        prev = Some(c);
    }
    Ok(c_values
        .iter()
        .map(|&c| {
            let lead = offset.abs() / c;
            NewtonianRow {
                c,
                boundary_time: apex_time - lead,
                lead_time: lead,
            }
        })
        .collect())
}

/// Decimal with a fixed number of significant digits; pure function of the
/// input so reports are byte-stable.
pub fn format_significant(x: f64, sig: u32) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", sig as usize - 1, 0.0);
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// One CSV row of a batch audit.
#[derive(Clone, Debug)]
pub struct AuditCsvRow {
    pub surface_id: usize,
    pub family: String,
    pub parameters: String,
    pub total: f64,
    pub pass: bool,
}

/// Render audit rows as CSV: 12 significant digits, LF line endings.
pub fn audit_csv(rows: &[AuditCsvRow]) -> String {
    let mut out = String::from("surface_id,family,parameters,total,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.surface_id,
            r.family,
            r.parameters.replace(',', ";"),
            format_significant(r.total, 12),
            r.pass
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::{sequential_apply, transit_ledger, MeasurementEvent};
    use crate::geometry::Worldline;

    fn two_card_found() -> (Scenario, WeightMap, TransitLedger) {
        let lines = vec![
            Worldline::at_rest("left", &[0.0]),
            Worldline::at_rest("right", &[1.0]),
        ];
        let ms = vec![MeasurementEvent::new(
            Event::d1(0.0, 0.0),
            "left",
            Outcome::Found,
        )];
        let sc = Scenario::new(lines, vec![0.5, 0.5], ms).unwrap();
        let map = sequential_apply(&sc, &sc.measurements).unwrap();
        let ledger =
            transit_ledger(&sc, &WeightMap::initial(&sc), &map, &sc.measurements).unwrap();
        (sc, map, ledger)
    }

    #[test]
    fn ledger_balances_every_slice_height() {
        let (sc, map, ledger) = two_card_found();
        // Below D, between D and the apex, above the apex.
        for tau in [-2.0, -0.5, 1.0] {
            let s = Hypersurface::flat_lab(tau, 1);
            let r = audit_slice(&sc, &s, &map, &ledger, AUDIT_TOL).unwrap();
            assert!(r.pass, "tau={tau}: total={}", r.total);
            assert!((r.total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn middle_slice_fails_without_the_ledger() {
        let (sc, map, _) = two_card_found();
        let empty = TransitLedger::default();
        let s = Hypersurface::flat_lab(-0.5, 1);
        let r = audit_slice(&sc, &s, &map, &empty, AUDIT_TOL).unwrap();
        assert!(!r.pass);
        assert!((r.total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn naive_collapse_consistent_in_its_own_frame() {
        let (sc, _, _) = two_card_found();
        let b = Boost::along_x(0.0, 1).unwrap();
        let audit = audit_naive_instantaneous(&sc, &b, AUDIT_TOL).unwrap();
        assert!(audit.pass(), "{:?}", audit.worst().total);
    }

    #[test]
    fn naive_collapse_violates_conservation_under_boosts() {
        let (sc, _, _) = two_card_found();
        let plus =
            audit_naive_instantaneous(&sc, &Boost::along_x(0.5, 1).unwrap(), AUDIT_TOL).unwrap();
        let minus =
            audit_naive_instantaneous(&sc, &Boost::along_x(-0.5, 1).unwrap(), AUDIT_TOL).unwrap();
        let mut totals = [plus.worst().total, minus.worst().total];
        totals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((totals[0] - 0.5).abs() < 1e-12, "{totals:?}");
        assert!((totals[1] - 1.5).abs() < 1e-12, "{totals:?}");
    }

    #[test]
    fn naive_many_line_deficit() {
        let lines: Vec<Worldline> = (0..52)
            .map(|i| Worldline::at_rest(format!("c{i}"), &[i as f64]))
            .collect();
        let ms = vec![MeasurementEvent::new(
            Event::d1(0.0, 0.0),
            "c0",
            Outcome::Found,
        )];
        let sc = Scenario::new(lines, vec![1.0 / 52.0; 52], ms).unwrap();
        let audit =
            audit_naive_instantaneous(&sc, &Boost::along_x(0.9, 1).unwrap(), AUDIT_TOL).unwrap();
        // Every other line is crossed after its naive jump: only the found
        // card's pre/post values remain.
        assert!(audit.below.total < 1.0);
        assert!(!audit.pass());
    }

    #[test]
    fn random_surfaces_are_valid_and_deterministic() {
        let (sc, _, _) = two_card_found();
        let window = AuditWindow::of_scenario(&sc);
        for family in [
            SurfaceFamily::BoostedFlat { v_max: 0.99 },
            SurfaceFamily::LipschitzGraph { slope_max: 0.999 },
        ] {
            let a = random_surfaces(42, 3, &family, &window);
            let b = random_surfaces(42, 3, &family, &window);
            assert_eq!(a.len(), 3);
            for (s, s2) in a.iter().zip(&b) {
                assert_eq!(s.descriptor(), s2.descriptor());
                assert!(s.validate_spacelike().unwrap().spacelike);
            }
        }
        assert!(
            random_surfaces(42, 0, &SurfaceFamily::BoostedFlat { v_max: 0.5 }, &window)
                .is_empty()
        );
    }

    #[test]
    fn boosted_scenario_still_conserves() {
        let (sc, _, _) = two_card_found();
        let b = Boost::along_x(0.6, 1).unwrap();
        let sb = sc.boosted(&b);
        let map = sequential_apply(&sb, &sb.measurements).unwrap();
        let ledger =
            transit_ledger(&sb, &WeightMap::initial(&sb), &map, &sb.measurements).unwrap();
        let s = Hypersurface::flat_lab(-0.5, 1).boosted(&b);
        let r = audit_slice(&sb, &s, &map, &ledger, AUDIT_TOL).unwrap();
        assert!(r.pass, "total={}", r.total);
    }

    #[test]
    fn newtonian_limit_rows() {
        let rows = newtonian_limit(0.0, 1.0, &[1.0, 10.0, 1e3, 1e6]).unwrap();
        assert!((rows[1].boundary_time - (-0.1)).abs() < 1e-15);
        assert!((rows[3].boundary_time - (-1e-6)).abs() < 1e-18);
        for pair in rows.windows(2) {
            assert!(pair[1].boundary_time > pair[0].boundary_time);
        }
        assert!(newtonian_limit(0.0, 1.0, &[0.0]).is_err());
        assert!(newtonian_limit(0.0, 1.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn earth_scale_lead_time() {
        let rows = newtonian_limit(0.0, 1.0e7, &[2.998e8]).unwrap();
        assert!((rows[0].lead_time - 0.0334).abs() < 1e-4);
        assert!((rows[0].lead_time - 0.03).abs() / 0.03 < 0.15);
    }

    #[test]
    fn significant_digit_format_is_stable() {
        assert_eq!(format_significant(1.0, 12), "1.00000000000");
        assert_eq!(format_significant(0.5, 12), "0.500000000000");
        assert_eq!(format_significant(0.0, 12), "0.00000000000");
        assert_eq!(format_significant(1.0000000004993, 12), "1.00000000050");
    }
}
