//! Command-line driver. Exit codes: 0 all checks pass, 2 usage, 3
//! parse/validation failure, 4 demonstrated conservation violation, 5
//! internal inconsistency.

use crate::audit::{
    audit_batch, audit_csv, audit_naive_instantaneous, random_surfaces, AuditCsvRow,
    AuditWindow, SurfaceFamily,
};
use crate::collapse::{sequential_apply, transit_ledger, verify_flow_balance, WeightMap};
use crate::diagram::{emit_svg, DiagramSpec};
use crate::game::{monte_carlo, run_schedule, standard_deal, InspectionSchedule};
use crate::geometry::{Boost, Event};
use crate::scenario_file::{parse_scenario, from_scenario, to_json, ParsedScenario, RenderHints};
use crate::scenarios::{
    delayed_choice_check, epr_pair, interferometer_report, DelayedChoiceGeometry, DetectorArm,
    InterferometerTiming, SPEED_OF_LIGHT,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_VIOLATION: u8 = 4;
pub const EXIT_INTERNAL: u8 = 5;

#[derive(Parser)]
#[command(
    name = "pastcone",
    version,
    about = "Past-light-cone collapse kinematics: causal regions, weight collapse, conservation audits, spacetime diagrams"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify points against a scenario's collapse structure
    Classify {
        scenario: PathBuf,
        /// Point as "t,x[,y[,z]]" (repeatable)
        #[arg(long = "point", value_name = "T,X..")]
        points: Vec<String>,
        /// Relative tolerance for cone-boundary classification
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Apply the measurements and dump the weight map plus transit ledger
    Collapse {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conservation audits over random spacelike surfaces (CSV report)
    Audit {
        scenario: PathBuf,
        /// Number of random surfaces (overrides the scenario's audit block)
        #[arg(long)]
        surfaces: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Audit the naive flat-plane collapse instead of cone collapse
        #[arg(long)]
        naive: bool,
        /// Boost speed: frame of the audited slice (naive mode) or a frame
        /// change applied to the whole scenario first
        #[arg(long, allow_hyphen_values = true)]
        boost: Option<f64>,
        /// Absolute tolerance on totals
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deal a card game, run it fairly, and check Monte Carlo frequencies
    Game {
        #[arg(long, default_value_t = 52)]
        cards: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit built-in physics scenarios and timing reports
    #[command(subcommand)]
    Scenario(ScenarioKind),
    /// Render a scenario as an SVG spacetime diagram
    Diagram {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Shading grid resolution
        #[arg(long)]
        grid: Option<usize>,
    },
}

#[derive(Subcommand)]
enum ScenarioKind {
    /// Two particles flying apart from a source, detected on both arms
    Epr(EprArgs),
    /// Two-beam interferometer timing report
    Interferometer(InterferometerArgs),
    /// Detector margins for roundabout-path (delayed-choice) layouts
    DelayedChoice(DelayedChoiceArgs),
    /// Extended measurement region: sampled apices and the d/c lead time
    Extended(ExtendedArgs),
}

#[derive(Args)]
struct EprArgs {
    /// Pair speed as a fraction of c (1.0 = photons)
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Detection time on both arms (natural units)
    #[arg(long, default_value_t = 1.0)]
    detection_time: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InterferometerArgs {
    /// Beam separation in meters
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Beam speed in m/s
    #[arg(long, default_value_t = 3000.0)]
    beam_speed: f64,
    /// Laser transit time in ns
    #[arg(long, default_value_t = 2.0)]
    laser_transit_ns: f64,
    /// Excited-state half-life in ns
    #[arg(long, default_value_t = 17.0)]
    half_life_ns: f64,
    /// Decay window before the detectors in ns
    #[arg(long, default_value_t = 8.0)]
    decay_window_ns: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DelayedChoiceArgs {
    /// Signal path length per detector, meters (repeatable)
    #[arg(long = "path-length", default_values_t = [8100.0, 9300.0])]
    path_lengths: Vec<f64>,
    /// Straight-line distance between the two detectors, meters
    #[arg(long, default_value_t = 10900.0)]
    detector_distance: f64,
    /// Effective propagation speed as a fraction of c
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendedArgs {
    /// Spatial diameter of the measurement region, meters
    #[arg(long, default_value_t = 3.0)]
    diameter: f64,
    /// Number of apex samples across the region
    #[arg(long, default_value_t = 7)]
    samples: usize,
}

/// Entry point used by the binary.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(dispatch(cli))
}

fn dispatch(cli: Cli) -> u8 {
    match cli.command {
        Command::Classify {
            scenario,
            points,
            tolerance,
        } => cmd_classify(&scenario, &points, tolerance),
        Command::Collapse { scenario, out } => cmd_collapse(&scenario, out.as_deref()),
        Command::Audit {
            scenario,
            surfaces,
            seed,
            naive,
            boost,
            tolerance,
            out,
        } => cmd_audit(
            &scenario,
            surfaces,
            seed,
            naive,
            boost,
            tolerance,
            out.as_deref(),
        ),
        Command::Game {
            cards,
            trials,
            seed,
            out,
        } => cmd_game(cards, trials, seed, out.as_deref()),
        Command::Scenario(kind) => cmd_scenario(kind),
        Command::Diagram {
            scenario,
            out,
            grid,
        } => cmd_diagram(&scenario, out.as_deref(), grid),
    }
}

fn load(path: &Path) -> Result<ParsedScenario, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_VALIDATION
    })?;
    parse_scenario(&text).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_VALIDATION
    })
}

fn write_out(out: Option<&Path>, content: &str) -> u8 {
    match out {
        None => {
            print!("{content}");
            EXIT_OK
        }
        Some(path) => match std::fs::write(path, content) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", path.display());
                EXIT_VALIDATION
            }
        },
    }
}

fn cmd_classify(path: &Path, points: &[String], tolerance: Option<f64>) -> u8 {
    let parsed = match load(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let sc = &parsed.scenario;
    let eps = tolerance.unwrap_or(crate::geometry::DEFAULT_EPS);
    let structure = sc.structure().with_eps(eps);
    if points.is_empty() {
        eprintln!("error: no --point given");
        return EXIT_USAGE;
    }
    let mut out = String::new();
    for raw in points {
        let coords: Result<Vec<f64>, _> = raw.split(',').map(str::trim).map(str::parse).collect();
        let coords = match coords {
            Ok(c) if c.len() == sc.dim + 1 => c,
            _ => {
                eprintln!(
                    "error: --point expects \"t,x..\" with {} spatial coordinates, got `{raw}`",
                    sc.dim
                );
                return EXIT_USAGE;
            }
        };
        let p = match Event::new(coords[0], &coords[1..]) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        let q = structure.region_of(&p);
        out.push_str(&format!("point {p:?}: region={:?}", q.region));
        if !q.boundary.is_empty() {
            out.push_str(&format!(" boundary={}", q.boundary));
        }
        out.push('\n');
        for (i, m) in sc.measurements.iter().enumerate() {
            out.push_str(&format!(
                "  vs m{i} (apex {:?}, target {}): {:?}\n",
                m.apex,
                m.target,
                m.apex.classify(&p, eps)
            ));
        }
    }
    print!("{out}");
    EXIT_OK
}

fn cmd_collapse(path: &Path, out: Option<&Path>) -> u8 {
    let parsed = match load(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let sc = &parsed.scenario;
    let map = match sequential_apply(sc, &sc.measurements) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let ledger = match transit_ledger(sc, &WeightMap::initial(sc), &map, &sc.measurements) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if let Err(msg) = verify_flow_balance(&map, &ledger, 1e-9) {
        eprintln!("internal inconsistency: {msg}");
        return EXIT_INTERNAL;
    }
    let doc = serde_json::json!({ "weights": map, "ledger": ledger });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    write_out(out, &text)
}

fn cmd_audit(
    path: &Path,
    surfaces: Option<usize>,
    seed: Option<u64>,
    naive: bool,
    boost: Option<f64>,
    tolerance: Option<f64>,
    out: Option<&Path>,
) -> u8 {
    let parsed = match load(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let tol = tolerance.unwrap_or(parsed.audit.tolerance);

    if naive {
        let v = boost.unwrap_or(0.5);
        let b = match Boost::along_x(v, parsed.scenario.dim) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        let audit = match audit_naive_instantaneous(&parsed.scenario, &b, tol) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_VALIDATION;
            }
        };
        let rows: Vec<AuditCsvRow> = [&audit.below, &audit.above]
            .iter()
            .enumerate()
            .map(|(i, r)| AuditCsvRow {
                surface_id: i,
                family: "naive_flat".into(),
                parameters: r.surface.clone(),
                total: r.total,
                pass: r.pass,
            })
            .collect();
        let code = write_out(out, &audit_csv(&rows));
        if code != EXIT_OK {
            return code;
        }
        return if audit.pass() {
            EXIT_OK
        } else {
            eprintln!(
                "conservation violated under boost v={v}: worst total {}",
                audit.worst().total
            );
            EXIT_VIOLATION
        };
    }

    let mut sc = parsed.scenario.clone();
    if let Some(v) = boost {
        match Boost::along_x(v, sc.dim) {
            Ok(b) => sc = sc.boosted(&b),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let map = match sequential_apply(&sc, &sc.measurements) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let ledger = match transit_ledger(&sc, &WeightMap::initial(&sc), &map, &sc.measurements) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if let Err(msg) = verify_flow_balance(&map, &ledger, 1e-9) {
        eprintln!("internal inconsistency: {msg}");
        return EXIT_INTERNAL;
    }

    let n = surfaces.unwrap_or(parsed.audit.surfaces);
    let seed = seed.unwrap_or(parsed.audit.seed);
    let window = AuditWindow::of_scenario(&sc);
    let families: Vec<SurfaceFamily> = parsed
        .audit
        .families
        .iter()
        .map(|&f| SurfaceFamily::from(f))
        .collect();

    let mut rows = Vec::new();
    let mut all_pass = true;
    let mut id = 0usize;
    for family in &families {
        let per_family = n / families.len().max(1) + usize::from(n % families.len() != 0);
        let surfs = random_surfaces(seed, per_family, family, &window);
        for (s, result) in surfs
            .iter()
            .zip(audit_batch(&sc, &surfs, &map, &ledger, tol))
        {
            match result {
                Ok(report) => {
                    all_pass &= report.pass;
                    rows.push(AuditCsvRow {
                        surface_id: id,
                        family: family.name().into(),
                        parameters: s.descriptor(),
                        total: report.total,
                        pass: report.pass,
                    });
                }
                Err(e) => {
                    eprintln!("error auditing {}: {e}", s.descriptor());
                    return EXIT_VALIDATION;
                }
            }
            id += 1;
        }
    }
    let code = write_out(out, &audit_csv(&rows));
    if code != EXIT_OK {
        return code;
    }
    if all_pass {
        EXIT_OK
    } else {
        eprintln!("conservation violations found; see report rows with pass=false");
        EXIT_VIOLATION
    }
}

fn cmd_game(cards: usize, trials: u64, seed: u64, out: Option<&Path>) -> u8 {
    let deal = match standard_deal(cards, seed) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let schedule = match InspectionSchedule::simultaneous(&deal, 0.0) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INTERNAL;
        }
    };
    let run = match run_schedule(&deal, &schedule, false) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    eprintln!(
        "dealt {cards} cards (seed {seed}); inspections at t=0 are mutually spacelike (fair)"
    );
    eprintln!(
        "card found at index {} after {} inspections",
        run.found_at.expect("full schedule always finds the card"),
        run.measurements.len()
    );
    let order: Vec<usize> = (0..cards).collect();
    let table = match monte_carlo(cards, &order, trials, seed) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    eprintln!(
        "monte carlo: {trials} trials, max |freq - 1/{cards}| = {:.6e}, 3-sigma bound {:.6e}",
        table.max_deviation, table.three_sigma
    );
    let code = write_out(out, &table.to_csv());
    if code != EXIT_OK {
        return code;
    }
    if table.pass {
        EXIT_OK
    } else {
        eprintln!("frequencies outside the 3-sigma binomial band");
        EXIT_VIOLATION
    }
}

fn cmd_scenario(kind: ScenarioKind) -> u8 {
    match kind {
        ScenarioKind::Epr(args) => {
            let epr = match epr_pair(args.speed, (args.detection_time, args.detection_time)) {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let (on_minus, on_plus) = epr.partner_crossings;
            eprintln!(
                "partner-arm collapse crossings: {:?} and {:?} (source {:?})",
                on_minus, on_plus, epr.source
            );
            let mut hints = RenderHints::default();
            hints.labels.insert("m0".into(), "A".into());
            hints.labels.insert("m1".into(), "B".into());
            let file = from_scenario(&epr.scenario, Some(hints));
            write_out(args.out.as_deref(), &to_json(&file))
        }
        ScenarioKind::Interferometer(args) => {
            let timing = match InterferometerTiming::new(
                args.separation,
                args.beam_speed,
                args.laser_transit_ns * 1e-9,
                args.half_life_ns * 1e-9,
                args.decay_window_ns * 1e-9,
            ) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let r = interferometer_report(&timing);
            let text = format!(
                "beam separation: {} m\npre-collapse time: {:.4} ns\ndecay fraction in window: \
                 {:.4}\nrequired separation: {:.4} m\nupgrade factor vs 2 mm: {:.1}\nfeasible: \
                 {}\n",
                args.separation,
                r.precollapse_time * 1e9,
                r.decay_fraction,
                r.required_separation,
                r.upgrade_factor,
                r.feasible
            );
            let csv = format!(
                "separation_m,precollapse_ns,decay_fraction,required_separation_m,upgrade_factor,feasible\n{},{},{},{},{},{}\n",
                args.separation,
                crate::audit::format_significant(r.precollapse_time * 1e9, 12),
                crate::audit::format_significant(r.decay_fraction, 12),
                crate::audit::format_significant(r.required_separation, 12),
                crate::audit::format_significant(r.upgrade_factor, 12),
                r.feasible
            );
            match args.out.as_deref() {
                Some(path) => {
                    print!("{text}");
                    write_out(Some(path), &csv)
                }
                None => {
                    print!("{text}");
                    EXIT_OK
                }
            }
        }
        ScenarioKind::DelayedChoice(args) => {
            if args.path_lengths.len() != 2 {
                eprintln!("error: exactly two --path-length values expected");
                return EXIT_USAGE;
            }
            let half = args.detector_distance / 2.0;
            let geometry = DelayedChoiceGeometry::new(
                vec![0.0],
                vec![
                    DetectorArm {
                        name: "west".into(),
                        position: vec![-half],
                        path_length: args.path_lengths[0],
                        speed: args.speed * SPEED_OF_LIGHT,
                    },
                    DetectorArm {
                        name: "east".into(),
                        position: vec![half],
                        path_length: args.path_lengths[1],
                        speed: args.speed * SPEED_OF_LIGHT,
                    },
                ],
                SPEED_OF_LIGHT,
            );
            let geometry = match geometry {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let mut text = String::from("arm,detection_time_s,light_time_s,margin_s,verdict\n");
            for arm in delayed_choice_check(&geometry) {
                text.push_str(&format!(
                    "{},{},{},{},{:?}\n",
                    arm.name,
                    crate::audit::format_significant(arm.detection_time, 12),
                    crate::audit::format_significant(arm.light_time, 12),
                    crate::audit::format_significant(arm.margin, 12),
                    arm.verdict
                ));
            }
            write_out(args.out.as_deref(), &text)
        }
        ScenarioKind::Extended(args) => {
            if args.samples == 0 {
                eprintln!("error: --samples must be at least 1");
                return EXIT_USAGE;
            }
            let samples: Vec<Event> = (0..args.samples)
                .map(|i| {
                    let frac = if args.samples == 1 {
                        0.0
                    } else {
                        i as f64 / (args.samples - 1) as f64
                    };
                    Event::d1(0.0, frac * args.diameter)
                })
                .collect();
            match crate::scenarios::extended_region_collapse(&samples, SPEED_OF_LIGHT) {
                Ok((structure, lead)) => {
                    println!(
                        "{} sampled apices over {} m: collapse lead time {:.4} ns",
                        structure.len(),
                        args.diameter,
                        lead * 1e9
                    );
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            }
        }
    }
}

fn cmd_diagram(path: &Path, out: Option<&Path>, grid: Option<usize>) -> u8 {
    let parsed = match load(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let mut hints = parsed.render.clone();
    if let Some(g) = grid {
        hints.grid = Some(g);
    }
    let spec = DiagramSpec::for_scenario(&parsed.scenario, &hints);
    match emit_svg(&parsed.scenario, &spec) {
        Ok(svg) => write_out(out, &svg),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}
