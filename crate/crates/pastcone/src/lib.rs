//! Kinematics of probability-distribution collapse along past light cones
//! in flat spacetime.
//!
//! A measurement at a spacetime point collapses a spatial probability
//! distribution along the measurement's *past* light cone: that choice of
//! collapse surface is the only one for which the total probability is
//! conserved in every inertial frame. This crate implements the machinery
//! around that statement:
//!
//! - [`geometry`]: events, causal classification, boosts, worldlines,
//!   light cones and spacelike hypersurfaces;
//! - [`collapse`]: collapse-region topology, piecewise-constant weight maps
//!   updated by measurements, and the in-transit ledger on null generators;
//! - [`audit`]: probability-conservation audits on arbitrary spacelike
//!   slices, the failure of naive instantaneous collapse, boosted
//!   scenarios, and the infinite-light-speed limit;
//! - [`game`]: the card game over scattered worldlines, with an exact
//!   enumeration oracle, Monte Carlo runs and the insider-trading fairness
//!   check for inspection schedules;
//! - [`scenarios`]: builders for paired-particle and interferometer
//!   constructions and their timing analyses;
//! - [`scenario_file`]: the JSON scenario format;
//! - [`diagram`]: deterministic SVG spacetime diagrams;
//! - [`cli`]: the command-line driver used by the `pastcone` binary.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod audit;
pub mod cli;
pub mod collapse;
pub mod diagram;
pub mod game;
pub mod geometry;
pub mod scenario_file;
pub mod scenarios;

pub use collapse::{MeasurementEvent, Outcome, Scenario, WeightMap};
pub use geometry::{Boost, CausalClass, Event, Hypersurface, Worldline};
