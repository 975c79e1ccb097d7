//! Deterministic simulation of opaque point robots solving mutual
//! visibility with one persistent bit each, plus offline monitors that check
//! the algorithm's correctness claims on every recorded trace.
//!
//! The pieces, bottom-up:
//!
//! - [`geometry`]: orientation, tolerant collinearity, gaps, hulls, frames.
//! - [`vision`]: vision under opacity, lines of collinearity, junctions and
//!   cycles.
//! - [`algorithm`]: one robot's Compute phase.
//! - [`simulator`]: semi-synchronous rounds, schedulers, motion adversary.
//! - [`verify`]: trace monitors.
//! - [`trace`], [`render`], [`experiment`]: persistence, SVG snapshots and
//!   batch runs.

pub mod algorithm;
pub mod choice;
pub mod config;
pub mod experiment;
pub mod generate;
pub mod geometry;
pub mod render;
pub mod simulator;
pub mod trace;
pub mod verify;
pub mod vision;

pub use algorithm::{AlgorithmParams, DisplacementLaw, MoveDecision, MoveType};
pub use config::{Configuration, Robot, RobotId};
pub use generate::{generate, Pattern};
pub use geometry::{Point, Tolerances};
pub use simulator::{run, ActivationPolicy, MotionAdversary, Outcome, SimulationSpec, Trace};
pub use verify::{verify_all, Monitor, MonitorReport, Verdict};
pub use vision::{CollinearLine, ConfigurationClass, LineStructure, Terminality};
