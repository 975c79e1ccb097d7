//! The Compute phase of one robot: destination computation and the 1-bit
//! state machine that alternates off-line (type-0) and along-line (type-1)
//! moves.
//!
//! Arbitrary choices (gap ties, which line, which orientation, which side)
//! are resolved by a [`Choices`] draw over options listed in a fixed order
//! defined in the global frame. A draw therefore selects the same physical
//! option whatever local frame the robot observes in.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::Choices;
use crate::config::{bit01, Configuration, RobotId};
use crate::geometry::{
    angular_gaps, bisector_direction, is_collinear, is_reflex_or_straight, perp_distance, Direction, Gap,
    GeometryError, Point, Similarity, Tolerances, Vector,
};
use crate::vision::{
    snapshot_from_indices, terminality_in, visible_indices, CollinearLine, Snapshot, Terminality, VisionError,
};

/// Gap widths closer than this (radians) count as tied.
const GAP_TIE: f64 = 1e-12;
const ANGLE_WRAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgorithmError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error("robot sees no other robot")]
    EmptyVision,
    #[error("no angular gap below a straight angle")]
    NoSubStraightGap,
    #[error("type-1 move requested but the robot is on no line of collinearity")]
    NoLineForType1,
    #[error("every triple in view is collinear")]
    AllTriplesCollinear,
    #[error("computed step {sigma:e} does not change the position")]
    VanishingStep { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveType {
    #[serde(rename = "TYPE0")]
    Type0,
    #[serde(rename = "TYPE1")]
    Type1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Stay,
    Move,
}

/// Result of one Compute phase. `destination` is in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveDecision {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_type: Option<MoveType>,
    #[serde(with = "bit01")]
    pub new_bit: bool,
}

impl MoveDecision {
    pub fn stay(bit: bool) -> Self {
        MoveDecision {
            action: Action::Stay,
            destination: None,
            move_type: None,
            new_bit: bit,
        }
    }

    pub fn moving(destination: Point, move_type: MoveType, new_bit: bool) -> Self {
        MoveDecision {
            action: Action::Move,
            destination: Some(destination),
            move_type: Some(move_type),
            new_bit,
        }
    }

    pub fn is_move(&self) -> bool {
        self.action == Action::Move
    }
}

/// How the step length shrinks with the number of visible robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementLaw {
    /// `U / 3^(4v)`.
    ViewScaled,
    /// `U / 3^4`, independent of how many robots are visible.
    #[default]
    Constant,
}

impl DisplacementLaw {
    pub fn divisor(self, visible: usize) -> f64 {
        match self {
            DisplacementLaw::ViewScaled => 3f64.powi(4 * visible.min(i32::MAX as usize / 4) as i32),
            DisplacementLaw::Constant => 81.0,
        }
    }
}

impl std::str::FromStr for DisplacementLaw {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "view-scaled" | "view_scaled" => Ok(DisplacementLaw::ViewScaled),
            "constant" => Ok(DisplacementLaw::Constant),
            other => Err(format!(
                "unknown displacement law '{other}' (expected view-scaled or constant)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub tol: Tolerances,
    pub law: DisplacementLaw,
}

/// Quantities that bound a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementInputs {
    /// Number of visible robots.
    pub v: usize,
    /// Smallest triangle height over non-collinear triples through the
    /// observer; absent in the linear case.
    pub d: Option<f64>,
    /// Smallest pairwise distance among the observer and what it sees.
    #[serde(rename = "D")]
    pub big_d: f64,
    /// `min(d, D)`, or `D` in the linear case.
    pub u: f64,
    pub sigma: f64,
}

fn min_pairwise(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for (k, p) in points.iter().enumerate() {
        for q in &points[k + 1..] {
            best = best.min(p.distance(*q));
        }
    }
    best
}

/// Step bound when at least three robots are visible.
///
/// `d` is the smallest of the three heights of every triangle formed by the
/// observer and two visible robots. Triples that are collinear under `tol`
/// are skipped, otherwise a robot on a line would always get `d = 0`.
pub fn displacement_general(
    own: Point,
    visible: &[Point],
    tol: &Tolerances,
    law: DisplacementLaw,
) -> Result<DisplacementInputs, AlgorithmError> {
    if visible.len() < 3 {
        return Err(AlgorithmError::EmptyVision);
    }
    let mut d = f64::INFINITY;
    for (k, &a) in visible.iter().enumerate() {
        for &b in &visible[k + 1..] {
            if is_collinear(own, a, b, tol) {
                continue;
            }
            d = d
                .min(perp_distance(own, a, b)?)
                .min(perp_distance(a, own, b)?)
                .min(perp_distance(b, own, a)?);
        }
    }
    if !d.is_finite() {
        return Err(AlgorithmError::AllTriplesCollinear);
    }
    let mut all = Vec::with_capacity(visible.len() + 1);
    all.push(own);
    all.extend_from_slice(visible);
    let big_d = min_pairwise(&all);
    let u = d.min(big_d);
    Ok(DisplacementInputs {
        v: visible.len(),
        d: Some(d),
        big_d,
        u,
        sigma: u / law.divisor(visible.len()),
    })
}

/// Step bound when at most two robots are visible: `D / 3^4`.
pub fn displacement_linear(own: Point, visible: &[Point]) -> Result<DisplacementInputs, AlgorithmError> {
    if visible.is_empty() {
        return Err(AlgorithmError::EmptyVision);
    }
    let mut all = Vec::with_capacity(visible.len() + 1);
    all.push(own);
    all.extend_from_slice(visible);
    let big_d = min_pairwise(&all);
    Ok(DisplacementInputs {
        v: visible.len(),
        d: None,
        big_d,
        u: big_d,
        sigma: big_d / 81.0,
    })
}

/// Widest gap strictly below a straight angle. Tied gaps are ordered by
/// start direction and one is drawn from `choices`.
pub fn gap_selection(gaps: &[Gap], choices: &mut dyn Choices, tol: &Tolerances) -> Result<Gap, AlgorithmError> {
    select_gap_by(gaps, choices, tol, |g| g.start)
}

fn select_gap_by(
    gaps: &[Gap],
    choices: &mut dyn Choices,
    tol: &Tolerances,
    order_key: impl Fn(&Gap) -> f64,
) -> Result<Gap, AlgorithmError> {
    let candidates: Vec<&Gap> = gaps.iter().filter(|g| !is_reflex_or_straight(g.width, tol)).collect();
    let widest = candidates.iter().map(|g| g.width).fold(f64::NEG_INFINITY, f64::max);
    if !widest.is_finite() {
        return Err(AlgorithmError::NoSubStraightGap);
    }
    let mut tied: Vec<(f64, Gap)> = candidates
        .into_iter()
        .filter(|g| widest - g.width <= GAP_TIE)
        .map(|g| (order_key(g), *g))
        .collect();
    tied.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(tied[choices.pick(tied.len())].1)
}

fn local_direction(frame: &Similarity, global: Direction) -> Direction {
    Direction::from_vector(frame.apply_vector(global.vector()))
        .expect("similarity maps unit vectors to nonzero vectors")
}

fn global_direction(frame: &Similarity, local: Vector) -> Option<Direction> {
    Direction::from_vector(frame.invert_vector(local))
}

/// Destination for a non-terminal robot.
///
/// With more than two robots in view the bit selects the move: 0 gives a
/// type-0 step along the bisector of the chosen gap, 1 a type-1 step along a
/// line of collinearity through the robot. With at most two in view the
/// robot steps perpendicular to its line and always sets the bit.
///
/// `lines_through_self` must be in the order produced by
/// [`crate::vision::collinear_lines`].
pub fn compute_destination(
    snapshot: &Snapshot,
    bit: bool,
    lines_through_self: &[CollinearLine],
    choices: &mut dyn Choices,
    params: &AlgorithmParams,
) -> Result<MoveDecision, AlgorithmError> {
    let tol = &params.tol;
    let frame = &snapshot.frame;
    let own = snapshot.position;
    let visible = &snapshot.visible;
    if visible.is_empty() {
        return Err(AlgorithmError::EmptyVision);
    }

    let (step_dir, sigma, move_type, new_bit) = if visible.len() > 2 {
        let inputs = displacement_general(own, visible, tol, params.law)?;
        if !bit {
            let gaps = angular_gaps(own, visible)?;
            // order tied gaps by their bisector in the global frame; angles
            // just below 2π count as 0 so frame round-off cannot reorder them
            let gap = select_gap_by(&gaps, choices, tol, |g| {
                let angle = bisector_direction(g)
                    .ok()
                    .and_then(|b| global_direction(frame, b.vector()))
                    .map_or(g.start, |b| b.angle());
                if TAU - angle <= ANGLE_WRAP {
                    0.0
                } else {
                    angle
                }
            })?;
            (bisector_direction(&gap)?, inputs.sigma, MoveType::Type0, true)
        } else {
            if lines_through_self.is_empty() {
                return Err(AlgorithmError::NoLineForType1);
            }
            let line = &lines_through_self[choices.pick(lines_through_self.len())];
            let global = if choices.pick(2) == 0 {
                line.direction
            } else {
                line.direction.reversed()
            };
            (local_direction(frame, global), inputs.sigma, MoveType::Type1, false)
        }
    } else {
        let inputs = displacement_linear(own, visible)?;
        let along = if visible.len() == 2 {
            visible[1].minus(visible[0])
        } else {
            visible[0].minus(own)
        };
        let normal = global_direction(frame, along)
            .ok_or(GeometryError::DegenerateLine)?
            .canonical()
            .normal();
        let global = if choices.pick(2) == 0 {
            normal
        } else {
            normal.reversed()
        };
        (local_direction(frame, global), inputs.sigma, MoveType::Type0, true)
    };

    let start = snapshot.to_global(own);
    let destination = start.offset(frame.invert_vector(step_dir.vector().scale(sigma)));
    if destination == start || !destination.is_finite() {
        return Err(AlgorithmError::VanishingStep { sigma });
    }
    Ok(MoveDecision::moving(destination, move_type, new_bit))
}

/// One full Look–Compute step for robot `i` observing in the identity frame.
pub fn robot_step(
    config: &Configuration,
    i: RobotId,
    choices: &mut dyn Choices,
    params: &AlgorithmParams,
) -> Result<MoveDecision, AlgorithmError> {
    robot_step_in_frame(config, i, &Similarity::IDENTITY, choices, params)
}

/// Like [`robot_step`], observing through `frame`.
pub fn robot_step_in_frame(
    config: &Configuration,
    i: RobotId,
    frame: &Similarity,
    choices: &mut dyn Choices,
    params: &AlgorithmParams,
) -> Result<MoveDecision, AlgorithmError> {
    frame.validate()?;
    let idx = config.index_of(i).map_err(VisionError::from)?;
    let points = config.positions();
    let lines = crate::vision::collinear_lines(config, &params.tol);
    decide(config, &points, idx, &lines, frame, choices, params)
}

/// Decision for the robot at index `idx`, given lines precomputed for the
/// whole configuration.
pub(crate) fn decide(
    config: &Configuration,
    points: &[Point],
    idx: usize,
    lines: &[CollinearLine],
    frame: &Similarity,
    choices: &mut dyn Choices,
    params: &AlgorithmParams,
) -> Result<MoveDecision, AlgorithmError> {
    let robot = config.robots()[idx];
    if terminality_in(lines, robot.id) == Terminality::Terminal {
        return Ok(MoveDecision::stay(robot.bit));
    }
    let own_lines: Vec<CollinearLine> = lines.iter().filter(|l| l.contains(robot.id)).cloned().collect();
    let visible = visible_indices(points, idx, &params.tol);
    let snapshot = snapshot_from_indices(points, idx, &visible, frame);
    compute_destination(&snapshot, robot.bit, &own_lines, choices, params)
}
