//! What robots can observe under opacity.
//!
//! A robot strictly between two others on a common line hides them from each
//! other. This module computes vision sets, visibility polygons, lines of
//! collinearity, terminal/non-terminal status, the junction and cycle
//! structure over lines, and per-robot snapshots in local frames.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Configuration, RobotId};
use crate::geometry::{is_collinear, strictly_inside, Direction, Point, Similarity, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("robot {0} sees no other robot")]
    EmptyVision(RobotId),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionSet {
    pub observer: RobotId,
    pub visible: BTreeSet<RobotId>,
}

/// Visible robots sorted counter-clockwise by direction from the observer,
/// starting from direction 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityPolygon {
    pub observer: RobotId,
    pub cyclic_order: Vec<RobotId>,
}

/// Maximal line holding at least three robots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollinearLine {
    /// Members in order of projection onto `direction`.
    pub members: Vec<RobotId>,
    pub anchor: Point,
    /// Canonical orientation: first nonzero component positive.
    pub direction: Direction,
}

impl CollinearLine {
    pub fn contains(&self, id: RobotId) -> bool {
        self.members.contains(&id)
    }

    /// Whether `id` lies strictly between two other members.
    pub fn is_interior(&self, id: RobotId) -> bool {
        match self.members.iter().position(|&m| m == id) {
            Some(k) => k > 0 && k + 1 < self.members.len(),
            None => false,
        }
    }

    fn member_set(&self) -> BTreeSet<RobotId> {
        self.members.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Terminality {
    Terminal,
    NonTerminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConfigurationClass {
    AllCollinear,
    NotAllCollinear,
    GeneralPosition,
}

/// Closed chain of lines linked by distinct shared junctions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    /// Indices into [`LineStructure::lines`], starting from the smallest.
    pub lines: Vec<usize>,
    /// `critical_points[m]` is the junction shared by `lines[m]` and
    /// `lines[m + 1]` (cyclically).
    pub critical_points: Vec<RobotId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineStructure {
    pub lines: Vec<CollinearLine>,
    pub junctions: BTreeSet<RobotId>,
    pub incidence: BTreeMap<RobotId, BTreeSet<usize>>,
    /// Chordless cycles of length at least three.
    pub cycles: Vec<Cycle>,
    /// Pairs of junction-carrying lines linked by a single shared junction
    /// that are not part of any reported cycle. Whether such a pair counts as
    /// a cycle is left open, so they are reported separately.
    pub two_cycle_candidates: Vec<(usize, usize)>,
}

/// Observation of one robot expressed in its local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Global-to-local transform.
    pub frame: Similarity,
    /// Observer position in the local frame.
    pub position: Point,
    /// Visible robot positions in the local frame, in id order.
    pub visible: Vec<Point>,
}

impl Snapshot {
    pub fn to_global(&self, p: Point) -> Point {
        self.frame.invert(p)
    }
}

pub(crate) fn visible_indices(points: &[Point], i: usize, tol: &Tolerances) -> Vec<usize> {
    let pi = points[i];
    (0..points.len())
        .filter(|&j| j != i)
        .filter(|&j| {
            let pj = points[j];
            !points
                .iter()
                .enumerate()
                .any(|(k, &pk)| k != i && k != j && is_collinear(pi, pk, pj, tol) && strictly_inside(pi, pk, pj, tol))
        })
        .collect()
}

/// Index sets of maximal lines, each ordered along its canonical direction.
pub(crate) fn collinear_index_lines(points: &[Point], tol: &Tolerances) -> Vec<(Vec<usize>, Direction)> {
    let n = points.len();
    let mut sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut members: Vec<usize> = (0..n)
                .filter(|&c| c == a || c == b || is_collinear(points[a], points[b], points[c], tol))
                .collect();
            if members.len() >= 3 {
                members.sort_unstable();
                sets.insert(members);
            }
        }
    }
    // tolerance makes collinearity non-transitive; keep maximal sets only
    let all: Vec<Vec<usize>> = sets.into_iter().collect();
    let maximal = all.iter().filter(|s| {
        !all.iter()
            .any(|t| t.len() > s.len() && s.iter().all(|x| t.binary_search(x).is_ok()))
    });
    maximal
        .map(|set| {
            let dir = line_direction(points, set);
            let mut ordered = set.clone();
            ordered.sort_by(|&p, &q| {
                let tp = points[p].minus(Point::ORIGIN).dot(dir.vector());
                let tq = points[q].minus(Point::ORIGIN).dot(dir.vector());
                tp.total_cmp(&tq).then(p.cmp(&q))
            });
            (ordered, dir)
        })
        .collect()
}

/// Canonical direction through the two members farthest apart.
fn line_direction(points: &[Point], set: &[usize]) -> Direction {
    let mut best = (0.0, set[0], set[1]);
    for (k, &p) in set.iter().enumerate() {
        for &q in &set[k + 1..] {
            let d = points[p].distance(points[q]);
            if d > best.0 {
                best = (d, p, q);
            }
        }
    }
    Direction::from_vector(points[best.2].minus(points[best.1]))
        .expect("line members are distinct")
        .canonical()
}

pub fn visible_set(config: &Configuration, i: RobotId, tol: &Tolerances) -> Result<VisionSet, VisionError> {
    let idx = config.index_of(i)?;
    let points = config.positions();
    let robots = config.robots();
    let visible = visible_indices(&points, idx, tol)
        .into_iter()
        .map(|j| robots[j].id)
        .collect();
    Ok(VisionSet { observer: i, visible })
}

pub fn visibility_polygon(
    config: &Configuration,
    i: RobotId,
    tol: &Tolerances,
) -> Result<VisibilityPolygon, VisionError> {
    let vision = visible_set(config, i, tol)?;
    if vision.visible.is_empty() {
        return Err(VisionError::EmptyVision(i));
    }
    let center = config.position(i)?;
    let mut order: Vec<(f64, RobotId)> = vision
        .visible
        .iter()
        .map(|&j| Ok((config.position(j)?.minus(center).angle(), j)))
        .collect::<Result<_, ConfigError>>()?;
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(VisibilityPolygon {
        observer: i,
        cyclic_order: order.into_iter().map(|(_, j)| j).collect(),
    })
}

pub fn collinear_lines(config: &Configuration, tol: &Tolerances) -> Vec<CollinearLine> {
    let points = config.positions();
    let robots = config.robots();
    collinear_index_lines(&points, tol)
        .into_iter()
        .map(|(ordered, direction)| CollinearLine {
            anchor: points[ordered[0]],
            members: ordered.iter().map(|&k| robots[k].id).collect(),
            direction,
        })
        .collect()
}

pub fn lines_through(config: &Configuration, i: RobotId, tol: &Tolerances) -> Result<Vec<CollinearLine>, VisionError> {
    config.index_of(i)?;
    Ok(collinear_lines(config, tol)
        .into_iter()
        .filter(|l| l.contains(i))
        .collect())
}

/// Terminal status given precomputed lines.
pub fn terminality_in(lines: &[CollinearLine], i: RobotId) -> Terminality {
    if lines.iter().any(|l| l.is_interior(i)) {
        Terminality::NonTerminal
    } else {
        Terminality::Terminal
    }
}

pub fn classify(config: &Configuration, i: RobotId, tol: &Tolerances) -> Result<Terminality, VisionError> {
    Ok(terminality_in(&lines_through(config, i, tol)?, i))
}

pub fn classify_configuration(config: &Configuration, tol: &Tolerances) -> ConfigurationClass {
    classify_lines(&collinear_lines(config, tol), config.len())
}

pub(crate) fn classify_lines(lines: &[CollinearLine], n: usize) -> ConfigurationClass {
    if n <= 2 || lines.is_empty() {
        ConfigurationClass::GeneralPosition
    } else if lines.iter().any(|l| l.members.len() == n) {
        ConfigurationClass::AllCollinear
    } else {
        ConfigurationClass::NotAllCollinear
    }
}

pub fn line_structure(config: &Configuration, tol: &Tolerances) -> LineStructure {
    structure_from_lines(collinear_lines(config, tol))
}

pub(crate) fn structure_from_lines(lines: Vec<CollinearLine>) -> LineStructure {
    let mut incidence: BTreeMap<RobotId, BTreeSet<usize>> = BTreeMap::new();
    for (k, line) in lines.iter().enumerate() {
        for &m in &line.members {
            incidence.entry(m).or_default().insert(k);
        }
    }
    let junctions: BTreeSet<RobotId> = incidence
        .iter()
        .filter(|(id, on)| on.len() >= 2 && on.iter().any(|&k| lines[k].is_interior(**id)))
        .map(|(id, _)| *id)
        .collect();

    // lines carrying at least two junctions, linked when they share one
    let carriers: Vec<usize> = (0..lines.len())
        .filter(|&k| lines[k].members.iter().filter(|m| junctions.contains(m)).count() >= 2)
        .collect();
    let line_sets: Vec<BTreeSet<RobotId>> = lines.iter().map(CollinearLine::member_set).collect();
    let link = |a: usize, b: usize| -> Option<RobotId> {
        line_sets[a]
            .intersection(&line_sets[b])
            .copied()
            .find(|m| junctions.contains(m))
    };
    let m = carriers.len();
    let mut adj = vec![vec![None; m]; m];
    for x in 0..m {
        for y in x + 1..m {
            let shared = link(carriers[x], carriers[y]);
            adj[x][y] = shared;
            adj[y][x] = shared;
        }
    }

    let mut cycles = Vec::new();
    let mut covered: BTreeSet<(usize, usize)> = BTreeSet::new();
    for start in 0..m {
        let mut path = vec![start];
        extend_chordless(&adj, start, &mut path, &mut |cyc: &[usize]| {
            let critical: Vec<RobotId> = (0..cyc.len())
                .map(|t| adj[cyc[t]][cyc[(t + 1) % cyc.len()]].expect("consecutive lines are linked"))
                .collect();
            let distinct: BTreeSet<_> = critical.iter().collect();
            if distinct.len() == critical.len() {
                for t in 0..cyc.len() {
                    let (a, b) = (cyc[t], cyc[(t + 1) % cyc.len()]);
                    covered.insert((a.min(b), a.max(b)));
                }
                cycles.push(Cycle {
                    lines: cyc.iter().map(|&x| carriers[x]).collect(),
                    critical_points: critical,
                });
            }
        });
    }
    let mut two_cycle_candidates = Vec::new();
    for x in 0..m {
        for y in x + 1..m {
            if adj[x][y].is_some() && !covered.contains(&(x, y)) {
                two_cycle_candidates.push((carriers[x], carriers[y]));
            }
        }
    }

    LineStructure {
        lines,
        junctions,
        incidence,
        cycles,
        two_cycle_candidates,
    }
}

/// Depth-first search for chordless cycles through `start`, visiting only
/// vertices above `start`. Each cycle is reported once.
fn extend_chordless(
    adj: &[Vec<Option<RobotId>>],
    start: usize,
    path: &mut Vec<usize>,
    report: &mut impl FnMut(&[usize]),
) {
    let last = *path.last().expect("path starts non-empty");
    for w in start + 1..adj.len() {
        if adj[last][w].is_none() || path.contains(&w) {
            continue;
        }
        // w may touch only `last` and, to close the cycle, `start`
        let inner = if path.len() > 2 {
            &path[1..path.len() - 1]
        } else {
            &[][..]
        };
        if inner.iter().any(|&p| adj[p][w].is_some()) {
            continue;
        }
        let closes = path.len() >= 2 && adj[start][w].is_some();
        if closes {
            if path[1] < w {
                path.push(w);
                report(path);
                path.pop();
            }
        } else {
            path.push(w);
            extend_chordless(adj, start, path, report);
            path.pop();
        }
    }
}

/// Snapshot of robot `i` with global positions mapped through `frame`.
pub fn local_snapshot(
    config: &Configuration,
    i: RobotId,
    frame: &Similarity,
    tol: &Tolerances,
) -> Result<Snapshot, VisionError> {
    frame.validate()?;
    let idx = config.index_of(i)?;
    let points = config.positions();
    Ok(snapshot_from_indices(
        &points,
        idx,
        &visible_indices(&points, idx, tol),
        frame,
    ))
}

pub(crate) fn snapshot_from_indices(points: &[Point], i: usize, visible: &[usize], frame: &Similarity) -> Snapshot {
    Snapshot {
        frame: *frame,
        position: frame.apply(points[i]),
        visible: visible.iter().map(|&j| frame.apply(points[j])).collect(),
    }
}
