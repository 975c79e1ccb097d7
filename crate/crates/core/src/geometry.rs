//! Planar predicates and constructions shared by the rest of the crate.
//!
//! Everything here works on `f64`. Collinearity is decided with a relative
//! tolerance so results do not depend on the unit of length, which robots do
//! not share.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("points are not collinear")]
    NotCollinear,
    #[error("points coincide")]
    Coincident,
    #[error("degenerate line: both defining points coincide")]
    DegenerateLine,
    #[error("no targets given")]
    EmptyTargets,
    #[error("target coincides with the center")]
    TargetAtCenter,
    #[error("gap width {0} outside (0, 2π)")]
    InvalidGap(f64),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(&'static str),
    #[error("invalid similarity transform: {0}")]
    InvalidTransform(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn minus(self, other: Point) -> Vector {
        Vector::new(self.x - other.x, self.y - other.y)
    }

    pub fn offset(self, v: Vector) -> Point {
        Point::new(self.x + v.x, self.y + v.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        self.minus(other).norm()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Free vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector {
    pub x: f64,
    pub y: f64,
}

impl Vector {
    pub const fn new(x: f64, y: f64) -> Self {
        Vector { x, y }
    }

    pub fn dot(self, other: Vector) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vector) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, k: f64) -> Vector {
        Vector::new(self.x * k, self.y * k)
    }

    /// Angle in `[0, 2π)`.
    pub fn angle(self) -> f64 {
        normalize_angle(self.y.atan2(self.x))
    }
}

/// Unit vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    dx: f64,
    dy: f64,
}

impl Direction {
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Direction { dx: c, dy: s }
    }

    /// Normalizes `v`; `None` for the zero vector.
    pub fn from_vector(v: Vector) -> Option<Self> {
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            Some(Direction {
                dx: v.x / n,
                dy: v.y / n,
            })
        } else {
            None
        }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn vector(&self) -> Vector {
        Vector::new(self.dx, self.dy)
    }

    pub fn angle(&self) -> f64 {
        self.vector().angle()
    }

    pub fn reversed(&self) -> Self {
        Direction {
            dx: -self.dx,
            dy: -self.dy,
        }
    }

    /// Counter-clockwise normal.
    pub fn normal(&self) -> Self {
        Direction {
            dx: -self.dy,
            dy: self.dx,
        }
    }

    /// Orientation of the same line whose first nonzero component is positive.
    pub fn canonical(&self) -> Self {
        if self.dx > 0.0 || (self.dx == 0.0 && self.dy > 0.0) {
            *self
        } else {
            self.reversed()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative collinearity tolerance (dimensionless).
    pub eps_col: f64,
    /// Absolute distance tolerance in plane units.
    pub eps_dist: f64,
}

impl Tolerances {
    pub fn new(eps_col: f64, eps_dist: f64) -> Result<Self, GeometryError> {
        let tol = Tolerances { eps_col, eps_dist };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.eps_col > 0.0 && self.eps_col.is_finite()) {
            return Err(GeometryError::InvalidTolerance("eps_col must be positive"));
        }
        if !(self.eps_dist > 0.0 && self.eps_dist.is_finite()) {
            return Err(GeometryError::InvalidTolerance("eps_dist must be positive"));
        }
        Ok(())
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_col: 1e-9,
            eps_dist: 1e-12,
        }
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Twice the signed area of triangle `abc`; positive for a counter-clockwise turn.
pub fn orientation(a: Point, b: Point, c: Point) -> f64 {
    b.minus(a).cross(c.minus(a))
}

/// Scale-free collinearity test.
///
/// The residual `|orientation|` is compared against `eps_col` times the
/// largest product of two edge lengths meeting at a vertex, which makes the
/// predicate symmetric in its arguments. For the pivot at an end of a nearly
/// degenerate triple this is the same as `|b-a|·|c-a|`.
pub fn is_collinear(a: Point, b: Point, c: Point, tol: &Tolerances) -> bool {
    let ab = a.distance(b);
    let bc = b.distance(c);
    let ca = c.distance(a);
    let scale = (ab * ca).max(ab * bc).max(bc * ca);
    orientation(a, b, c).abs() <= tol.eps_col * scale
}

/// Whether `m` is strictly inside segment `a`–`b`, assuming the three points
/// are already known to be collinear.
pub(crate) fn strictly_inside(a: Point, m: Point, b: Point, tol: &Tolerances) -> bool {
    let ab = b.minus(a);
    let len = ab.norm();
    if len <= tol.eps_dist {
        return false;
    }
    let t = m.minus(a).dot(ab) / len;
    t > tol.eps_dist && t < len - tol.eps_dist
}

/// Whether `m` lies strictly between `a` and `b` on their common line.
pub fn is_between(a: Point, m: Point, b: Point, tol: &Tolerances) -> Result<bool, GeometryError> {
    if a.distance(m) <= tol.eps_dist || m.distance(b) <= tol.eps_dist || a.distance(b) <= tol.eps_dist {
        return Err(GeometryError::Coincident);
    }
    if !is_collinear(a, m, b, tol) {
        return Err(GeometryError::NotCollinear);
    }
    Ok(strictly_inside(a, m, b, tol))
}

/// Distance from `p` to the line through `a` and `b`.
pub fn perp_distance(p: Point, a: Point, b: Point) -> Result<f64, GeometryError> {
    let base = a.distance(b);
    if base == 0.0 {
        return Err(GeometryError::DegenerateLine);
    }
    Ok(orientation(a, b, p).abs() / base)
}

/// Angular gap between two consecutive directions seen from a center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// Direction (radians, `[0, 2π)`) the gap opens from.
    pub start: f64,
    /// Counter-clockwise rotation to the next direction.
    pub width: f64,
}

impl Gap {
    pub fn end(&self) -> f64 {
        normalize_angle(self.start + self.width)
    }
}

/// Sorts the directions from `center` to `targets` counter-clockwise and
/// returns the gaps between consecutive ones, wrap-around included.
///
/// Targets in exactly the same direction count once.
pub fn angular_gaps(center: Point, targets: &[Point]) -> Result<Vec<Gap>, GeometryError> {
    if targets.is_empty() {
        return Err(GeometryError::EmptyTargets);
    }
    let mut dirs = Vec::with_capacity(targets.len());
    for t in targets {
        let v = t.minus(center);
        if v.x == 0.0 && v.y == 0.0 {
            return Err(GeometryError::TargetAtCenter);
        }
        dirs.push(v.angle());
    }
    dirs.sort_by(f64::total_cmp);
    dirs.dedup();
    if dirs.len() == 1 {
        return Ok(vec![Gap {
            start: dirs[0],
            width: TAU,
        }]);
    }
    let mut gaps: Vec<Gap> = dirs
        .windows(2)
        .map(|w| Gap {
            start: w[0],
            width: w[1] - w[0],
        })
        .collect();
    let last = dirs[dirs.len() - 1];
    gaps.push(Gap {
        start: last,
        width: dirs[0] + TAU - last,
    });
    Ok(gaps)
}

/// Ray halving `gap`.
pub fn bisector_direction(gap: &Gap) -> Result<Direction, GeometryError> {
    if !(gap.width > 0.0 && gap.width < TAU) {
        return Err(GeometryError::InvalidGap(gap.width));
    }
    Ok(Direction::from_angle(normalize_angle(gap.start + gap.width / 2.0)))
}

/// Whether a gap is a straight angle or wider, i.e. not a candidate for a
/// bisector move. Gaps within `eps_col` of π count as straight.
pub fn is_reflex_or_straight(width: f64, tol: &Tolerances) -> bool {
    width >= PI - tol.eps_col
}

/// Counter-clockwise hull vertices (monotone chain). Points on hull edges
/// are not vertices.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    hull_with(points, |o, a, b| orientation(o, a, b) <= 0.0)
}

/// Like [`convex_hull`], but points within collinearity tolerance of an
/// edge are also dropped.
pub fn convex_hull_tol(points: &[Point], tol: &Tolerances) -> Vec<Point> {
    hull_with(points, |o, a, b| {
        orientation(o, a, b) <= 0.0 || is_collinear(o, a, b, tol)
    })
}

fn hull_with(points: &[Point], drop_middle: impl Fn(Point, Point, Point) -> bool) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && drop_middle(hull[hull.len() - 2], hull[hull.len() - 1], p) {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // all points on one line: keep the two extremes
        hull.truncate(2);
        hull.dedup();
    }
    hull
}

/// Similarity transform `p ↦ s·R(θ)·F·p + t`, with `F` an optional reflection
/// across the x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub rotation: f64,
    pub reflect: bool,
    pub scale: f64,
    pub translation: Vector,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        rotation: 0.0,
        reflect: false,
        scale: 1.0,
        translation: Vector { x: 0.0, y: 0.0 },
    };

    pub fn new(rotation: f64, reflect: bool, scale: f64, translation: Vector) -> Result<Self, GeometryError> {
        let s = Similarity {
            rotation,
            reflect,
            scale,
            translation,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn translation(t: Vector) -> Self {
        Similarity {
            translation: t,
            ..Similarity::IDENTITY
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(GeometryError::InvalidTransform("scale must be positive and finite"));
        }
        if !self.rotation.is_finite() || !self.translation.x.is_finite() || !self.translation.y.is_finite() {
            return Err(GeometryError::InvalidTransform("non-finite parameter"));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Similarity::IDENTITY
    }

    pub fn apply_vector(&self, v: Vector) -> Vector {
        let y = if self.reflect { -v.y } else { v.y };
        let (s, c) = self.rotation.sin_cos();
        Vector::new(self.scale * (c * v.x - s * y), self.scale * (s * v.x + c * y))
    }

    pub fn apply(&self, p: Point) -> Point {
        if self.is_identity() {
            return p;
        }
        let v = self.apply_vector(Vector::new(p.x, p.y));
        Point::new(v.x + self.translation.x, v.y + self.translation.y)
    }

    pub fn invert_vector(&self, v: Vector) -> Vector {
        let (s, c) = self.rotation.sin_cos();
        let x = (c * v.x + s * v.y) / self.scale;
        let y = (-s * v.x + c * v.y) / self.scale;
        Vector::new(x, if self.reflect { -y } else { y })
    }

    pub fn invert(&self, p: Point) -> Point {
        if self.is_identity() {
            return p;
        }
        let v = self.invert_vector(Vector::new(p.x - self.translation.x, p.y - self.translation.y));
        Point::new(v.x, v.y)
    }
}

impl Default for Similarity {
    fn default() -> Self {
        Similarity::IDENTITY
    }
}
