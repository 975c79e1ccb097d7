//! Robot configurations: positions plus the persistent bit of every robot at
//! a round boundary.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Tolerances};

pub type RobotId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("configuration has no robots")]
    Empty,
    #[error("duplicate robot id {0}")]
    DuplicateId(RobotId),
    #[error("robot {0} has a non-finite position")]
    NonFinite(RobotId),
    #[error("robots {0} and {1} occupy the same position")]
    Coincident(RobotId, RobotId),
    #[error("unknown robot id {0}")]
    UnknownId(RobotId),
}

/// Serializes a `bool` as the integer `0` or `1`.
pub(crate) mod bit01 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bit: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*bit))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("bit must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub id: RobotId,
    pub position: Point,
    #[serde(with = "bit01")]
    pub bit: bool,
}

impl Robot {
    pub fn new(id: RobotId, position: Point) -> Self {
        Robot {
            id,
            position,
            bit: false,
        }
    }
}

/// Global snapshot of the swarm. Robots are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub round: u64,
    robots: Vec<Robot>,
}

impl Configuration {
    /// Builds and validates a configuration.
    pub fn new(round: u64, mut robots: Vec<Robot>, tol: &Tolerances) -> Result<Self, ConfigError> {
        robots.sort_by_key(|r| r.id);
        let config = Configuration { round, robots };
        config.validate(tol)?;
        Ok(config)
    }

    /// Robots with ids `0..n` at the given positions, all bits zero.
    pub fn from_points(points: &[Point], tol: &Tolerances) -> Result<Self, ConfigError> {
        let robots = points
            .iter()
            .enumerate()
            .map(|(i, &p)| Robot::new(i as RobotId, p))
            .collect();
        Configuration::new(0, robots, tol)
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<(), ConfigError> {
        if self.robots.is_empty() {
            return Err(ConfigError::Empty);
        }
        let mut seen = BTreeSet::new();
        for r in &self.robots {
            if !seen.insert(r.id) {
                return Err(ConfigError::DuplicateId(r.id));
            }
            if !r.position.is_finite() {
                return Err(ConfigError::NonFinite(r.id));
            }
        }
        if let Some((a, b)) = self.closest_pair_within(tol.eps_dist) {
            return Err(ConfigError::Coincident(a, b));
        }
        Ok(())
    }

    /// Restores id order (deserialized input may be unsorted) and validates.
    pub fn normalized(mut self, tol: &Tolerances) -> Result<Self, ConfigError> {
        self.robots.sort_by_key(|r| r.id);
        self.validate(tol)?;
        Ok(self)
    }

    /// First pair of robots (by id) closer than `eps`.
    pub fn closest_pair_within(&self, eps: f64) -> Option<(RobotId, RobotId)> {
        for (i, a) in self.robots.iter().enumerate() {
            for b in &self.robots[i + 1..] {
                if a.position.distance(b.position) <= eps {
                    return Some((a.id, b.id));
                }
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.robots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub(crate) fn robots_mut(&mut self) -> &mut [Robot] {
        &mut self.robots
    }

    pub fn ids(&self) -> impl Iterator<Item = RobotId> + '_ {
        self.robots.iter().map(|r| r.id)
    }

    pub fn positions(&self) -> Vec<Point> {
        self.robots.iter().map(|r| r.position).collect()
    }

    pub fn index_of(&self, id: RobotId) -> Result<usize, ConfigError> {
        self.robots
            .binary_search_by_key(&id, |r| r.id)
            .map_err(|_| ConfigError::UnknownId(id))
    }

    pub fn robot(&self, id: RobotId) -> Result<&Robot, ConfigError> {
        self.index_of(id).map(|i| &self.robots[i])
    }

    pub fn position(&self, id: RobotId) -> Result<Point, ConfigError> {
        self.robot(id).map(|r| r.position)
    }

    /// Minimum pairwise distance, `None` below two robots.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.robots.iter().enumerate() {
            for b in &self.robots[i + 1..] {
                let d = a.position.distance(b.position);
                best = Some(best.map_or(d, |m| m.min(d)));
            }
        }
        best
    }

    /// Copy with every position mapped by `f`.
    pub fn map_positions(&self, f: impl Fn(Point) -> Point) -> Configuration {
        let robots = self
            .robots
            .iter()
            .map(|r| Robot {
                position: f(r.position),
                ..*r
            })
            .collect();
        Configuration {
            round: self.round,
            robots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_configurations() {
        let tol = Tolerances::default();
        assert_eq!(Configuration::new(0, vec![], &tol), Err(ConfigError::Empty));
        let r = |id, x| Robot::new(id, Point::new(x, 0.0));
        assert_eq!(
            Configuration::new(0, vec![r(1, 0.0), r(1, 1.0)], &tol),
            Err(ConfigError::DuplicateId(1))
        );
        assert_eq!(
            Configuration::new(0, vec![r(1, 0.0), r(2, 0.0)], &tol),
            Err(ConfigError::Coincident(1, 2))
        );
        assert_eq!(
            Configuration::new(0, vec![r(1, f64::NAN)], &tol),
            Err(ConfigError::NonFinite(1))
        );
    }

    #[test]
    fn bits_serialize_as_integers() {
        let tol = Tolerances::default();
        let mut c = Configuration::from_points(&[Point::new(0.0, 0.0), Point::new(1.0, 0.5)], &tol).unwrap();
        c.robots_mut()[1].bit = true;
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"bit\":0") && s.contains("\"bit\":1"), "{s}");
        let back: Configuration = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<Configuration>(&s.replace("\"bit\":1", "\"bit\":2")).is_err());
    }

    #[test]
    fn lookup_by_id() {
        let tol = Tolerances::default();
        let robots = vec![Robot::new(7, Point::new(1.0, 1.0)), Robot::new(3, Point::new(0.0, 0.0))];
        let c = Configuration::new(0, robots, &tol).unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), vec![3, 7]);
        assert_eq!(c.position(7), Ok(Point::new(1.0, 1.0)));
        assert_eq!(c.index_of(5), Err(ConfigError::UnknownId(5)));
    }
}
