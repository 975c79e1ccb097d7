//! Initial configurations for experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Configuration};
use crate::geometry::{Point, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("invalid pattern parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot parse pattern '{0}'")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Pattern {
    /// `n` robots at `(0,0), (1,0), ...`.
    Line { n: usize },
    /// `k×k` integer lattice, id `k*y + x`.
    Grid { k: usize },
    /// A center robot plus `per_arm` robots on each of `arms` distinct lines.
    Star { arms: usize, per_arm: usize },
    /// Twelve robots on four lines forming one chordless 4-cycle.
    Cycle4,
    /// Lattice points on `lines` planted lines, topped up with random real
    /// points to `n` robots.
    RandomPlanted { n: usize, lines: usize, seed: u64 },
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Line { n } => write!(f, "LINE({n})"),
            Pattern::Grid { k } => write!(f, "GRID({k})"),
            Pattern::Star { arms, per_arm } => write!(f, "STAR({arms},{per_arm})"),
            Pattern::Cycle4 => write!(f, "CYCLE4"),
            Pattern::RandomPlanted { n, lines, seed } => write!(f, "RANDOM_PLANTED({n},{lines},{seed})"),
        }
    }
}

impl FromStr for Pattern {
    type Err = GenerateError;

    /// Accepts the display form, case-insensitively, e.g. `grid(3)` or
    /// `random_planted(12,2,7)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || GenerateError::Parse(s.to_string());
        let t = s.trim().to_ascii_uppercase();
        if t == "CYCLE4" {
            return Ok(Pattern::Cycle4);
        }
        let (name, rest) = t.split_once('(').ok_or_else(err)?;
        let args = rest.strip_suffix(')').ok_or_else(err)?;
        let nums: Vec<u64> = args
            .split(',')
            .map(|a| a.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err())?;
        match (name.trim(), nums.as_slice()) {
            ("LINE", &[n]) => Ok(Pattern::Line { n: n as usize }),
            ("GRID", &[k]) => Ok(Pattern::Grid { k: k as usize }),
            ("STAR", &[a, p]) => Ok(Pattern::Star {
                arms: a as usize,
                per_arm: p as usize,
            }),
            ("RANDOM_PLANTED", &[n, l, seed]) => Ok(Pattern::RandomPlanted {
                n: n as usize,
                lines: l as usize,
                seed,
            }),
            _ => Err(err()),
        }
    }
}

pub const CYCLE4_POINTS: [(f64, f64); 12] = [
    (-1.0, 0.0),
    (1.0, 0.0),
    (3.0, 0.0),
    (5.0, 0.0),
    (3.0, -2.0),
    (3.0, 3.0),
    (3.0, 5.0),
    (-1.0, 3.0),
    (1.0, 3.0),
    (5.0, 3.0),
    (1.0, -2.0),
    (1.0, 5.0),
];

pub fn generate(pattern: &Pattern) -> Result<Configuration, GenerateError> {
    let bad = |m: &str| Err(GenerateError::InvalidParameters(m.to_string()));
    let points: Vec<Point> = match *pattern {
        Pattern::Line { n } => {
            if n == 0 {
                return bad("LINE needs n >= 1");
            }
            (0..n).map(|i| Point::new(i as f64, 0.0)).collect()
        }
        Pattern::Grid { k } => {
            if k == 0 {
                return bad("GRID needs k >= 1");
            }
            (0..k)
                .flat_map(|y| (0..k).map(move |x| Point::new(x as f64, y as f64)))
                .collect()
        }
        Pattern::Star { arms, per_arm } => {
            if arms == 0 || per_arm == 0 {
                return bad("STAR needs arms >= 1 and per_arm >= 1");
            }
            star(arms, per_arm)
        }
        Pattern::Cycle4 => CYCLE4_POINTS.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        Pattern::RandomPlanted { n, lines, seed } => {
            if n == 0 {
                return bad("RANDOM_PLANTED needs n >= 1");
            }
            if 3 * lines > n {
                return bad("RANDOM_PLANTED needs n >= 3 * lines");
            }
            random_planted(n, lines, seed)
        }
    };
    Ok(Configuration::from_points(&points, &Tolerances::default())?)
}

/// Primitive directions in the upper half plane (plus `(1,0)`), by
/// increasing max-norm, then angle. No two are parallel.
fn primitive_directions(count: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut r = 1i64;
    while out.len() < count {
        let mut ring: Vec<(i64, i64)> = Vec::new();
        for a in -r..=r {
            for b in 0..=r {
                if a.abs().max(b) != r || (b == 0 && a <= 0) || gcd(a.abs(), b) != 1 {
                    continue;
                }
                ring.push((a, b));
            }
        }
        ring.sort_by(|p, q| {
            let ap = (p.1 as f64).atan2(p.0 as f64);
            let aq = (q.1 as f64).atan2(q.0 as f64);
            ap.total_cmp(&aq)
        });
        out.extend(ring);
        r += 1;
    }
    out.truncate(count);
    out
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Arms alternate sides of the center so every line passes through it.
fn star(arms: usize, per_arm: usize) -> Vec<Point> {
    let mut pts = vec![Point::new(0.0, 0.0)];
    for (a, (dx, dy)) in primitive_directions(arms).into_iter().enumerate() {
        for m in 1..=per_arm as i64 {
            // odd arms alternate rays, so the center is interior there
            let k = match (a % 2, m % 2) {
                (0, _) => m,
                (_, 1) => (m + 1) / 2,
                _ => -(m / 2),
            };
            pts.push(Point::new((k * dx) as f64, (k * dy) as f64));
        }
    }
    pts
}

fn random_planted(n: usize, lines: usize, seed: u64) -> Vec<Point> {
    const SIDE: i64 = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lattice: Vec<(i64, i64)> = Vec::new();
    let mut taken: BTreeSet<(i64, i64)> = BTreeSet::new();
    let mut planted = 0;
    let mut attempts = 0;
    while planted < lines && attempts < 10_000 {
        attempts += 1;
        let share = !lattice.is_empty() && rng.random_bool(0.5);
        let base = if share {
            lattice[rng.random_range(0..lattice.len())]
        } else {
            (rng.random_range(0..=SIDE), rng.random_range(0..=SIDE))
        };
        let (dx, dy) = loop {
            let d = (rng.random_range(-3..=3i64), rng.random_range(0..=3i64));
            if d != (0, 0) && gcd(d.0.abs(), d.1) == 1 {
                break d;
            }
        };
        let room = n - lattice.len();
        let want = rng.random_range(3..=4usize);
        let mut members = Vec::new();
        let mut fresh = Vec::new();
        for t in -4..=4i64 {
            let p = (base.0 + t * dx, base.1 + t * dy);
            if !(0..=SIDE).contains(&p.0) || !(0..=SIDE).contains(&p.1) {
                continue;
            }
            if taken.contains(&p) {
                members.push(p);
            } else {
                fresh.push(p);
            }
        }
        // shuffle the fresh candidates, then keep as many as needed
        for i in (1..fresh.len()).rev() {
            fresh.swap(i, rng.random_range(0..=i));
        }
        let need = want.saturating_sub(members.len()).max(1);
        if fresh.len() < need || need > room || members.len() + need < 3 {
            continue;
        }
        for &p in &fresh[..need] {
            taken.insert(p);
            lattice.push(p);
        }
        planted += 1;
    }
    let mut pts: Vec<Point> = lattice.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
    while pts.len() < n {
        pts.push(Point::new(
            rng.random_range(0.0..SIDE as f64),
            rng.random_range(0.0..SIDE as f64),
        ));
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::is_collinear;
    use crate::vision::{collinear_lines, line_structure};

    #[test]
    fn line3() {
        let c = generate(&Pattern::Line { n: 3 }).unwrap();
        assert_eq!(
            c.positions(),
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)]
        );
        assert!(c.robots().iter().all(|r| !r.bit));
    }

    #[test]
    fn grid3_has_eight_lines() {
        let c = generate(&Pattern::Grid { k: 3 }).unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(c.position(5), Ok(Point::new(2.0, 1.0)));
        assert_eq!(collinear_lines(&c, &Tolerances::default()).len(), 8);
    }

    #[test]
    fn cycle4_has_one_four_cycle() {
        let c = generate(&Pattern::Cycle4).unwrap();
        let s = line_structure(&c, &Tolerances::default());
        assert_eq!(s.cycles.len(), 1);
        assert_eq!(s.cycles[0].lines.len(), 4);
    }

    #[test]
    fn star_arms_share_the_center() {
        let tol = Tolerances::default();
        let c = generate(&Pattern::Star { arms: 4, per_arm: 3 }).unwrap();
        assert_eq!(c.len(), 13);
        let lines = collinear_lines(&c, &tol);
        let through_center = lines.iter().filter(|l| l.contains(0)).count();
        assert_eq!(through_center, 4);
        // both sides of the center are used on odd arms
        assert!(lines.iter().filter(|l| l.is_interior(0)).count() >= 2);
    }

    #[test]
    fn primitive_directions_are_pairwise_non_parallel() {
        let d = primitive_directions(20);
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                assert_ne!(d[i].0 * d[j].1 - d[i].1 * d[j].0, 0);
            }
        }
        assert_eq!(&d[..4], &[(1, 0), (1, 1), (0, 1), (-1, 1)]);
    }

    #[test]
    fn planted_lines_are_present() {
        let tol = Tolerances::default();
        for seed in 0..20 {
            let pattern = Pattern::RandomPlanted { n: 16, lines: 3, seed };
            let c = generate(&pattern).unwrap();
            assert_eq!(c.len(), 16);
            assert_eq!(c, generate(&pattern).unwrap());
            let pts = c.positions();
            let has_triple = (0..pts.len()).any(|i| {
                (i + 1..pts.len()).any(|j| (j + 1..pts.len()).any(|k| is_collinear(pts[i], pts[j], pts[k], &tol)))
            });
            assert!(has_triple, "seed {seed}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate(&Pattern::Line { n: 0 }).is_err());
        assert!(generate(&Pattern::Grid { k: 0 }).is_err());
        assert!(generate(&Pattern::Star { arms: 0, per_arm: 2 }).is_err());
        assert!(generate(&Pattern::RandomPlanted {
            n: 5,
            lines: 2,
            seed: 0
        })
        .is_err());
    }

    #[test]
    fn pattern_strings_round_trip() {
        for p in [
            Pattern::Line { n: 4 },
            Pattern::Grid { k: 3 },
            Pattern::Star { arms: 4, per_arm: 3 },
            Pattern::Cycle4,
            Pattern::RandomPlanted {
                n: 12,
                lines: 2,
                seed: 9,
            },
        ] {
            assert_eq!(p.to_string().parse::<Pattern>().unwrap(), p);
        }
        assert_eq!("grid(3)".parse::<Pattern>().unwrap(), Pattern::Grid { k: 3 });
        assert!("grid".parse::<Pattern>().is_err());
    }
}
