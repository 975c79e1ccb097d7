//! Reproducible sources for every arbitrary or random choice in a run.
//!
//! Each stream is keyed by `(seed, domain, round, robot id)`, so the draws a
//! robot makes do not depend on which other robots happen to be active, and
//! scheduler or adversary draws never perturb the algorithm's own draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RobotId;

/// Source of discrete picks and unit fractions.
pub trait Choices {
    /// Index in `0..n`. `n` must be positive.
    fn pick(&mut self, n: usize) -> usize;
    /// Value in `[0, 1)`.
    fn fraction(&mut self) -> f64;
}

/// Always takes the first option; fractions are zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstChoices;

impl Choices for FirstChoices {
    fn pick(&mut self, n: usize) -> usize {
        assert!(n > 0, "pick from an empty option set");
        0
    }

    fn fraction(&mut self) -> f64 {
        0.0
    }
}

/// Replays a fixed list of picks (wrapping), then fractions of zero.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChoices {
    picks: Vec<usize>,
    next: usize,
}

impl ScriptedChoices {
    pub fn new(picks: Vec<usize>) -> Self {
        ScriptedChoices { picks, next: 0 }
    }
}

impl Choices for ScriptedChoices {
    fn pick(&mut self, n: usize) -> usize {
        assert!(n > 0, "pick from an empty option set");
        if self.picks.is_empty() {
            return 0;
        }
        let k = self.picks[self.next % self.picks.len()];
        self.next += 1;
        k % n
    }

    fn fraction(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Robot = 0,
    Scheduler = 1,
    Adversary = 2,
    Frame = 3,
}

/// ChaCha8 stream selected by `(domain, round, id)` under a global seed.
#[derive(Debug, Clone)]
pub struct SeededChoices {
    rng: ChaCha8Rng,
}

impl SeededChoices {
    pub fn new(seed: u64, domain: Domain, round: u64, id: RobotId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(domain, round, id));
        SeededChoices { rng }
    }
}

/// Packs the key into a stream number: 2 bits of domain, 40 of round,
/// 22 of id. Runs stay far below either limit.
fn stream_id(domain: Domain, round: u64, id: RobotId) -> u64 {
    const ROUND_BITS: u64 = 40;
    const ID_BITS: u64 = 22;
    ((domain as u64) << (ROUND_BITS + ID_BITS))
        | ((round & ((1 << ROUND_BITS) - 1)) << ID_BITS)
        | (u64::from(id) & ((1 << ID_BITS) - 1))
}

impl Choices for SeededChoices {
    fn pick(&mut self, n: usize) -> usize {
        assert!(n > 0, "pick from an empty option set");
        self.rng.random_range(0..n)
    }

    fn fraction(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}
