//! Semi-synchronous round engine.
//!
//! In every round the scheduler picks a nonempty set of robots. All of them
//! look at the same start-of-round configuration, compute, and their moves
//! are applied together. A motion adversary may cut a move short, but never
//! below the guaranteed progress `delta`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithm::{decide, AlgorithmError, AlgorithmParams, DisplacementLaw, MoveDecision};
use crate::choice::{Choices, Domain, SeededChoices};
use crate::config::{Configuration, RobotId};
use crate::geometry::{Point, Similarity, Tolerances, Vector};
use crate::vision::{classify_lines, collinear_lines, CollinearLine, ConfigurationClass};

pub const DEFAULT_MAX_ROUNDS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("round {round}: robots {a} and {b} collide")]
    Collision { round: u64, a: RobotId, b: RobotId },
    #[error("round {round}: robot {robot}: {source}")]
    Algorithm {
        round: u64,
        robot: RobotId,
        #[source]
        source: AlgorithmError,
    },
}

impl SimError {
    pub fn round(&self) -> Option<u64> {
        match self {
            SimError::InvalidSpec(_) => None,
            SimError::Collision { round, .. } | SimError::Algorithm { round, .. } => Some(*round),
        }
    }
}

/// Which robots act in each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActivationPolicy {
    FullSync,
    /// Consecutive blocks of `block_size` robots in id order, cyclically.
    RoundRobin {
        block_size: usize,
    },
    /// Each robot independently with `inclusion_probability`; a robot idle
    /// for `fairness_window - 1` rounds is forced in.
    RandomFair {
        inclusion_probability: f64,
        fairness_window: u64,
    },
    /// Explicit per-round sets, repeated cyclically.
    Scripted {
        rounds: Vec<Vec<RobotId>>,
        fairness_window: u64,
    },
}

impl ActivationPolicy {
    /// Every robot is activated at least once in any window of this many
    /// consecutive rounds.
    pub fn fairness_window(&self, n: usize) -> u64 {
        match self {
            ActivationPolicy::FullSync => 1,
            ActivationPolicy::RoundRobin { block_size } => n.div_ceil((*block_size).max(1)).max(1) as u64,
            ActivationPolicy::RandomFair { fairness_window, .. } => *fairness_window,
            ActivationPolicy::Scripted { fairness_window, .. } => *fairness_window,
        }
    }

    pub fn validate(&self, ids: &[RobotId]) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        match self {
            ActivationPolicy::FullSync => Ok(()),
            ActivationPolicy::RoundRobin { block_size } => {
                if *block_size == 0 {
                    return bad("round-robin block size must be positive".into());
                }
                Ok(())
            }
            ActivationPolicy::RandomFair {
                inclusion_probability: p,
                fairness_window: f,
            } => {
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("inclusion probability {p} outside [0, 1]"));
                }
                if *f == 0 {
                    return bad("fairness window must be positive".into());
                }
                Ok(())
            }
            ActivationPolicy::Scripted {
                rounds,
                fairness_window,
            } => validate_script(rounds, *fairness_window, ids),
        }
    }

    /// Short label: `full`, `rr:<k>`, `random:<p>:<F>` or `script`.
    pub fn label(&self) -> String {
        match self {
            ActivationPolicy::FullSync => "full".into(),
            ActivationPolicy::RoundRobin { block_size } => format!("rr:{block_size}"),
            ActivationPolicy::RandomFair {
                inclusion_probability,
                fairness_window,
            } => format!("random:{inclusion_probability}:{fairness_window}"),
            ActivationPolicy::Scripted { .. } => "script".into(),
        }
    }
}

fn validate_script(rounds: &[Vec<RobotId>], window: u64, ids: &[RobotId]) -> Result<(), SimError> {
    let bad = |m: String| Err(SimError::InvalidSpec(m));
    if rounds.is_empty() {
        return bad("script has no rounds".into());
    }
    if window == 0 {
        return bad("fairness window must be positive".into());
    }
    for (t, set) in rounds.iter().enumerate() {
        if set.is_empty() {
            return bad(format!("script round {t} activates nobody"));
        }
        if let Some(x) = set.iter().find(|x| ids.binary_search(x).is_err()) {
            return bad(format!("script round {t} names unknown robot {x}"));
        }
    }
    // the script repeats, so check every window start over one period
    let len = rounds.len();
    for start in 0..len {
        for &id in ids {
            let seen = (0..window as usize).any(|k| rounds[(start + k) % len].contains(&id));
            if !seen {
                return bad(format!(
                    "robot {id} idle for {window} rounds starting at script round {start}"
                ));
            }
        }
    }
    Ok(())
}

impl fmt::Display for ActivationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ActivationPolicy {
    type Err = String;

    /// Parses `full`, `rr:<k>` and `random:<p>:<F>`. Scripts come from files.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str, what: &str| -> Result<f64, String> {
            x.parse::<f64>()
                .map_err(|_| format!("bad {what} '{x}' in scheduler '{s}'"))
        };
        match parts.as_slice() {
            ["full"] => Ok(ActivationPolicy::FullSync),
            ["rr", k] => {
                let k: usize = k.parse().map_err(|_| format!("bad block size in '{s}'"))?;
                Ok(ActivationPolicy::RoundRobin { block_size: k })
            }
            ["random", p, f] => Ok(ActivationPolicy::RandomFair {
                inclusion_probability: num(p, "probability")?,
                fairness_window: num(f, "window")? as u64,
            }),
            _ => Err(format!(
                "unknown scheduler '{s}' (expected full, rr:<k>, random:<p>:<F> or script:<file>)"
            )),
        }
    }
}

/// Stateful activation source for one run.
#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: ActivationPolicy,
    ids: Vec<RobotId>,
    idle: Vec<u64>,
    seed: u64,
}

impl Scheduler {
    pub fn new(policy: ActivationPolicy, ids: Vec<RobotId>, seed: u64) -> Result<Self, SimError> {
        policy.validate(&ids)?;
        let idle = vec![0; ids.len()];
        Ok(Scheduler {
            policy,
            ids,
            idle,
            seed,
        })
    }

    /// Sorted, nonempty activation set for `round`.
    pub fn activate(&mut self, round: u64) -> Vec<RobotId> {
        let n = self.ids.len();
        let chosen: Vec<bool> = match &self.policy {
            ActivationPolicy::FullSync => vec![true; n],
            ActivationPolicy::RoundRobin { block_size } => {
                let blocks = n.div_ceil(*block_size) as u64;
                let k = (round % blocks) as usize;
                (0..n).map(|i| i / block_size == k).collect()
            }
            ActivationPolicy::RandomFair {
                inclusion_probability,
                fairness_window,
            } => {
                let mut chosen: Vec<bool> = self
                    .ids
                    .iter()
                    .zip(&self.idle)
                    .map(|(&id, &idle)| {
                        idle + 1 >= *fairness_window
                            || SeededChoices::new(self.seed, Domain::Scheduler, round, id).fraction()
                                < *inclusion_probability
                    })
                    .collect();
                if !chosen.iter().any(|&c| c) {
                    // longest idle, lowest id
                    let (best, _) = self
                        .idle
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                        .expect("at least one robot");
                    chosen[best] = true;
                }
                chosen
            }
            ActivationPolicy::Scripted { rounds, .. } => {
                let set = &rounds[(round % rounds.len() as u64) as usize];
                self.ids.iter().map(|id| set.contains(id)).collect()
            }
        };
        for (idle, &c) in self.idle.iter_mut().zip(&chosen) {
            *idle = if c { 0 } else { *idle + 1 };
        }
        self.ids
            .iter()
            .zip(&chosen)
            .filter(|(_, &c)| c)
            .map(|(&id, _)| id)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MotionAdversary {
    Rigid,
    /// Stops a move after a random fraction, but never before `delta` (or the
    /// full length if that is shorter).
    Truncate {
        delta: f64,
    },
}

impl MotionAdversary {
    pub fn label(&self) -> String {
        match self {
            MotionAdversary::Rigid => "rigid".into(),
            MotionAdversary::Truncate { delta } => format!("truncate:{delta:e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    #[default]
    Identity,
    /// A fresh random similarity frame per robot and round.
    Random,
}

impl FromStr for FrameMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(FrameMode::Identity),
            "random" => Ok(FrameMode::Random),
            other => Err(format!("unknown frame mode '{other}' (expected identity or random)")),
        }
    }
}

/// Random similarity: rotation in `[0, 2π)`, optional reflection, scale in
/// `[0.1, 10]` (log-uniform), translation in `[-100, 100]²`.
pub fn random_frame(choices: &mut dyn Choices) -> Similarity {
    let rotation = TAU * choices.fraction();
    let reflect = choices.pick(2) == 1;
    let scale = 10f64.powf(2.0 * choices.fraction() - 1.0);
    let tx = 200.0 * choices.fraction() - 100.0;
    let ty = 200.0 * choices.fraction() - 100.0;
    Similarity {
        rotation,
        reflect,
        scale,
        translation: Vector::new(tx, ty),
    }
}

fn frame_for(mode: FrameMode, seed: u64, round: u64, id: RobotId) -> Similarity {
    match mode {
        FrameMode::Identity => Similarity::IDENTITY,
        FrameMode::Random => random_frame(&mut SeededChoices::new(seed, Domain::Frame, round, id)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub initial: Configuration,
    pub policy: ActivationPolicy,
    pub adversary: MotionAdversary,
    pub seed: u64,
    pub max_rounds: u64,
    pub tolerances: Tolerances,
    #[serde(default)]
    pub frames: FrameMode,
    #[serde(default)]
    pub law: DisplacementLaw,
    /// Extra rounds executed after general position is first reached.
    #[serde(default)]
    pub settle_rounds: u64,
}

impl SimulationSpec {
    /// Full synchrony, rigid moves, identity frames, default tolerances.
    pub fn new(initial: Configuration, seed: u64) -> Self {
        SimulationSpec {
            initial,
            policy: ActivationPolicy::FullSync,
            adversary: MotionAdversary::Rigid,
            seed,
            max_rounds: DEFAULT_MAX_ROUNDS,
            tolerances: Tolerances::default(),
            frames: FrameMode::Identity,
            law: DisplacementLaw::default(),
            settle_rounds: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        self.tolerances
            .validate()
            .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        self.initial
            .validate(&self.tolerances)
            .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        if self.initial.round != 0 {
            return bad("initial configuration must be at round 0".into());
        }
        if let Some(r) = self.initial.robots().iter().find(|r| r.bit) {
            return bad(format!("robot {} starts with bit 1; all bits must start at 0", r.id));
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        if let MotionAdversary::Truncate { delta } = self.adversary {
            if !(delta > 0.0 && delta.is_finite()) {
                return bad(format!("delta must be positive, got {delta}"));
            }
        }
        let ids: Vec<RobotId> = self.initial.ids().collect();
        self.policy.validate(&ids)
    }

    pub fn algorithm(&self) -> AlgorithmParams {
        AlgorithmParams {
            tol: self.tolerances,
            law: self.law,
        }
    }

    pub fn round_params(&self) -> RoundParams {
        RoundParams {
            seed: self.seed,
            adversary: self.adversary,
            algorithm: self.algorithm(),
            frames: self.frames,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundParams {
    pub seed: u64,
    pub adversary: MotionAdversary,
    pub algorithm: AlgorithmParams,
    pub frames: FrameMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotDecision {
    pub id: RobotId,
    pub decision: MoveDecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutedMove {
    pub id: RobotId,
    pub from: Point,
    pub destination: Point,
    pub reached: Point,
    pub intended_length: f64,
    pub executed_length: f64,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub activated: Vec<RobotId>,
    pub decisions: Vec<RobotDecision>,
    pub moves: Vec<ExecutedMove>,
    /// Configuration at the end of the round (its `round` is `round + 1`).
    pub configuration: Configuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    /// First configuration index in general position.
    ReachedGeneralPosition {
        round: u64,
    },
    MaxRoundsExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub spec: SimulationSpec,
    pub rounds: Vec<RoundRecord>,
    pub outcome: Outcome,
}

impl Trace {
    /// Configuration at every round boundary, starting with the initial one.
    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> {
        std::iter::once(&self.spec.initial).chain(self.rounds.iter().map(|r| &r.configuration))
    }

    pub fn configuration_at(&self, t: u64) -> Option<&Configuration> {
        if t == 0 {
            Some(&self.spec.initial)
        } else {
            self.rounds.get(t as usize - 1).map(|r| &r.configuration)
        }
    }

    pub fn final_configuration(&self) -> &Configuration {
        self.rounds.last().map_or(&self.spec.initial, |r| &r.configuration)
    }

    pub fn completion_round(&self) -> Option<u64> {
        match self.outcome {
            Outcome::ReachedGeneralPosition { round } => Some(round),
            Outcome::MaxRoundsExceeded => None,
        }
    }

    pub fn move_count(&self) -> usize {
        self.rounds.iter().map(|r| r.moves.len()).sum()
    }
}

/// A fault together with the rounds completed before it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{fault}")]
pub struct RunError {
    pub fault: SimError,
    pub completed: Vec<RoundRecord>,
}

/// Executes one round against the start-of-round configuration `config`.
pub fn step_round(
    config: &Configuration,
    activated: &[RobotId],
    params: &RoundParams,
) -> Result<RoundRecord, SimError> {
    let lines = collinear_lines(config, &params.algorithm.tol);
    step_round_with_lines(config, &lines, activated, params)
}

fn step_round_with_lines(
    config: &Configuration,
    lines: &[CollinearLine],
    activated: &[RobotId],
    params: &RoundParams,
) -> Result<RoundRecord, SimError> {
    let round = config.round;
    if activated.is_empty() {
        return Err(SimError::InvalidSpec(format!("round {round}: empty activation set")));
    }
    let mut activated = activated.to_vec();
    activated.sort_unstable();
    activated.dedup();

    let points = config.positions();
    let mut decisions = Vec::with_capacity(activated.len());
    for &id in &activated {
        let idx = config
            .index_of(id)
            .map_err(|e| SimError::InvalidSpec(format!("round {round}: {e}")))?;
        let frame = frame_for(params.frames, params.seed, round, id);
        let mut choices = SeededChoices::new(params.seed, Domain::Robot, round, id);
        let decision =
            decide(config, &points, idx, lines, &frame, &mut choices, &params.algorithm).map_err(|source| {
                SimError::Algorithm {
                    round,
                    robot: id,
                    source,
                }
            })?;
        decisions.push(RobotDecision { id, decision });
    }

    let mut next = config.clone();
    next.round = round + 1;
    let mut moves = Vec::new();
    for rd in &decisions {
        let idx = config.index_of(rd.id).expect("checked above");
        let robot = &mut next.robots_mut()[idx];
        robot.bit = rd.decision.new_bit;
        let Some(destination) = rd.decision.destination else {
            continue;
        };
        let from = robot.position;
        let intended = from.distance(destination);
        let executed = match params.adversary {
            MotionAdversary::Rigid => intended,
            MotionAdversary::Truncate { delta } => {
                let floor = delta.min(intended);
                let f = SeededChoices::new(params.seed, Domain::Adversary, round, rd.id).fraction();
                floor + f * (intended - floor)
            }
        };
        let reached = if executed >= intended {
            destination
        } else {
            from.offset(destination.minus(from).scale(executed / intended))
        };
        robot.position = reached;
        moves.push(ExecutedMove {
            id: rd.id,
            from,
            destination,
            reached,
            intended_length: intended,
            executed_length: executed,
        });
    }

    if !moves.is_empty() {
        if let Some((a, b)) = next.closest_pair_within(params.algorithm.tol.eps_dist) {
            return Err(SimError::Collision { round, a, b });
        }
    }
    Ok(RoundRecord {
        round,
        activated,
        decisions,
        moves,
        configuration: next,
    })
}

/// Runs until general position (plus `settle_rounds`) or `max_rounds`.
pub fn run(spec: &SimulationSpec) -> Result<Trace, RunError> {
    let fail = |fault: SimError, completed: Vec<RoundRecord>| RunError { fault, completed };
    spec.validate().map_err(|e| fail(e, Vec::new()))?;
    let params = spec.round_params();
    let tol = spec.tolerances;
    let ids: Vec<RobotId> = spec.initial.ids().collect();
    let mut scheduler = Scheduler::new(spec.policy.clone(), ids, spec.seed).map_err(|e| fail(e, Vec::new()))?;

    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut config = spec.initial.clone();
    let mut lines = collinear_lines(&config, &tol);
    let mut reached = (classify_lines(&lines, config.len()) == ConfigurationClass::GeneralPosition).then_some(0);
    let mut t = 0;
    while reached.is_none() && t < spec.max_rounds {
        let activated = scheduler.activate(t);
        let record = match step_round_with_lines(&config, &lines, &activated, &params) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, rounds)),
        };
        config = record.configuration.clone();
        rounds.push(record);
        t += 1;
        lines = collinear_lines(&config, &tol);
        if classify_lines(&lines, config.len()) == ConfigurationClass::GeneralPosition {
            reached = Some(t);
        }
    }
    if reached.is_some() {
        for _ in 0..spec.settle_rounds {
            let activated = scheduler.activate(t);
            let record = match step_round_with_lines(&config, &lines, &activated, &params) {
                Ok(r) => r,
                Err(e) => return Err(fail(e, rounds)),
            };
            config = record.configuration.clone();
            rounds.push(record);
            t += 1;
            lines = collinear_lines(&config, &tol);
        }
    }
    let outcome = match reached {
        Some(round) => Outcome::ReachedGeneralPosition { round },
        None => Outcome::MaxRoundsExceeded,
    };
    Ok(Trace {
        spec: spec.clone(),
        rounds,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, Pattern};
    use crate::geometry::is_collinear;

    fn line3() -> Configuration {
        generate(&Pattern::Line { n: 3 }).unwrap()
    }

    fn params(adversary: MotionAdversary) -> RoundParams {
        RoundParams {
            seed: 11,
            adversary,
            algorithm: AlgorithmParams::default(),
            frames: FrameMode::Identity,
        }
    }

    #[test]
    fn general_position_round_is_static() {
        let square = Configuration::from_points(
            &[
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            &Tolerances::default(),
        )
        .unwrap();
        let rec = step_round(&square, &[0, 1, 2, 3], &params(MotionAdversary::Rigid)).unwrap();
        assert!(rec.moves.is_empty());
        assert!(rec.decisions.iter().all(|d| !d.decision.is_move()));
        assert_eq!(rec.configuration.positions(), square.positions());
        assert_eq!(rec.configuration.round, 1);
    }

    #[test]
    fn middle_of_three_escapes_perpendicular() {
        let rec = step_round(&line3(), &[1], &params(MotionAdversary::Rigid)).unwrap();
        let p = rec.configuration.position(1).unwrap();
        assert_eq!(p.x, 1.0);
        assert!((p.y.abs() - 1.0 / 81.0).abs() < 1e-15);
        let pts = rec.configuration.positions();
        assert!(!is_collinear(pts[0], pts[1], pts[2], &Tolerances::default()));
        assert!(rec.configuration.robot(1).unwrap().bit);
    }

    #[test]
    fn truncation_stays_within_contract() {
        let delta = 1.0 / 200.0;
        for seed in 0..50 {
            let mut ps = params(MotionAdversary::Truncate { delta });
            ps.seed = seed;
            let rec = step_round(&line3(), &[1], &ps).unwrap();
            let mv = rec.moves[0];
            assert!(mv.executed_length >= delta && mv.executed_length <= 1.0 / 81.0 + 1e-18);
            let p = rec.configuration.position(1).unwrap();
            assert_eq!(p.x, 1.0);
            assert!((p.y.abs() - mv.executed_length).abs() < 1e-15);
            assert_eq!(p.y.signum(), mv.destination.y.signum());
        }
    }

    #[test]
    fn inactive_robots_do_not_change() {
        let grid = generate(&Pattern::Grid { k: 3 }).unwrap();
        let rec = step_round(&grid, &[4], &params(MotionAdversary::Rigid)).unwrap();
        for r in grid.robots().iter().filter(|r| r.id != 4) {
            assert_eq!(rec.configuration.robot(r.id).unwrap(), r);
        }
    }

    #[test]
    fn decisions_ignore_activation_order() {
        let grid = generate(&Pattern::Grid { k: 3 }).unwrap();
        let ps = params(MotionAdversary::Rigid);
        let a = step_round(&grid, &[0, 1, 4, 5, 7], &ps).unwrap();
        let b = step_round(&grid, &[7, 5, 4, 1, 0], &ps).unwrap();
        assert_eq!(a, b);
        // a robot's choice does not depend on who else acts
        let solo = step_round(&grid, &[4], &ps).unwrap();
        let d4 = |r: &RoundRecord| r.decisions.iter().find(|d| d.id == 4).unwrap().decision;
        assert_eq!(d4(&a), d4(&solo));
    }

    #[test]
    fn small_swarms_are_done_immediately() {
        for n in 1..=2 {
            let c = generate(&Pattern::Line { n }).unwrap();
            let trace = run(&SimulationSpec::new(c, 0)).unwrap();
            assert_eq!(trace.outcome, Outcome::ReachedGeneralPosition { round: 0 });
            assert_eq!(trace.move_count(), 0);
        }
    }

    #[test]
    fn line3_completes_in_one_round() {
        let trace = run(&SimulationSpec::new(line3(), 7)).unwrap();
        assert_eq!(trace.outcome, Outcome::ReachedGeneralPosition { round: 1 });
        assert_eq!(trace.rounds.len(), 1);
    }

    #[test]
    fn settle_rounds_are_appended() {
        let mut spec = SimulationSpec::new(line3(), 7);
        spec.settle_rounds = 10;
        let trace = run(&spec).unwrap();
        assert_eq!(trace.rounds.len(), 11);
        assert!(trace.rounds[1..].iter().all(|r| r.moves.is_empty()));
    }

    #[test]
    fn max_rounds_is_an_outcome() {
        let mut spec = SimulationSpec::new(generate(&Pattern::Line { n: 6 }).unwrap(), 3);
        spec.max_rounds = 1;
        spec.policy = ActivationPolicy::RoundRobin { block_size: 1 };
        let trace = run(&spec).unwrap();
        assert_eq!(trace.outcome, Outcome::MaxRoundsExceeded);
        assert_eq!(trace.rounds.len(), 1);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut spec = SimulationSpec::new(generate(&Pattern::Grid { k: 3 }).unwrap(), 5);
        spec.policy = ActivationPolicy::RandomFair {
            inclusion_probability: 0.5,
            fairness_window: 18,
        };
        spec.adversary = MotionAdversary::Truncate { delta: 1e-4 };
        assert_eq!(run(&spec).unwrap(), run(&spec).unwrap());
    }

    #[test]
    fn spec_validation() {
        let mut spec = SimulationSpec::new(line3(), 0);
        spec.max_rounds = 0;
        assert!(matches!(run(&spec).unwrap_err().fault, SimError::InvalidSpec(_)));
        let mut c = line3();
        c.robots_mut()[0].bit = true;
        assert!(SimulationSpec::new(c, 0).validate().is_err());
        let mut spec = SimulationSpec::new(line3(), 0);
        spec.adversary = MotionAdversary::Truncate { delta: 0.0 };
        assert!(spec.validate().is_err());
    }

    fn audit(policy: ActivationPolicy, n: usize, rounds: u64) {
        let ids: Vec<RobotId> = (0..n as RobotId).collect();
        let window = policy.fairness_window(n);
        let mut s = Scheduler::new(policy, ids.clone(), 9).unwrap();
        let sets: Vec<Vec<RobotId>> = (0..rounds).map(|t| s.activate(t)).collect();
        assert!(sets.iter().all(|s| !s.is_empty()));
        for start in 0..sets.len().saturating_sub(window as usize) {
            for id in &ids {
                assert!(
                    sets[start..start + window as usize].iter().any(|s| s.contains(id)),
                    "robot {id} idle in window at {start}"
                );
            }
        }
    }

    #[test]
    fn schedulers_are_fair() {
        audit(ActivationPolicy::FullSync, 5, 20);
        audit(ActivationPolicy::RoundRobin { block_size: 1 }, 5, 40);
        audit(ActivationPolicy::RoundRobin { block_size: 2 }, 5, 40);
        audit(
            ActivationPolicy::RandomFair {
                inclusion_probability: 0.5,
                fairness_window: 10,
            },
            5,
            200,
        );
        audit(
            ActivationPolicy::RandomFair {
                inclusion_probability: 0.0,
                fairness_window: 3,
            },
            5,
            200,
        );
        assert_eq!(ActivationPolicy::RoundRobin { block_size: 2 }.fairness_window(5), 3);
    }

    #[test]
    fn scripts_are_validated() {
        let ids = [0, 1, 2];
        let ok = ActivationPolicy::Scripted {
            rounds: vec![vec![0, 1], vec![2]],
            fairness_window: 2,
        };
        assert!(ok.validate(&ids).is_ok());
        let unfair = ActivationPolicy::Scripted {
            rounds: vec![vec![0], vec![1], vec![2]],
            fairness_window: 2,
        };
        assert!(unfair.validate(&ids).is_err());
        let unknown = ActivationPolicy::Scripted {
            rounds: vec![vec![0, 1, 2, 3]],
            fairness_window: 1,
        };
        assert!(unknown.validate(&ids).is_err());
    }

    #[test]
    fn scheduler_strings() {
        assert_eq!("full".parse(), Ok(ActivationPolicy::FullSync));
        assert_eq!("rr:3".parse(), Ok(ActivationPolicy::RoundRobin { block_size: 3 }));
        assert_eq!(
            "random:0.5:8".parse(),
            Ok(ActivationPolicy::RandomFair {
                inclusion_probability: 0.5,
                fairness_window: 8
            })
        );
        assert!("bogus".parse::<ActivationPolicy>().is_err());
        for s in ["full", "rr:3", "random:0.5:8"] {
            assert_eq!(s.parse::<ActivationPolicy>().unwrap().label(), s);
        }
    }
}
