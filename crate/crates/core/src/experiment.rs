//! Batches of independent runs: patterns × schedulers × adversaries × seeds,
//! verified and summarized one CSV row per cell.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithm::DisplacementLaw;
use crate::generate::{generate, Pattern};
use crate::geometry::Tolerances;
use crate::simulator::{
    run, ActivationPolicy, FrameMode, MotionAdversary, Outcome, SimulationSpec, DEFAULT_MAX_ROUNDS,
};
use crate::verify::{verify_all, Monitor, MonitorReport, Verdict};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Scheduler for a cell. Like [`ActivationPolicy`] strings, but
/// `random:<p>` alone uses a fairness window of `2n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedulerTemplate {
    FullSync,
    RoundRobin(usize),
    RandomFair { p: f64, window: Option<u64> },
}

impl SchedulerTemplate {
    pub fn instantiate(&self, n: usize) -> ActivationPolicy {
        match *self {
            SchedulerTemplate::FullSync => ActivationPolicy::FullSync,
            SchedulerTemplate::RoundRobin(k) => ActivationPolicy::RoundRobin { block_size: k },
            SchedulerTemplate::RandomFair { p, window } => ActivationPolicy::RandomFair {
                inclusion_probability: p,
                fairness_window: window.unwrap_or(2 * n as u64),
            },
        }
    }
}

impl fmt::Display for SchedulerTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerTemplate::FullSync => write!(f, "full"),
            SchedulerTemplate::RoundRobin(k) => write!(f, "rr:{k}"),
            SchedulerTemplate::RandomFair { p, window: None } => write!(f, "random:{p}"),
            SchedulerTemplate::RandomFair { p, window: Some(w) } => write!(f, "random:{p}:{w}"),
        }
    }
}

impl FromStr for SchedulerTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(p) = s.strip_prefix("random:").filter(|r| !r.contains(':')) {
            let p = p.parse().map_err(|_| format!("bad probability in '{s}'"))?;
            return Ok(SchedulerTemplate::RandomFair { p, window: None });
        }
        match s.parse::<ActivationPolicy>()? {
            ActivationPolicy::FullSync => Ok(SchedulerTemplate::FullSync),
            ActivationPolicy::RoundRobin { block_size } => Ok(SchedulerTemplate::RoundRobin(block_size)),
            ActivationPolicy::RandomFair {
                inclusion_probability,
                fairness_window,
            } => Ok(SchedulerTemplate::RandomFair {
                p: inclusion_probability,
                window: Some(fairness_window),
            }),
            ActivationPolicy::Scripted { .. } => Err("scripts are not supported in batches".into()),
        }
    }
}

/// Motion adversary for a cell: `rigid`, `truncate:<delta>`, or
/// `truncate-rel:<f>` for `delta = f · (min initial pairwise distance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversaryTemplate {
    Rigid,
    Truncate(f64),
    TruncateRelative(f64),
}

impl AdversaryTemplate {
    pub fn instantiate(&self, min_distance: Option<f64>) -> MotionAdversary {
        match *self {
            AdversaryTemplate::Rigid => MotionAdversary::Rigid,
            AdversaryTemplate::Truncate(delta) => MotionAdversary::Truncate { delta },
            AdversaryTemplate::TruncateRelative(f) => MotionAdversary::Truncate {
                delta: f * min_distance.unwrap_or(1.0),
            },
        }
    }
}

impl fmt::Display for AdversaryTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryTemplate::Rigid => write!(f, "rigid"),
            AdversaryTemplate::Truncate(d) => write!(f, "truncate:{d}"),
            AdversaryTemplate::TruncateRelative(r) => write!(f, "truncate-rel:{r}"),
        }
    }
}

impl FromStr for AdversaryTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |x: &str| x.parse::<f64>().map_err(|_| format!("bad number in adversary '{s}'"));
        if s == "rigid" {
            Ok(AdversaryTemplate::Rigid)
        } else if let Some(d) = s.strip_prefix("truncate-rel:") {
            Ok(AdversaryTemplate::TruncateRelative(num(d)?))
        } else if let Some(d) = s.strip_prefix("truncate:") {
            Ok(AdversaryTemplate::Truncate(num(d)?))
        } else {
            Err(format!(
                "unknown adversary '{s}' (expected rigid, truncate:<d> or truncate-rel:<f>)"
            ))
        }
    }
}

/// Serializes a list through `Display` / `FromStr`.
mod labels {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse::<T>().map_err(D::Error::custom))
            .collect()
    }
}

fn default_schedulers() -> Vec<SchedulerTemplate> {
    vec![SchedulerTemplate::FullSync]
}

fn default_adversaries() -> Vec<AdversaryTemplate> {
    vec![AdversaryTemplate::Rigid]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_max_rounds() -> u64 {
    DEFAULT_MAX_ROUNDS
}

/// Batch file, e.g.
/// `{"patterns": ["LINE(3)", "GRID(3)"], "schedulers": ["full", "rr:1"],
///   "adversaries": ["rigid", "truncate-rel:1e-4"], "seeds": [1, 2]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    #[serde(with = "labels")]
    pub patterns: Vec<Pattern>,
    #[serde(with = "labels", default = "default_schedulers")]
    pub schedulers: Vec<SchedulerTemplate>,
    #[serde(with = "labels", default = "default_adversaries")]
    pub adversaries: Vec<AdversaryTemplate>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u64,
    #[serde(default)]
    pub settle_rounds: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub law: DisplacementLaw,
}

impl BatchSpec {
    pub fn new(patterns: Vec<Pattern>) -> Self {
        BatchSpec {
            patterns,
            schedulers: default_schedulers(),
            adversaries: default_adversaries(),
            seeds: default_seeds(),
            max_rounds: DEFAULT_MAX_ROUNDS,
            settle_rounds: 0,
            tolerances: Tolerances::default(),
            law: DisplacementLaw::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let empty = |what: &str| Err(ExperimentError::InvalidBatch(format!("no {what} given")));
        if self.patterns.is_empty() {
            return empty("patterns");
        }
        if self.schedulers.is_empty() {
            return empty("schedulers");
        }
        if self.adversaries.is_empty() {
            return empty("adversaries");
        }
        if self.seeds.is_empty() {
            return empty("seeds");
        }
        if self.max_rounds == 0 {
            return Err(ExperimentError::InvalidBatch("max_rounds must be at least 1".into()));
        }
        for p in &self.patterns {
            generate(p).map_err(|e| ExperimentError::InvalidBatch(format!("{p}: {e}")))?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &pattern in &self.patterns {
            for &scheduler in &self.schedulers {
                for &adversary in &self.adversaries {
                    for &seed in &self.seeds {
                        out.push(Cell {
                            pattern,
                            scheduler,
                            adversary,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn cell_spec(&self, cell: &Cell) -> Result<SimulationSpec, String> {
        let initial = generate(&cell.pattern).map_err(|e| e.to_string())?;
        let n = initial.len();
        let min_distance = initial.min_pairwise_distance();
        let mut spec = SimulationSpec::new(initial, cell.seed);
        spec.policy = cell.scheduler.instantiate(n);
        spec.adversary = cell.adversary.instantiate(min_distance);
        spec.max_rounds = self.max_rounds;
        spec.settle_rounds = self.settle_rounds;
        spec.tolerances = self.tolerances;
        spec.law = self.law;
        spec.frames = FrameMode::Identity;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub pattern: Pattern,
    pub scheduler: SchedulerTemplate,
    pub adversary: AdversaryTemplate,
    pub seed: u64,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub config: String,
    pub n: usize,
    pub scheduler: String,
    pub adversary: String,
    pub delta: Option<f64>,
    pub seed: u64,
    pub outcome: String,
    pub completion_round: Option<u64>,
    pub rounds_run: u64,
    pub moves: usize,
    pub initial_triples: Option<u64>,
    pub max_triples: Option<u64>,
    pub initial_cycles: Option<u64>,
    pub final_cycles: Option<u64>,
    pub no_new_collinearity: Option<Verdict>,
    pub height_bound: Option<Verdict>,
    pub collision_free: Option<Verdict>,
    pub hull_invariance: Option<Verdict>,
    pub quiescence: Option<Verdict>,
    pub progress: Option<Verdict>,
    pub fault: Option<String>,
}

impl CellResult {
    pub fn reached(&self) -> bool {
        self.completion_round.is_some()
    }

    pub fn verdicts(&self) -> [(Monitor, Option<Verdict>); 6] {
        [
            (Monitor::NoNewCollinearity, self.no_new_collinearity),
            (Monitor::HeightBound, self.height_bound),
            (Monitor::CollisionFree, self.collision_free),
            (Monitor::HullInvariance, self.hull_invariance),
            (Monitor::Quiescence, self.quiescence),
            (Monitor::Progress, self.progress),
        ]
    }

    pub fn any_monitor_failed(&self) -> bool {
        self.verdicts().iter().any(|(_, v)| *v == Some(Verdict::Fail))
    }
}

fn metric(reports: &[MonitorReport], m: Monitor, key: &str) -> Option<u64> {
    reports
        .iter()
        .find(|r| r.monitor == m)
        .and_then(|r| r.metrics.get(key))
        .and_then(|v| v.as_u64())
}

pub fn run_cell(batch: &BatchSpec, cell: &Cell) -> CellResult {
    let mut row = CellResult {
        config: cell.pattern.to_string(),
        n: 0,
        scheduler: cell.scheduler.to_string(),
        adversary: cell.adversary.to_string(),
        delta: None,
        seed: cell.seed,
        outcome: "FAULT".into(),
        completion_round: None,
        rounds_run: 0,
        moves: 0,
        initial_triples: None,
        max_triples: None,
        initial_cycles: None,
        final_cycles: None,
        no_new_collinearity: None,
        height_bound: None,
        collision_free: None,
        hull_invariance: None,
        quiescence: None,
        progress: None,
        fault: None,
    };
    let spec = match batch.cell_spec(cell) {
        Ok(s) => s,
        Err(e) => {
            row.fault = Some(e);
            return row;
        }
    };
    row.n = spec.initial.len();
    if let MotionAdversary::Truncate { delta } = spec.adversary {
        row.delta = Some(delta);
    }
    let trace = match run(&spec) {
        Ok(t) => t,
        Err(e) => {
            row.rounds_run = e.completed.len() as u64;
            row.fault = Some(e.to_string());
            return row;
        }
    };
    row.outcome = match trace.outcome {
        Outcome::ReachedGeneralPosition { .. } => "REACHED_GENERAL_POSITION".into(),
        Outcome::MaxRoundsExceeded => "MAX_ROUNDS_EXCEEDED".into(),
    };
    row.completion_round = trace.completion_round();
    row.rounds_run = trace.rounds.len() as u64;
    row.moves = trace.move_count();
    let reports = verify_all(&trace);
    row.initial_triples = metric(&reports, Monitor::NoNewCollinearity, "initial_triples");
    row.max_triples = metric(&reports, Monitor::NoNewCollinearity, "max_triples");
    row.initial_cycles = metric(&reports, Monitor::Progress, "initial_cycles");
    row.final_cycles = metric(&reports, Monitor::Progress, "final_cycles");
    for r in &reports {
        let slot = match r.monitor {
            Monitor::NoNewCollinearity => &mut row.no_new_collinearity,
            Monitor::HeightBound => &mut row.height_bound,
            Monitor::CollisionFree => &mut row.collision_free,
            Monitor::HullInvariance => &mut row.hull_invariance,
            Monitor::Quiescence => &mut row.quiescence,
            Monitor::Progress => &mut row.progress,
        };
        *slot = Some(r.verdict);
    }
    row
}

/// Runs every cell, in parallel, returning rows in cell order.
pub fn run_batch(batch: &BatchSpec) -> Result<Vec<CellResult>, ExperimentError> {
    batch.validate()?;
    let cells = batch.cells();
    Ok(cells.par_iter().map(|c| run_cell(batch, c)).collect())
}

pub fn write_csv<W: Write>(rows: &[CellResult], w: W) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
