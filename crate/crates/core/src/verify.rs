//! Offline monitors for recorded traces.
//!
//! Monitors work from raw positions only. Collinear triples, visibility,
//! terminality and heights are recomputed here by direct enumeration rather
//! than taken from the simulator or the vision module.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Configuration, RobotId};
use crate::geometry::{convex_hull_tol, is_collinear, Point, Tolerances};
use crate::simulator::{Outcome, Trace};
use crate::vision::line_structure;

/// Per-coordinate tolerance when comparing hull vertices.
pub const HULL_TOLERANCE: f64 = 1e-9;

/// Shrink factor allowed per round for a triangle height.
pub const HEIGHT_FACTOR: f64 = 1.0 - 3.0 / 81.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Configuration index (or round index for per-round checks).
    pub round: u64,
    pub ids: Vec<RobotId>,
    pub values: Vec<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub monitor: Monitor,
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    #[serde(default)]
    pub reason: Option<String>,
    pub metrics: BTreeMap<String, Value>,
}

impl MonitorReport {
    fn new(monitor: Monitor) -> Self {
        MonitorReport {
            monitor,
            verdict: Verdict::Pass,
            violations: Vec::new(),
            reason: None,
            metrics: BTreeMap::new(),
        }
    }

    fn finish(mut self) -> Self {
        if !self.violations.is_empty() {
            self.verdict = Verdict::Fail;
        }
        self
    }

    fn not_applicable(mut self, verdict: Verdict, reason: &str) -> Self {
        self.verdict = verdict;
        self.reason = Some(reason.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitor {
    NoNewCollinearity,
    HeightBound,
    CollisionFree,
    HullInvariance,
    Quiescence,
    Progress,
}

impl Monitor {
    pub const ALL: [Monitor; 6] = [
        Monitor::NoNewCollinearity,
        Monitor::HeightBound,
        Monitor::CollisionFree,
        Monitor::HullInvariance,
        Monitor::Quiescence,
        Monitor::Progress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::NoNewCollinearity => "no-new-collinearity",
            Monitor::HeightBound => "height-bound",
            Monitor::CollisionFree => "collision-free",
            Monitor::HullInvariance => "hull-invariance",
            Monitor::Quiescence => "quiescence",
            Monitor::Progress => "progress",
        }
    }

    pub fn check(self, trace: &Trace) -> MonitorReport {
        match self {
            Monitor::NoNewCollinearity => monitor_no_new_collinearity(trace),
            Monitor::HeightBound => monitor_height_bound(trace),
            Monitor::CollisionFree => monitor_collision_free(trace),
            Monitor::HullInvariance => monitor_hull_invariance(trace),
            Monitor::Quiescence => monitor_quiescence(trace),
            Monitor::Progress => monitor_progress(trace),
        }
    }
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Monitor {
    type Err = String;

    /// Full names plus the short forms `collinearity`, `height`, `collision`
    /// and `hull`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let m = match s {
            "no-new-collinearity" | "collinearity" => Monitor::NoNewCollinearity,
            "height-bound" | "height" => Monitor::HeightBound,
            "collision-free" | "collision" => Monitor::CollisionFree,
            "hull-invariance" | "hull" => Monitor::HullInvariance,
            "quiescence" => Monitor::Quiescence,
            "progress" => Monitor::Progress,
            other => return Err(format!("unknown monitor '{other}'")),
        };
        Ok(m)
    }
}

/// Runs the given monitors in parallel, in the given order.
pub fn verify(trace: &Trace, monitors: &[Monitor]) -> Vec<MonitorReport> {
    monitors.par_iter().map(|m| m.check(trace)).collect()
}

pub fn verify_all(trace: &Trace) -> Vec<MonitorReport> {
    verify(trace, &Monitor::ALL)
}

/// True iff no report failed.
pub fn all_clear(reports: &[MonitorReport]) -> bool {
    reports.iter().all(|r| r.verdict != Verdict::Fail)
}

pub type TripleSet = BTreeSet<[RobotId; 3]>;

/// Every unordered triple classified collinear, ids ascending.
pub fn collinear_triples(config: &Configuration, tol: &Tolerances) -> TripleSet {
    let r = config.robots();
    let mut out = BTreeSet::new();
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            for k in j + 1..r.len() {
                if is_collinear(r[i].position, r[j].position, r[k].position, tol) {
                    out.insert([r[i].id, r[j].id, r[k].id]);
                }
            }
        }
    }
    out
}

/// `m` lies on segment `ab`, away from both ends, given collinearity.
fn strictly_between(a: Point, m: Point, b: Point, tol: &Tolerances) -> bool {
    let ab = b.minus(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return false;
    }
    let t = m.minus(a).dot(ab) / len2;
    let margin = tol.eps_dist / len2.sqrt();
    t > margin && t < 1.0 - margin
}

/// Visibility matrix: `i` and `j` see each other unless some third robot on
/// their segment blocks them.
pub fn mutual_visibility(points: &[Point], tol: &Tolerances) -> Vec<Vec<bool>> {
    let n = points.len();
    let mut vis = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let blocked = (0..n).any(|k| {
                k != i
                    && k != j
                    && is_collinear(points[i], points[k], points[j], tol)
                    && strictly_between(points[i], points[k], points[j], tol)
            });
            vis[i][j] = !blocked;
            vis[j][i] = !blocked;
        }
    }
    vis
}

/// Robots strictly between two others on a collinear triple.
pub fn non_terminal_ids(config: &Configuration, tol: &Tolerances) -> BTreeSet<RobotId> {
    let r = config.robots();
    let n = r.len();
    let mut out = BTreeSet::new();
    for m in 0..n {
        'search: for a in 0..n {
            for b in a + 1..n {
                if a == m || b == m {
                    continue;
                }
                let (pa, pm, pb) = (r[a].position, r[m].position, r[b].position);
                if is_collinear(pa, pm, pb, tol) && strictly_between(pa, pm, pb, tol) {
                    out.insert(r[m].id);
                    break 'search;
                }
            }
        }
    }
    out
}

fn height(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.minus(a);
    ab.cross(p.minus(a)).abs() / ab.norm()
}

/// Compressed series: `[index, value]` at index 0 and wherever it changes.
fn change_points(values: impl Iterator<Item = usize>) -> Vec<[usize; 2]> {
    let mut out: Vec<[usize; 2]> = Vec::new();
    for (t, v) in values.enumerate() {
        if out.last().is_none_or(|l| l[1] != v) {
            out.push([t, v]);
        }
    }
    out
}

fn triple_sets(trace: &Trace) -> Vec<TripleSet> {
    let tol = trace.spec.tolerances;
    let configs: Vec<&Configuration> = trace.configurations().collect();
    configs.par_iter().map(|c| collinear_triples(c, &tol)).collect()
}

pub fn monitor_no_new_collinearity(trace: &Trace) -> MonitorReport {
    let mut report = MonitorReport::new(Monitor::NoNewCollinearity);
    let sets = triple_sets(trace);
    for (t, w) in sets.windows(2).enumerate() {
        for tri in w[1].difference(&w[0]) {
            report.violations.push(Violation {
                round: t as u64 + 1,
                ids: tri.to_vec(),
                values: vec![],
                note: format!("triple collinear at {} but not at {t}", t + 1),
            });
        }
    }
    let counts: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    report.metrics.insert("initial_triples".into(), json!(counts[0]));
    report.metrics.insert("final_triples".into(), json!(counts.last()));
    report.metrics.insert("max_triples".into(), json!(counts.iter().max()));
    report
        .metrics
        .insert("non_increasing".into(), json!(counts.windows(2).all(|w| w[1] <= w[0])));
    report.finish()
}

pub fn monitor_height_bound(trace: &Trace) -> MonitorReport {
    let mut report = MonitorReport::new(Monitor::HeightBound);
    let tol = trace.spec.tolerances;
    let configs: Vec<&Configuration> = trace.configurations().collect();
    let per_round: Vec<(Vec<Violation>, usize, f64)> = (0..configs.len().saturating_sub(1))
        .into_par_iter()
        .map(|t| {
            let (before, after) = (configs[t], configs[t + 1]);
            let p = before.positions();
            let q = after.positions();
            if p == q {
                return (Vec::new(), 0, f64::INFINITY);
            }
            let ids: Vec<RobotId> = before.ids().collect();
            let vis = mutual_visibility(&p, &tol);
            let n = p.len();
            let mut out = Vec::new();
            let mut checked = 0;
            let mut worst = f64::INFINITY;
            for i in 0..n {
                for j in i + 1..n {
                    if !vis[i][j] {
                        continue;
                    }
                    for k in j + 1..n {
                        if !vis[i][k] || !vis[j][k] || is_collinear(p[i], p[j], p[k], &tol) {
                            continue;
                        }
                        for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                            // height of c over line ab
                            let h0 = height(p[c], p[a], p[b]);
                            let h1 = height(q[c], q[a], q[b]);
                            checked += 1;
                            worst = worst.min(h1 / h0);
                            if h1 <= HEIGHT_FACTOR * h0 - tol.eps_dist {
                                out.push(Violation {
                                    round: t as u64,
                                    ids: vec![ids[a], ids[b], ids[c]],
                                    values: vec![h0, h1],
                                    note: format!("height of {} over {}-{} shrank too fast", ids[c], ids[a], ids[b]),
                                });
                            }
                        }
                    }
                }
            }
            (out, checked, worst)
        })
        .collect();
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for (v, c, w) in per_round {
        report.violations.extend(v);
        checked += c;
        worst = worst.min(w);
    }
    report.metrics.insert("heights_checked".into(), json!(checked));
    if worst.is_finite() {
        report.metrics.insert("min_height_ratio".into(), json!(worst));
    }
    report.finish()
}

pub fn monitor_collision_free(trace: &Trace) -> MonitorReport {
    let mut report = MonitorReport::new(Monitor::CollisionFree);
    let eps = trace.spec.tolerances.eps_dist;
    let mut min_distance = f64::INFINITY;
    for (t, c) in trace.configurations().enumerate() {
        let r = c.robots();
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                let d = r[i].position.distance(r[j].position);
                min_distance = min_distance.min(d);
                if d <= eps {
                    report.violations.push(Violation {
                        round: t as u64,
                        ids: vec![r[i].id, r[j].id],
                        values: vec![d],
                        note: "robots coincide".into(),
                    });
                }
            }
        }
    }
    let mut coincidences = 0;
    for rec in &trace.rounds {
        for (a, ma) in rec.moves.iter().enumerate() {
            for mb in &rec.moves[a + 1..] {
                let d = ma.reached.distance(mb.reached);
                if d <= eps {
                    coincidences += 1;
                    report.violations.push(Violation {
                        round: rec.round,
                        ids: vec![ma.id, mb.id],
                        values: vec![d],
                        note: "executed destinations coincide".into(),
                    });
                }
            }
        }
    }
    if min_distance.is_finite() {
        report
            .metrics
            .insert("min_pairwise_distance".into(), json!(min_distance));
    }
    report
        .metrics
        .insert("destination_coincidences".into(), json!(coincidences));
    report.finish()
}

fn hull_matches(hull: &[Point], reference: &[Point]) -> bool {
    let close = |p: &Point, q: &Point| (p.x - q.x).abs() <= HULL_TOLERANCE && (p.y - q.y).abs() <= HULL_TOLERANCE;
    hull.len() == reference.len()
        && hull.iter().all(|p| reference.iter().any(|q| close(p, q)))
        && reference.iter().all(|q| hull.iter().any(|p| close(p, q)))
}

pub fn monitor_hull_invariance(trace: &Trace) -> MonitorReport {
    let report = MonitorReport::new(Monitor::HullInvariance);
    let tol = trace.spec.tolerances;
    let initial = convex_hull_tol(&trace.spec.initial.positions(), &tol);
    if initial.len() < 3 {
        return report.not_applicable(Verdict::Skipped, "initial configuration is all collinear");
    }
    let mut report = report;
    for (t, c) in trace.configurations().enumerate().skip(1) {
        let hull = convex_hull_tol(&c.positions(), &tol);
        if !hull_matches(&hull, &initial) {
            report.violations.push(Violation {
                round: t as u64,
                ids: vec![],
                values: hull.iter().flat_map(|p| [p.x, p.y]).collect(),
                note: format!(
                    "hull has {} vertices differing from the initial {}",
                    hull.len(),
                    initial.len()
                ),
            });
        }
    }
    report.metrics.insert("hull_vertices".into(), json!(initial.len()));
    report.finish()
}

/// First configuration index with no collinear triple, recomputed.
fn first_general_position(sets: &[TripleSet]) -> Option<usize> {
    sets.iter().position(|s| s.is_empty())
}

pub fn monitor_quiescence(trace: &Trace) -> MonitorReport {
    let report = MonitorReport::new(Monitor::Quiescence);
    let Outcome::ReachedGeneralPosition { round: reached } = trace.outcome else {
        return report.not_applicable(Verdict::Inconclusive, "run did not reach general position");
    };
    let mut report = report;
    let mut checked = 0;
    for rec in trace.rounds.iter().filter(|r| r.round >= reached) {
        checked += 1;
        for d in rec.decisions.iter().filter(|d| d.decision.is_move()) {
            report.violations.push(Violation {
                round: rec.round,
                ids: vec![d.id],
                values: vec![],
                note: "move after general position".into(),
            });
        }
        for m in &rec.moves {
            if m.from != m.reached {
                report.violations.push(Violation {
                    round: rec.round,
                    ids: vec![m.id],
                    values: vec![m.executed_length],
                    note: "position changed after general position".into(),
                });
            }
        }
    }
    report.metrics.insert("rounds_after_completion".into(), json!(checked));
    report.finish()
}

pub fn monitor_progress(trace: &Trace) -> MonitorReport {
    let mut report = MonitorReport::new(Monitor::Progress);
    let tol = trace.spec.tolerances;
    let configs: Vec<&Configuration> = trace.configurations().collect();
    let sets = triple_sets(trace);
    report.metrics.insert(
        "triple_counts".into(),
        json!(change_points(sets.iter().map(|s| s.len()))),
    );

    // cycle census only changes when someone moves
    let mut census = Vec::with_capacity(configs.len());
    let mut last: Option<(Vec<Point>, usize)> = None;
    for c in &configs {
        let pos = c.positions();
        let count = match &last {
            Some((p, n)) if *p == pos => *n,
            _ => line_structure(c, &tol).cycles.len(),
        };
        census.push(count);
        last = Some((pos, count));
    }
    report.metrics.insert("initial_cycles".into(), json!(census[0]));
    report.metrics.insert("final_cycles".into(), json!(census.last()));
    report
        .metrics
        .insert("cycle_census".into(), json!(change_points(census.into_iter())));

    let non_terminal: Vec<BTreeSet<RobotId>> = configs.par_iter().map(|c| non_terminal_ids(c, &tol)).collect();
    let mut first_terminal: BTreeMap<RobotId, Option<usize>> = BTreeMap::new();
    for id in trace.spec.initial.ids() {
        first_terminal.insert(id, non_terminal.iter().position(|s| !s.contains(&id)));
    }
    report
        .metrics
        .insert("first_terminal_round".into(), json!(first_terminal));

    // terminality persists while no new collinearity appears
    for t in 0..non_terminal.len().saturating_sub(1) {
        if !sets[t + 1].is_subset(&sets[t]) {
            continue;
        }
        for id in non_terminal[t + 1].difference(&non_terminal[t]) {
            report.violations.push(Violation {
                round: t as u64 + 1,
                ids: vec![*id],
                values: vec![],
                note: "terminal robot became non-terminal".into(),
            });
        }
    }

    match trace.outcome {
        Outcome::MaxRoundsExceeded => {
            let report = report.finish();
            if report.verdict == Verdict::Fail {
                return report;
            }
            return report.not_applicable(Verdict::Inconclusive, "run stopped at max_rounds");
        }
        Outcome::ReachedGeneralPosition { round } => {
            let recomputed = first_general_position(&sets);
            if recomputed != Some(round as usize) {
                report.violations.push(Violation {
                    round,
                    ids: vec![],
                    values: vec![],
                    note: format!("recorded completion {round}, recomputed {recomputed:?}"),
                });
            }
            for (t, s) in non_terminal.iter().enumerate().skip(round as usize) {
                for id in s {
                    report.violations.push(Violation {
                        round: t as u64,
                        ids: vec![*id],
                        values: vec![],
                        note: "non-terminal robot after completion".into(),
                    });
                }
            }
        }
    }
    report.finish()
}

/// One line per report: `monitor  VERDICT  violations  reason`.
pub fn summary_table(reports: &[MonitorReport]) -> String {
    let mut out = format!("{:<22}{:<14}{:>10}  note\n", "monitor", "verdict", "violations");
    for r in reports {
        let note = match (&r.reason, r.violations.first()) {
            (Some(reason), _) => reason.clone(),
            (None, Some(v)) => format!("first at round {}: {}", v.round, v.note),
            (None, None) => String::new(),
        };
        out.push_str(&format!(
            "{:<22}{:<14}{:>10}  {}\n",
            r.monitor.name(),
            r.verdict.to_string(),
            r.violations.len(),
            note
        ));
    }
    out
}
