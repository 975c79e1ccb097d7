//! JSON-lines trace files.
//!
//! Line 1 is a header echoing the spec, then one line per round, then one
//! outcome line. A run that faulted ends with a fault line instead. Floats use
//! the shortest representation that parses back to the same `f64`, so a
//! reloaded trace is bit-identical to the one written.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Configuration};
use crate::geometry::Tolerances;
use crate::simulator::{Outcome, RoundRecord, SimError, SimulationSpec, Trace};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace is empty")]
    Empty,
    #[error("trace has no outcome line")]
    MissingOutcome,
    #[error("line {line}: run faulted: {message}")]
    Faulted {
        line: usize,
        round: Option<u64>,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Header { format: u32, spec: SimulationSpec },
    Round(RoundRecord),
    Outcome { outcome: Outcome },
    Fault { round: Option<u64>, message: String },
}

fn write_line<W: Write>(w: &mut W, line: &TraceLine) -> io::Result<()> {
    serde_json::to_writer(&mut *w, line)?;
    w.write_all(b"\n")
}

/// Writes a complete trace.
pub fn write_trace<W: Write>(trace: &Trace, mut w: W) -> io::Result<()> {
    write_partial(&trace.spec, &trace.rounds, &mut w)?;
    write_line(&mut w, &TraceLine::Outcome { outcome: trace.outcome })?;
    w.flush()
}

/// Writes the rounds completed before `fault`, ending in a fault line.
pub fn write_faulted<W: Write>(
    spec: &SimulationSpec,
    rounds: &[RoundRecord],
    fault: &SimError,
    mut w: W,
) -> io::Result<()> {
    write_partial(spec, rounds, &mut w)?;
    write_line(
        &mut w,
        &TraceLine::Fault {
            round: fault.round(),
            message: fault.to_string(),
        },
    )?;
    w.flush()
}

fn write_partial<W: Write>(spec: &SimulationSpec, rounds: &[RoundRecord], w: &mut W) -> io::Result<()> {
    write_line(
        w,
        &TraceLine::Header {
            format: FORMAT_VERSION,
            spec: spec.clone(),
        },
    )?;
    for r in rounds {
        write_line(w, &TraceLine::Round(r.clone()))?;
    }
    Ok(())
}

pub fn save_trace(trace: &Trace, path: &Path) -> io::Result<()> {
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn load_trace(path: &Path) -> Result<Trace, TraceError> {
    read_trace(BufReader::new(File::open(path)?))
}

/// Reads and schema-checks a trace. Positions are not required to be
/// collision-free, so forged traces can still be loaded and verified.
pub fn read_trace<R: BufRead>(r: R) -> Result<Trace, TraceError> {
    let mut spec: Option<SimulationSpec> = None;
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut outcome: Option<Outcome> = None;
    for (k, text) in r.lines().enumerate() {
        let line = k + 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| TraceError::Parse { line, message };
        if outcome.is_some() {
            return Err(parse_err("content after the outcome line".into()));
        }
        let entry: TraceLine = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        match entry {
            TraceLine::Header { format, spec: mut s } => {
                if spec.is_some() {
                    return Err(parse_err("second header line".into()));
                }
                if format != FORMAT_VERSION {
                    return Err(parse_err(format!("unsupported trace format {format}")));
                }
                check_configuration(&mut s.initial).map_err(|e| parse_err(e.to_string()))?;
                spec = Some(s);
            }
            TraceLine::Round(mut rec) => {
                let Some(s) = &spec else {
                    return Err(parse_err("round line before header".into()));
                };
                let expected = rounds.len() as u64;
                if rec.round != expected {
                    return Err(parse_err(format!(
                        "round {} out of order, expected {expected}",
                        rec.round
                    )));
                }
                if rec.configuration.round != expected + 1 {
                    return Err(parse_err(format!(
                        "round {expected} configuration is labelled round {}",
                        rec.configuration.round
                    )));
                }
                check_configuration(&mut rec.configuration).map_err(|e| parse_err(e.to_string()))?;
                let before: Vec<_> = s.initial.ids().collect();
                let after: Vec<_> = rec.configuration.ids().collect();
                if before != after {
                    return Err(parse_err("robot ids differ from the initial configuration".into()));
                }
                rounds.push(rec);
            }
            TraceLine::Outcome { outcome: o } => {
                if spec.is_none() {
                    return Err(parse_err("outcome line before header".into()));
                }
                if let Outcome::ReachedGeneralPosition { round } = o {
                    if round > rounds.len() as u64 {
                        return Err(parse_err(format!(
                            "outcome round {round} beyond the {} recorded rounds",
                            rounds.len()
                        )));
                    }
                }
                outcome = Some(o);
            }
            TraceLine::Fault { round, message } => {
                return Err(TraceError::Faulted { line, round, message });
            }
        }
    }
    let spec = spec.ok_or(TraceError::Empty)?;
    let outcome = outcome.ok_or(TraceError::MissingOutcome)?;
    Ok(Trace { spec, rounds, outcome })
}

/// Sorts robots by id and rejects duplicate ids or non-finite positions.
fn check_configuration(c: &mut Configuration) -> Result<(), ConfigError> {
    c.robots_mut().sort_by_key(|r| r.id);
    if c.is_empty() {
        return Err(ConfigError::Empty);
    }
    for w in c.robots().windows(2) {
        if w[0].id == w[1].id {
            return Err(ConfigError::DuplicateId(w[0].id));
        }
    }
    if let Some(r) = c.robots().iter().find(|r| !r.position.is_finite()) {
        return Err(ConfigError::NonFinite(r.id));
    }
    Ok(())
}

/// Reads a configuration file: `{"round": 0, "robots": [{"id", "position":
/// {"x", "y"}, "bit"}]}`. `round` may be omitted.
pub fn read_configuration<R: io::Read>(r: R, tol: &Tolerances) -> Result<Configuration, TraceError> {
    #[derive(Deserialize)]
    struct File {
        #[serde(default)]
        round: u64,
        robots: Vec<crate::config::Robot>,
    }
    let f: File = serde_json::from_reader(r).map_err(|e| TraceError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    Configuration::new(f.round, f.robots, tol).map_err(|e| TraceError::Parse {
        line: 0,
        message: e.to_string(),
    })
}

pub fn write_configuration<W: Write>(c: &Configuration, mut w: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, c)?;
    w.write_all(b"\n")?;
    w.flush()
}
