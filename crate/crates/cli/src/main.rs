use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use mutvis::experiment::{run_batch, write_csv, BatchSpec, ExperimentError};
use mutvis::render::render_round;
use mutvis::simulator::{run, ActivationPolicy, FrameMode, MotionAdversary, Outcome, SimError, SimulationSpec};
use mutvis::trace::{load_trace, read_configuration, save_trace, write_configuration, write_faulted, TraceError};
use mutvis::verify::{all_clear, summary_table, verify, Monitor};
use mutvis::{generate, DisplacementLaw, Pattern, Tolerances};

const EXIT_FAULT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MAX_ROUNDS: u8 = 3;

/// Simulate opaque robots reaching mutual visibility with one bit of memory.
#[derive(Parser)]
#[command(name = "mutvis", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an initial configuration as JSON.
    Gen(GenArgs),
    /// Run a simulation and write its JSONL trace.
    Run(RunArgs),
    /// Check a trace with the correctness monitors.
    Verify(VerifyArgs),
    /// Draw configurations of a trace as SVG.
    Render(RenderArgs),
    /// Run a batch of simulations and tabulate them as CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternKind {
    Line,
    Grid,
    Star,
    Cycle4,
    RandomPlanted,
}

#[derive(Args)]
struct GenArgs {
    pattern: PatternKind,
    /// Robot count (line, random-planted).
    #[arg(long)]
    n: Option<usize>,
    /// Lattice side (grid).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    per_arm: Option<usize>,
    /// Planted lines (random-planted).
    #[arg(long)]
    lines: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration or simulation spec (JSON).
    #[arg(required_unless_present = "pattern", conflicts_with = "pattern")]
    input: Option<PathBuf>,
    /// Generate the start instead, e.g. "GRID(3)".
    #[arg(long)]
    pattern: Option<Pattern>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_rounds: Option<u64>,
    /// full | rr:<k> | random:<p>:<F> | script:<file>
    #[arg(long)]
    scheduler: Option<String>,
    /// Minimum progress per move; enables truncated motion.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    frames: Option<FrameMode>,
    /// Relative collinearity tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// constant | view-scaled
    #[arg(long)]
    displacement: Option<DisplacementLaw>,
    /// Extra rounds to run after general position.
    #[arg(long)]
    settle_rounds: Option<u64>,
    /// Trace output (JSONL).
    #[arg(long, default_value = "trace.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    trace: PathBuf,
    /// Monitor to run; repeat for several. Default: all.
    #[arg(long = "monitor")]
    monitors: Vec<Monitor>,
    /// JSON report path; defaults to <trace>.report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    trace: PathBuf,
    /// Configuration index to draw; defaults to the last.
    #[arg(long, conflicts_with = "all")]
    round: Option<u64>,
    /// Draw every configuration.
    #[arg(long)]
    all: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Batch spec (JSON).
    batch: PathBuf,
    /// CSV output; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error paired with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Render(a) => cmd_render(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| usage(anyhow!("--{flag} is required for this pattern")));
    let pattern = match a.pattern {
        PatternKind::Line => Pattern::Line { n: need(a.n, "n")? },
        PatternKind::Grid => Pattern::Grid { k: need(a.k, "k")? },
        PatternKind::Star => Pattern::Star {
            arms: need(a.arms, "arms")?,
            per_arm: need(a.per_arm, "per-arm")?,
        },
        PatternKind::Cycle4 => Pattern::Cycle4,
        PatternKind::RandomPlanted => Pattern::RandomPlanted {
            n: need(a.n, "n")?,
            lines: need(a.lines, "lines")?,
            seed: a.seed,
        },
    };
    let config = generate(&pattern).map_err(usage)?;
    let w = output(a.out.as_deref())
        .with_context(|| format!("cannot write {}", a.out.as_deref().unwrap_or(Path::new("-")).display()))
        .map_err(usage)?;
    write_configuration(&config, w).context("write failed").map_err(usage)?;
    Ok(ExitCode::SUCCESS)
}

/// A run input: either a full spec or a bare configuration.
fn load_spec(path: &Path, tol: &Tolerances) -> anyhow::Result<SimulationSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
    if value.get("initial").is_some() {
        let mut spec: SimulationSpec = serde_json::from_value(value).context("invalid simulation spec")?;
        spec.initial = spec.initial.normalized(&spec.tolerances)?;
        Ok(spec)
    } else {
        let config = read_configuration(text.as_bytes(), tol)?;
        Ok(SimulationSpec::new(config, 0))
    }
}

#[derive(Deserialize)]
struct ScriptFile {
    rounds: Vec<Vec<u32>>,
    fairness_window: u64,
}

fn parse_scheduler(s: &str) -> anyhow::Result<ActivationPolicy> {
    if let Some(file) = s.strip_prefix("script:") {
        let f = File::open(file).with_context(|| format!("cannot open script {file}"))?;
        let script: ScriptFile =
            serde_json::from_reader(BufReader::new(f)).with_context(|| format!("invalid script {file}"))?;
        return Ok(ActivationPolicy::Scripted {
            rounds: script.rounds,
            fairness_window: script.fairness_window,
        });
    }
    s.parse::<ActivationPolicy>().map_err(|e| anyhow!(e))
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let mut tol = Tolerances::default();
    if let Some(eps) = a.tol {
        tol = Tolerances::new(eps, tol.eps_dist).map_err(usage)?;
    }
    let mut spec = match (&a.input, a.pattern) {
        (Some(path), _) => load_spec(path, &tol).map_err(usage)?,
        (None, Some(p)) => SimulationSpec::new(generate(&p).map_err(usage)?, 0),
        (None, None) => return Err(usage(anyhow!("give an input file or --pattern"))),
    };
    if a.tol.is_some() {
        spec.tolerances = tol;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(m) = a.max_rounds {
        spec.max_rounds = m;
    }
    if let Some(s) = &a.scheduler {
        spec.policy = parse_scheduler(s).map_err(usage)?;
    }
    if let Some(delta) = a.delta {
        spec.adversary = MotionAdversary::Truncate { delta };
    }
    if let Some(f) = a.frames {
        spec.frames = f;
    }
    if let Some(law) = a.displacement {
        spec.law = law;
    }
    if let Some(k) = a.settle_rounds {
        spec.settle_rounds = k;
    }
    spec.validate().map_err(usage)?;

    let trace = match run(&spec) {
        Ok(t) => t,
        Err(e) => {
            let f = File::create(&a.out).with_context(|| format!("cannot write {}", a.out.display()));
            if let Ok(f) = f {
                let _ = write_faulted(&spec, &e.completed, &e.fault, BufWriter::new(f));
            }
            let code = match e.fault {
                SimError::InvalidSpec(_) => EXIT_USAGE,
                _ => EXIT_FAULT,
            };
            return Err(Failure {
                code,
                error: anyhow!("fault after {} completed rounds: {}", e.completed.len(), e.fault),
            });
        }
    };
    save_trace(&trace, &a.out)
        .with_context(|| format!("cannot write {}", a.out.display()))
        .map_err(usage)?;
    let (outcome, completion) = match trace.outcome {
        Outcome::ReachedGeneralPosition { round } => ("REACHED_GENERAL_POSITION", round.to_string()),
        Outcome::MaxRoundsExceeded => ("MAX_ROUNDS_EXCEEDED", "-".to_string()),
    };
    println!(
        "outcome={outcome} completion_round={completion} rounds={} moves={} trace={}",
        trace.rounds.len(),
        trace.move_count(),
        a.out.display()
    );
    Ok(match trace.outcome {
        Outcome::ReachedGeneralPosition { .. } => ExitCode::SUCCESS,
        Outcome::MaxRoundsExceeded => ExitCode::from(EXIT_MAX_ROUNDS),
    })
}

fn load(path: &Path) -> Result<mutvis::Trace, Failure> {
    load_trace(path).map_err(|e| match e {
        TraceError::Faulted { .. } => Failure {
            code: EXIT_FAULT,
            error: anyhow!("{}: {e}", path.display()),
        },
        other => usage(anyhow!("{}: {other}", path.display())),
    })
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let trace = load(&a.trace)?;
    let monitors = if a.monitors.is_empty() {
        Monitor::ALL.to_vec()
    } else {
        a.monitors
    };
    let reports = verify(&trace, &monitors);
    print!("{}", summary_table(&reports));
    let out = a.out.unwrap_or_else(|| {
        let mut p = a.trace.clone().into_os_string();
        p.push(".report.json");
        PathBuf::from(p)
    });
    let f = File::create(&out)
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(usage)?;
    serde_json::to_writer_pretty(BufWriter::new(f), &reports)
        .context("cannot write report")
        .map_err(usage)?;
    Ok(if all_clear(&reports) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAULT)
    })
}

fn cmd_render(a: RenderArgs) -> CmdResult {
    let trace = load(&a.trace)?;
    let last = trace.rounds.len() as u64;
    let rounds: Vec<u64> = if a.all {
        (0..=last).collect()
    } else {
        vec![a.round.unwrap_or(last)]
    };
    fs::create_dir_all(&a.out)
        .with_context(|| format!("cannot create {}", a.out.display()))
        .map_err(usage)?;
    for t in rounds {
        let svg = render_round(&trace, t).map_err(usage)?;
        let path = a.out.join(format!("round-{t:05}.svg"));
        fs::write(&path, svg)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(usage)?;
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(a: ExperimentArgs) -> CmdResult {
    let text = fs::read_to_string(&a.batch)
        .with_context(|| format!("cannot read {}", a.batch.display()))
        .map_err(usage)?;
    let batch: BatchSpec = serde_json::from_str(&text)
        .with_context(|| format!("invalid batch {}", a.batch.display()))
        .map_err(usage)?;
    let rows = match run_batch(&batch) {
        Ok(rows) => rows,
        Err(e @ ExperimentError::InvalidBatch(_)) => return Err(usage(e)),
        Err(e) => {
            return Err(Failure {
                code: EXIT_FAULT,
                error: e.into(),
            })
        }
    };
    let w = output(a.out.as_deref())
        .with_context(|| "cannot open CSV output")
        .map_err(usage)?;
    write_csv(&rows, w).map_err(usage)?;
    let faults = rows.iter().filter(|r| r.fault.is_some()).count();
    let failed = rows.iter().filter(|r| r.any_monitor_failed()).count();
    let unfinished = rows.iter().filter(|r| r.fault.is_none() && !r.reached()).count();
    eprintln!(
        "{} cells: {} reached general position, {unfinished} hit max_rounds, {faults} faulted, {failed} with a failed monitor",
        rows.len(),
        rows.iter().filter(|r| r.reached()).count()
    );
    Ok(if faults + failed > 0 {
        ExitCode::from(EXIT_FAULT)
    } else if unfinished > 0 {
        ExitCode::from(EXIT_MAX_ROUNDS)
    } else {
        ExitCode::SUCCESS
    })
}
