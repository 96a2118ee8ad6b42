//! Batch scenario runner behind the `sspaxos` binary.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::monitor::{Monitor, Report};
use crate::protocol::Note;
use crate::simnet::scenario::RunMode;
use crate::simnet::{trace, Effect, InitMode, Network, Overflow, Scenario, SimError, ThetaMode};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SSPAXOS_OUT";

#[derive(Debug, Parser)]
#[command(name = "sspaxos", version, about = "Simulate and audit self-stabilizing Paxos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file for one seed or a range of seeds.
    Run(RunArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Seed of a single run; defaults to the scenario's `init.seed`.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Inclusive seed range `A..B`.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<RangeInclusive<u64>>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long, value_enum)]
    pub theta: Option<ThetaArg>,
    #[arg(long)]
    pub max_events: Option<u64>,
    #[arg(long, value_enum)]
    pub overflow: Option<OverflowArg>,
    /// Output directory; defaults to `$SSPAXOS_OUT`, then `sspaxos-out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run without the monitor: no annotations and no report.
    #[arg(long)]
    pub no_monitor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Repeated,
    Generalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Clean,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThetaArg {
    Static,
    Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OverflowArg {
    DropOldest,
    DropNewest,
}

fn parse_seeds(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl RunArgs {
    /// The scenario with command-line overrides applied.
    pub fn scenario(&self) -> Result<Scenario, SimError> {
        let mut sc = Scenario::load(&self.scenario)?;
        if let Some(m) = self.mode {
            sc.run.mode = match m {
                ModeArg::Repeated => RunMode::Repeated,
                ModeArg::Generalized => RunMode::Generalized,
            };
        }
        if let Some(i) = self.init {
            sc.init.mode = match i {
                InitArg::Clean => InitMode::Clean,
                InitArg::Adversarial => InitMode::Adversarial,
            };
        }
        if let Some(t) = self.theta {
            sc.theta.mode = match t {
                ThetaArg::Static => ThetaMode::Static,
                ThetaArg::Detector => ThetaMode::Detector,
            };
        }
        if let Some(o) = self.overflow {
            sc.schedule.overflow = match o {
                OverflowArg::DropOldest => Overflow::DropOldest,
                OverflowArg::DropNewest => Overflow::DropNewest,
            };
        }
        if let Some(n) = self.max_events {
            sc.run.max_events = n;
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn seeds(&self, sc: &Scenario) -> RangeInclusive<u64> {
        match (&self.seeds, self.seed) {
            (Some(r), _) => r.clone(),
            (None, Some(s)) => s..=s,
            (None, None) => sc.init.seed..=sc.init.seed,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("sspaxos-out"))
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub events: u64,
    /// Decision count per decided step.
    pub decisions: BTreeMap<u32, usize>,
    pub report: Option<Report>,
}

impl RunSummary {
    pub fn violations(&self) -> Vec<String> {
        self.report.as_ref().map(Report::violations).unwrap_or_default()
    }

    pub fn passed(&self) -> bool {
        self.violations().is_empty()
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let decided: usize = self.decisions.values().sum();
        let safe = self.report.as_ref().map(|r| r.safe_epochs().count());
        write!(
            f,
            "{} seed {}: {} events, {} decisions over {} steps",
            self.scenario,
            self.seed,
            self.events,
            decided,
            self.decisions.len()
        )?;
        if let Some(s) = safe {
            write!(f, ", {s} safe epochs")?;
        }
        let v = self.violations();
        if v.is_empty() {
            write!(f, ", ok")
        } else {
            write!(f, ", {} violations", v.len())
        }
    }
}

/// Where trace and annotation lines go.
pub enum Sink {
    Discard,
    Memory(Vec<String>),
    File(BufWriter<fs::File>),
}

impl Sink {
    fn push(&mut self, line: &str) -> io::Result<()> {
        match self {
            Sink::Discard => Ok(()),
            Sink::Memory(v) => {
                v.push(line.to_string());
                Ok(())
            }
            Sink::File(w) => writeln!(w, "{line}"),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Sink::File(w) => w.flush(),
            _ => Ok(()),
        }
    }

    pub fn lines(&self) -> &[String] {
        match self {
            Sink::Memory(v) => v,
            _ => &[],
        }
    }
}

/// Runs one seed to `max_events` or quiescence.
pub fn run_seed(
    sc: &Scenario,
    name: &str,
    seed: u64,
    monitored: bool,
    trace_sink: &mut Sink,
    notes_sink: &mut Sink,
) -> Result<RunSummary, CliError> {
    let mut net = Network::new(sc, seed)?;
    let space = net.params().tag_space();
    let mut monitor = monitored.then(|| Monitor::new(&net));
    let mut decisions = BTreeMap::new();
    let io = |e| CliError::Io {
        path: PathBuf::from(name),
        source: e,
    };
    while net.event_index() < sc.run.max_events {
        let Some(rec) = net.step() else { break };
        trace_sink.push(&trace::format_step(&rec)).map_err(io)?;
        for effect in &rec.effects {
            if let Effect::Note { note: Note::Decided { tag, .. }, .. } = effect {
                if let Some(mu) = space.chi(tag).id() {
                    *decisions.entry(tag[mu].step).or_insert(0) += 1;
                }
            }
        }
        if let Some(m) = monitor.as_mut() {
            m.observe(&rec, &net);
            for line in m.take_annotations() {
                notes_sink.push(&line).map_err(io)?;
            }
        }
    }
    trace_sink.flush().map_err(io)?;
    notes_sink.flush().map_err(io)?;
    Ok(RunSummary {
        scenario: name.to_string(),
        seed,
        events: net.event_index(),
        decisions,
        report: monitor.map(|m| m.report()),
    })
}

fn file_sink(path: &Path) -> Result<Sink, CliError> {
    let f = fs::File::create(path).map_err(io_err(path))?;
    Ok(Sink::File(BufWriter::new(f)))
}

/// Executes `run` and writes per-seed artifacts plus a batch summary.
pub fn execute(args: &RunArgs) -> Result<Vec<RunSummary>, CliError> {
    let sc = args.scenario()?;
    let name = args
        .scenario
        .file_stem()
        .map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    let out = args.out_dir();
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut summaries = Vec::new();
    for seed in args.seeds(&sc) {
        let base = out.join(format!("{name}-seed{seed}"));
        let mut trace_sink = file_sink(&base.with_extension("trace"))?;
        let mut notes_sink = if args.no_monitor {
            Sink::Discard
        } else {
            file_sink(&base.with_extension("annotations"))?
        };
        let summary = run_seed(&sc, &name, seed, !args.no_monitor, &mut trace_sink, &mut notes_sink)?;
        if let Some(report) = &summary.report {
            let path = base.with_extension("report");
            fs::write(&path, report.to_string()).map_err(io_err(&path))?;
        }
        summaries.push(summary);
    }
    let text: String = summaries.iter().map(|s| format!("{s}\n")).collect();
    let path = out.join(format!("{name}-summary.txt"));
    fs::write(&path, &text).map_err(io_err(&path))?;
    Ok(summaries)
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match execute(&args) {
            Ok(summaries) => {
                let mut failed = false;
                for s in &summaries {
                    println!("{s}");
                    for v in s.violations() {
                        println!("  violation: {v}");
                        failed = true;
                    }
                }
                if failed {
                    ExitCode::from(1)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
