//! Command line front end: build stage tables, schedules, certificates and
//! partitions, and export them as JSON or CSV.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dyadic::DyadicMass;
use crate::mass::{max_cell_mass, MassError};
use crate::ring::{run_stream, RingError, Stage};
use crate::schedule::{build_schedule, ScheduleError};
use crate::space::{BasisHandle, CantorSpace, Space, SpaceError};
use crate::verify::{build_partition, run_suite, VerifyError};
use crate::FastLine;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Adapter {
    RationalLine,
    Cantor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "premeasure", version, about = "Finite-stage premeasure construction with exact dyadic masses")]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Adapter::RationalLine, global = true)]
    pub adapter: Adapter,
    /// Injected basis prefix, one region literal per line.
    #[arg(long, global = true)]
    pub basis_file: Option<PathBuf>,
    /// Number of complete diagonals of schedule blocks.
    #[arg(long, default_value_t = 3, global = true)]
    pub depth: usize,
    /// Number of stages for `build`; defaults to the injected prefix length,
    /// or 10.
    #[arg(long, global = true)]
    pub stages: Option<usize>,
    #[arg(long, default_value_t = 1_000_000, global = true)]
    pub scan_cap: u64,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Random samples per stage for the additivity check.
    #[arg(long, default_value_t = 200, global = true)]
    pub samples: usize,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Insert basis sets in enumeration order and print every stage.
    Build,
    /// Build the block schedule and print its table.
    Schedule,
    /// Run every verifier suite on the schedule.
    Verify,
    /// Emit a partition whose pieces all have mass at most EPSILON.
    Partition {
        /// A dyadic such as `1/8` or `1/2^3`.
        epsilon: String,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Violation(serde_json::Value),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<SpaceError> for Failure {
    fn from(e: SpaceError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RingError> for Failure {
    fn from(e: RingError) -> Self {
        match e {
            RingError::InvariantViolation(_) => Failure::Violation(json!({ "violation": e.to_string() })),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<ScheduleError> for Failure {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::Ring(r) => r.into(),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<MassError> for Failure {
    fn from(e: MassError) -> Self {
        match e {
            MassError::Ring(r) => r.into(),
            MassError::ConsistencyViolation { .. } => Failure::Violation(json!({ "violation": e.to_string() })),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        let message = e.to_string();
        let detail = match &e {
            VerifyError::ChainViolation { i, j, detail } => {
                json!({ "kind": "chain", "i": i, "j": j, "detail": detail })
            }
            VerifyError::DecayViolation { m, stage, max } => {
                json!({ "kind": "decay", "m": m, "stage": stage, "max": max })
            }
            VerifyError::AdditivityViolation { seed, stage, sample, detail } => {
                json!({ "kind": "additivity", "seed": seed, "stage": stage, "sample": sample, "detail": detail })
            }
            VerifyError::MembershipViolation { region, original, permuted } => {
                json!({ "kind": "membership", "region": region, "original": original, "permuted": permuted })
            }
            VerifyError::PositivityViolation { position } => json!({ "kind": "positivity", "position": position }),
            VerifyError::BudgetViolation { stage, total, tail } => {
                json!({ "kind": "budget", "stage": stage, "total": total, "tail": tail })
            }
            VerifyError::Mass(m) => return m.clone().into(),
            VerifyError::Ring(r) => return r.clone().into(),
            VerifyError::Schedule(s) => return s.clone().into(),
            VerifyError::InsufficientDepth { .. } | VerifyError::Precondition(_) => return Failure::Config(message),
        };
        Failure::Violation(json!({ "violation": message, "counterexample": detail }))
    }
}

/// Parses `argv` and runs it, returning the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match execute(&args) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Violation(report)) => {
            let text = serde_json::to_string_pretty(&report).expect("json value serializes");
            eprintln!("verification failed: {}", report["violation"]);
            if let Err(e) = emit(&args, &text) {
                eprintln!("error: {e}");
            }
            EXIT_VIOLATION
        }
    }
}

fn execute(args: &Args) -> Result<(), Failure> {
    if args.depth == 0 {
        return Err(Failure::Config("--depth must be at least 1".into()));
    }
    let prefix = match &args.basis_file {
        Some(path) => read_basis_file(path)?,
        None => Vec::new(),
    };
    match args.adapter {
        Adapter::RationalLine => {
            let space = FastLine::canonical();
            let regions = prefix.iter().map(|s| space.parse_region(s)).collect::<Result<Vec<_>, _>>()?;
            let space = if regions.is_empty() { space } else { FastLine::with_prefix(regions)? };
            dispatch(args, &space, prefix.len())
        }
        Adapter::Cantor => {
            let space = CantorSpace::canonical();
            let regions = prefix.iter().map(|s| space.parse_region(s)).collect::<Result<Vec<_>, _>>()?;
            let space = if regions.is_empty() { space } else { CantorSpace::with_prefix(regions)? };
            dispatch(args, &space, prefix.len())
        }
    }
}

fn read_basis_file(path: &PathBuf) -> Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

fn dispatch<X: Space>(args: &Args, space: &X, injected: usize) -> Result<(), Failure> {
    match &args.command {
        Command::Build => {
            let n = args.stages.unwrap_or(if injected > 0 { injected } else { 10 });
            if n == 0 {
                return Err(Failure::Config("--stages must be at least 1".into()));
            }
            let handles: Vec<BasisHandle<X::Region>> = (1..=n as u64).map(|k| space.enumerate(k)).collect();
            let stages = run_stream(space, &handles)?;
            let tables: Vec<StageTable> = stages.iter().map(stage_table).collect();
            match args.format {
                Format::Json => emit(args, &to_json(&tables)),
                Format::Csv => emit(args, &stage_csv(&tables)?),
            }
        }
        Command::Schedule => {
            let (schedule, trace) = build_schedule(space, args.depth, args.scan_cap)?;
            let mut rows = Vec::new();
            for b in &schedule.blocks {
                let stage = trace.stage(b.g as usize)?;
                rows.push(BlockRow {
                    i: b.i,
                    j: b.j,
                    f: b.holes.clone(),
                    g_indices: b.covers.clone(),
                    h: b.remainder.clone(),
                    g: b.g,
                    cells: stage.cells().len(),
                    total: stage.total_mass().clone(),
                    max_cell_mass: max_cell_mass(&stage)?,
                });
            }
            match args.format {
                Format::Json => emit(args, &to_json(&rows)),
                Format::Csv => emit(args, &block_csv(&rows)?),
            }
        }
        Command::Verify => {
            let (schedule, trace) = build_schedule(space, args.depth, args.scan_cap)?;
            let report = run_suite(&schedule, &trace, args.samples, args.seed)?;
            emit(args, &to_json(&report))
        }
        Command::Partition { epsilon } => {
            let eps: DyadicMass = epsilon.parse().map_err(|e| Failure::Config(format!("epsilon `{epsilon}`: {e}")))?;
            let (schedule, trace) = build_schedule(space, args.depth, args.scan_cap)?;
            let cert = build_partition(&schedule, &trace, &eps)?;
            match args.format {
                Format::Json => emit(args, &to_json(&cert)),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["piece", "region", "mantissa", "scale"]).map_err(csv_err)?;
                    for c in &cert.cells {
                        write_mass_row(&mut w, "cell", &c.region, &c.mass)?;
                    }
                    write_mass_row(&mut w, "tail", &cert.tail.region, &cert.tail_bound)?;
                    write_mass_row(&mut w, "boundary", &cert.boundary.points.join(" "), &cert.boundary.kappa)?;
                    emit(args, &csv_text(w)?)
                }
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct CellRow {
    signature: String,
    region: String,
    mass: DyadicMass,
}

#[derive(Debug, Serialize)]
struct StageTable {
    stage: usize,
    cells: Vec<CellRow>,
    total: DyadicMass,
}

fn stage_table<X: Space>(stage: &Stage<X>) -> StageTable {
    let mut cells: Vec<_> = stage.cells().iter().collect();
    cells.sort_by(|a, b| a.region.cmp(&b.region));
    StageTable {
        stage: stage.index(),
        cells: cells
            .into_iter()
            .map(|c| CellRow {
                signature: stage.signature(c).to_string(),
                region: stage.space().format_region(&c.region),
                mass: c.mass.clone(),
            })
            .collect(),
        total: stage.total_mass().clone(),
    }
}

#[derive(Debug, Serialize)]
struct BlockRow {
    i: u64,
    j: u64,
    #[serde(rename = "F")]
    f: Vec<u64>,
    #[serde(rename = "G")]
    g_indices: Vec<u64>,
    #[serde(rename = "H")]
    h: Vec<u64>,
    g: u64,
    cells: usize,
    total: DyadicMass,
    max_cell_mass: DyadicMass,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("tables serialize");
    s.push('\n');
    s
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Io(io::Error::other(e))
}

fn csv_text(w: csv::Writer<Vec<u8>>) -> Result<String, Failure> {
    let bytes = w.into_inner().map_err(|e| Failure::Io(io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_mass_row(w: &mut csv::Writer<Vec<u8>>, kind: &str, region: &str, m: &DyadicMass) -> Result<(), Failure> {
    w.write_record([kind, region, &m.mantissa().to_string(), &m.scale().to_string()]).map_err(csv_err)
}

fn stage_csv(tables: &[StageTable]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stage", "signature", "region", "mantissa", "scale"]).map_err(csv_err)?;
    for t in tables {
        for c in &t.cells {
            w.write_record([
                t.stage.to_string(),
                c.signature.clone(),
                c.region.clone(),
                c.mass.mantissa().to_string(),
                c.mass.scale().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    csv_text(w)
}

fn block_csv(rows: &[BlockRow]) -> Result<String, Failure> {
    let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["i", "j", "F", "G", "H", "g", "cells"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.i.to_string(),
            r.j.to_string(),
            join(&r.f),
            join(&r.g_indices),
            join(&r.h),
            r.g.to_string(),
            r.cells.to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv_text(w)
}

fn emit(args: &Args, text: &str) -> Result<(), Failure> {
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
