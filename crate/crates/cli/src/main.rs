use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use slicesim::ids::SliceId;
use slicesim::scenario::{self, emit_report, explain, parse_validate, RunReport, ScenarioDocument};

const OK: u8 = 0;
const INVALID: u8 = 1;
const VIOLATIONS: u8 = 2;
const USAGE: u8 = 64;

/// Network slicing orchestration simulator.
#[derive(Parser)]
#[command(name = "slicesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every problem found.
    Validate { scenario: PathBuf },
    /// Run a scenario and write its report.
    Run {
        scenario: PathBuf,
        /// Overrides the seed stored in the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 when any isolation violation is found.
        #[arg(long)]
        strict: bool,
    },
    /// List the slice blueprints of a scenario.
    Catalog { scenario: PathBuf },
    /// Print one slice's lifecycle transcript and KPI series from a report.
    Explain {
        report: PathBuf,
        #[arg(long)]
        slice: String,
    },
    /// Print a bundled scenario as JSON.
    Builtin { name: String },
}

enum Failure {
    Usage(anyhow::Error),
    Invalid(Vec<String>),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    Ok(fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?)
}

fn load(path: &Path) -> Result<ScenarioDocument, Failure> {
    parse_validate(&read(path)?).map_err(Failure::Invalid)
}

fn execute(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Validate { scenario } => {
            let doc = load(&scenario)?;
            println!("{}: valid ({} slices, horizon {})", doc.name, doc.slices.len(), doc.horizon);
            Ok(OK)
        }
        Command::Run { scenario, seed, out, strict } => {
            let doc = load(&scenario)?;
            let seed = seed.unwrap_or(doc.seed);
            let outcome = doc.run(seed).map_err(|e| Failure::Invalid(vec![e.to_string()]))?;
            let report = emit_report(&doc, &outcome);
            let json = report.to_json();
            match &out {
                Some(p) => fs::write(p, json + "\n").with_context(|| format!("cannot write {}", p.display()))?,
                None => println!("{json}"),
            }
            let clean = report.violations.is_empty();
            eprintln!(
                "{} seed {}: trace {} ({} entries), {} performance violations, {} containment violations",
                report.scenario,
                report.seed,
                report.trace_digest,
                report.trace_entries,
                report.violations.performance.len(),
                report.violations.containment.iter().map(|c| c.violations.len()).sum::<usize>()
            );
            Ok(if strict && !clean { VIOLATIONS } else { OK })
        }
        Command::Catalog { scenario } => {
            let doc = load(&scenario)?;
            for bp in &doc.blueprints {
                let descriptors: Vec<&str> = bp.descriptors.iter().map(|d| d.as_str()).collect();
                println!(
                    "{}\tdescriptors={}\tfloor={}\tceiling={}\tbandwidth={}\tweight={}",
                    bp.id,
                    descriptors.join(","),
                    bp.sla.throughput_floor,
                    bp.sla.latency_ceiling,
                    bp.bandwidth,
                    bp.weight
                );
            }
            Ok(OK)
        }
        Command::Explain { report, slice } => {
            let text = read(&report)?;
            let report: RunReport = serde_json::from_str(&text).with_context(|| format!("{} is not a run report", report.display()))?;
            let view = explain(&report, &SliceId::new(slice.clone())).ok_or_else(|| anyhow::anyhow!("report has no slice {slice}"))?;
            print!("{view}");
            Ok(OK)
        }
        Command::Builtin { name } => {
            let doc = scenario::builtin(&name)
                .ok_or_else(|| anyhow::anyhow!("no bundled scenario {name}; known: {}", scenario::BUILTINS.join(", ")))?;
            println!("{}", doc.to_json());
            Ok(OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
        Err(Failure::Invalid(errors)) => {
            for e in errors {
                eprintln!("error: {e}");
            }
            ExitCode::from(INVALID)
        }
    }
}
