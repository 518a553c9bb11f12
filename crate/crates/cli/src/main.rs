//! `grafcet-lint`: structural analyzer for GRAFCET specifications.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use grafcet_core::finding::Severity;
use grafcet_core::ingest::{parse_queries, parse_spec};
use grafcet_core::oracle::OracleConfig;
use grafcet_core::pipeline::{self, Options, ReportOptions};

#[derive(Parser)]
#[command(name = "grafcet-lint", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a `.grafcet.json` specification.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FailOn {
    Warning,
    Error,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    path: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Include incidence matrices and invariant vectors.
    #[arg(long)]
    dump_invariants: bool,
    /// Extra safety queries (`{"queries": [...]}`).
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,
    /// Judge never-coactive queries from value sets only.
    #[arg(long)]
    naive: bool,
    /// Lowest severity that makes the exit code non-zero.
    #[arg(long, value_enum, default_value = "warning")]
    fail_on: FailOn,
    /// Cross-check the analysis against explicit-state exploration.
    #[arg(long)]
    oracle: bool,
    /// Omit phase timings so reports are reproducible.
    #[arg(long)]
    no_timings: bool,
    /// Worker threads (default: logical cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn analyze(args: &AnalyzeArgs) -> Result<bool, String> {
    let spec = parse_spec(&read(&args.path)?).map_err(|e| format!("{}: {e}", args.path.display()))?;
    let extra_queries = match &args.queries {
        Some(q) => parse_queries(&read(q)?).map_err(|e| format!("{}: {e}", q.display()))?,
        None => Vec::new(),
    };
    let options = Options {
        naive: args.naive,
        jobs: args.jobs,
        extra_queries,
        ..Options::default()
    };
    let analysis = pipeline::analyze(&spec, &options);
    let oracle = args.oracle.then(|| pipeline::oracle_check(&analysis, &OracleConfig::default()));
    let ropts = ReportOptions {
        dump_invariants: args.dump_invariants,
        timings: !args.no_timings,
    };
    match args.format {
        Format::Json => {
            let report = pipeline::report_json(&analysis, ropts, oracle.as_ref());
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Format::Text => print!("{}", pipeline::report_text(&analysis, ropts, oracle.as_ref())),
    }
    let threshold = match args.fail_on {
        FailOn::Warning => Severity::Warning,
        FailOn::Error => Severity::Error,
    };
    let failed = analysis.max_severity().is_some_and(|s| s >= threshold)
        || oracle.is_some_and(|o| !o.discrepancies.is_empty());
    Ok(failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Analyze(args) => match analyze(&args) {
            Ok(false) => ExitCode::SUCCESS,
            Ok(true) => ExitCode::from(1),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
        },
    }
}
