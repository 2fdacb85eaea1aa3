use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lsl_workbench::scenario::{self, Figure, Overrides, ReportFormat, Scenario, Status};
use lsl_workbench::Error;

/// Drive, explore and check concurrent search structure implementations.
#[derive(Parser, Debug)]
#[command(name = "lslw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for free runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Most leaves explored per implementation.
    #[arg(long, global = true, env = "LSLW_BUDGET")]
    budget: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario: drive its schedule, explore, or free-run.
    Run { file: PathBuf },
    /// Re-run a canned construction and check its expected verdicts.
    Reproduce { figure: String },
    /// Enumerate every schedule of a scenario's workload.
    Explore { file: PathBuf },
}

const EXIT_INPUT: u8 = 1;
const EXIT_REJECTED: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("lslw: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path)?;
    Scenario::parse(&text)
}

fn emit(cli: &Cli, scenario_out: Option<&Path>, body: &str) -> Result<(), Error> {
    match cli.out.as_deref().or(scenario_out) {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    let overrides = Overrides { seed: cli.seed, budget: cli.budget };
    match &cli.command {
        Command::Run { file } | Command::Explore { file } => {
            let s = load(file)?;
            let report = match cli.command {
                Command::Explore { .. } => scenario::explore(&s, overrides)?,
                _ => scenario::run(&s, overrides)?,
            };
            let format = if cli.json { ReportFormat::Json } else { s.report.unwrap_or(ReportFormat::Text) };
            emit(cli, s.out.as_deref(), &report.render(format))?;
            Ok(match report.status {
                Status::Done => 0,
                Status::Rejected => EXIT_REJECTED,
                Status::Partial => EXIT_PARTIAL,
            })
        }
        Command::Reproduce { figure } => {
            let r = scenario::reproduce(Figure::by_name(figure)?)?;
            let body = if cli.json {
                serde_json::to_string_pretty(&r.json).expect("report json") + "\n"
            } else {
                r.text.iter().map(|l| format!("{l}\n")).collect()
            };
            emit(cli, None, &body)?;
            Ok(if r.holds { 0 } else { EXIT_MISMATCH })
        }
    }
}
