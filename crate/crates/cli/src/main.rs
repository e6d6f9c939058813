//! `plm`: reconstruction, verification and form tables from the command line.
//!
//! Exit codes: 0 pass, 1 identity failure, 2 usage, 3 I/O, 4 degenerate input under `--strict`.

mod forms;
mod obj;
mod reconstruct;
mod source;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plm_core::PlmError;

use source::SourceArgs;

#[derive(Parser, Debug)]
#[command(name = "plm", version, about = "Projective Lelieuvre map: reconstruct, verify, tabulate forms")]
struct Cli {
    /// Turn degenerate points and wrong-chart inputs into a hard failure (exit 4).
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the identities of a suite and write a JSON report.
    Verify(verify::VerifyArgs),
    /// Reconstruct the surface from conormal data.
    Reconstruct(reconstruct::ReconstructArgs),
    /// Tabulate quadratic and cubic form coefficients.
    Forms(forms::FormsArgs),
    /// Write a scenario's fields as CSV files.
    ScenarioDump(DumpArgs),
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    source: SourceArgs,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Degenerate input rejected because of `--strict`.
    Strict(String),
    Plm(PlmError),
}

impl From<PlmError> for CliError {
    fn from(e: PlmError) -> Self {
        CliError::Plm(e)
    }
}

impl CliError {
    fn exit_code(&self, strict: bool) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Strict(_) => 4,
            CliError::Plm(e) => match e {
                PlmError::Io(_) | PlmError::Parse { .. } => 3,
                PlmError::Domain(_) | PlmError::UnknownScenario { .. } | PlmError::Boundary { .. } => 2,
                PlmError::Closure { .. } | PlmError::GaugeObstruction { .. } | PlmError::NotCompatible { .. } => 1,
                PlmError::Degenerate { .. }
                | PlmError::ChartMismatch { .. }
                | PlmError::PivotMismatch { .. }
                | PlmError::NotPlmConormal { .. }
                | PlmError::Overflow { .. } => {
                    if strict {
                        4
                    } else {
                        1
                    }
                }
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Strict(m) => write!(f, "degenerate input: {m}"),
            CliError::Plm(e) => write!(f, "{e}"),
        }
    }
}

/// Writes to stdout; a reader that closed the pipe early ends output quietly.
pub fn print_stdout(bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(PlmError::Io(e.to_string()).into()),
        _ => Ok(()),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PLM_NUM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("PLM_NUM_THREADS must be a positive integer, got '{raw}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn dump(args: &DumpArgs) -> Result<bool, CliError> {
    let Some(name) = &args.source.scenario else {
        return Err(CliError::Usage("scenario-dump needs --scenario".into()));
    };
    let sc = plm_core::scenarios::scenario(name, &args.source.scenario_params())?;
    let listing: String = sc.dump(&args.out)?.iter().map(|p| format!("{}\n", p.display())).collect();
    print_stdout(listing.as_bytes())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Verify(a) => verify::run(a),
        Command::Reconstruct(a) => reconstruct::run(a, cli.strict),
        Command::Forms(a) => forms::run(a),
        Command::ScenarioDump(a) => dump(a),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("plm: {e}");
            ExitCode::from(e.exit_code(cli.strict))
        }
    }
}
