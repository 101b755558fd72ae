use std::fs;
use std::io::{self, Read};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use curveq::app::{run, write_report, AppError, OutputFormat, RunConfig, Task};

/// Geometry, spectra and operator identities for a particle on a space curve.
#[derive(Parser, Debug)]
#[command(name = "curveq", version)]
struct Args {
    /// Workflow to run
    #[arg(value_enum)]
    task: Task,
    /// JSON run configuration, or `-` for stdin
    #[arg(long)]
    config: String,
    /// Output file (defaults to the config's output.path, then stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format (defaults to the config's output.format, then json)
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn read_config(source: &str) -> Result<String, AppError> {
    if source == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        fs::read_to_string(source).map_err(|e| AppError::Config(format!("cannot read {source}: {e}")))
    }
}

fn execute(args: &Args) -> Result<i32, AppError> {
    let text = read_config(&args.config)?;
    let started = Instant::now();
    let report = run(args.task, &text)?;
    let output = RunConfig::from_json(&text)?.output.unwrap_or_default();
    let format = args.format.or(output.format).unwrap_or_default();
    let path = args.output.clone().or(output.path.map(PathBuf::from));
    match path {
        Some(p) => write_report(&report, format, fs::File::create(p)?)?,
        None => write_report(&report, format, io::stdout().lock())?,
    }
    eprintln!(
        "curveq: {:?} {} in {:.3} s",
        args.task,
        if report.passed { "passed" } else { "FAILED" },
        started.elapsed().as_secs_f64()
    );
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("curveq: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
