use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use isac::cli::{self, parse_override, Command, ExperimentSpec, EXIT_CONFIG, EXIT_OK};

/// Detection and power-allocation experiments for a monostatic ISAC base
/// station. Writes one CSV table per run.
#[derive(Debug, Parser)]
#[command(name = "isac", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// CSV destination.
    #[arg(long)]
    output: PathBuf,
    /// Override a config value, e.g. `--set detector.trials=200000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return exit(code);
        }
    };
    let overrides = match args
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return exit(e.exit_code());
        }
    };
    let spec = ExperimentSpec {
        command: args.command,
        config_path: args.config,
        output_path: args.output,
        overrides,
        workers: args.workers,
    };
    match cli::run(&spec) {
        Ok(report) => {
            if report.failures > 0 {
                eprintln!(
                    "{} validation check(s) failed; see {}",
                    report.failures,
                    spec.output_path.display()
                );
            }
            exit(report.exit_code())
        }
        Err(e) => {
            eprintln!("{e}");
            exit(e.exit_code())
        }
    }
}
