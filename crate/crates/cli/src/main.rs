//! `ordent`: runs entropy experiments and verification suites and writes
//! deterministic JSON and CSV reports.
//!
//! Exit codes: 0 pass, 1 usage or input error, 2 assertion failure,
//! 3 resource budget exceeded.

mod args;
mod config;
mod entropy;
mod report;
mod tower;
mod verify;

#[cfg(test)]
mod tests;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ordent::{Builtin, PiecewiseMonotoneMap};
use serde::Serialize;

use args::{Cli, Command, EntropyCommand, ListMapsArgs, ReportCommand, TowerCommand, VerifyCommand};
use config::{gauss_default_n_max, CliError};
use report::{emit, Report, Status};

#[derive(Serialize)]
struct MapRow {
    name: &'static str,
    description: &'static str,
    measure: &'static str,
    branches: usize,
    piecewise_linear: bool,
}

fn list_maps(args: &ListMapsArgs) -> Result<u8, CliError> {
    let rows = Builtin::NAMES
        .iter()
        .map(|&name| {
            let b = Builtin::from_name(name, Some(gauss_default_n_max()))?;
            let map = PiecewiseMonotoneMap::builtin(b)?;
            Ok(MapRow {
                name: b.name(),
                description: b.description(),
                measure: b.invariant_measure().name(),
                branches: map.alphabet_size(),
                piecewise_linear: map.is_piecewise_linear(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = Report::new("list-maps", serde_json::Map::new(), Status::Ok, &rows);
    emit(&args.output, &report, Some(&rows))
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {t} threads: {e}")))?;
    }
    match &cli.command {
        Command::ListMaps(a) => list_maps(a),
        Command::Entropy(EntropyCommand::Pe(a)) => entropy::cmd_pe(a),
        Command::Entropy(EntropyCommand::Ks(a)) => entropy::cmd_ks(a),
        Command::Verify(VerifyCommand::LemmaSn(a)) => verify::cmd_lemma(a),
        Command::Verify(VerifyCommand::Bounds(a)) => verify::cmd_bounds(a),
        Command::Verify(VerifyCommand::Tower(a)) => tower::cmd_verify_tower(a),
        Command::Tower(TowerCommand::Build(a)) => tower::cmd_build(a),
        Command::Tower(TowerCommand::Verify(a)) => tower::cmd_reverify(a),
        Command::Report(ReportCommand::Merge(a)) => entropy::cmd_merge(a),
    }
}

/// Help and version requests succeed; every other parse error is a usage error.
fn parse_error_code(e: &clap::Error) -> u8 {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(parse_error_code(&e));
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
