use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::args::OutputArgs;
use crate::config::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// A measurement run that completed.
    Ok,
    /// Every assertion of a verification held.
    Pass,
    Fail,
    /// A cell or word budget stopped the run; results are partial.
    Budget,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok | Status::Pass => 0,
            Status::Fail => 2,
            Status::Budget => 3,
        }
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// Envelope shared by every command. Nothing here depends on the wall clock,
/// the output path or the thread count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report<C, R> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: C,
    pub status: Status,
    pub results: R,
}

impl<C, R> Report<C, R> {
    pub fn new(command: &str, config: C, status: Status, results: R) -> Self {
        Report {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            status,
            results,
        }
    }
}

/// Writes `PREFIX.json` (and `PREFIX.csv` when rows are given), or the JSON
/// alone to stdout, and returns the exit code for the report's status.
pub fn emit<C, R, Row>(out: &OutputArgs, report: &Report<C, R>, rows: Option<&[Row]>) -> Result<u8, CliError>
where
    C: Serialize,
    R: Serialize,
    Row: Serialize,
{
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    match &out.out {
        Some(prefix) => {
            write_file(&with_ext(prefix, "json"), json.as_bytes())?;
            if let Some(rows) = rows {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in rows {
                    w.serialize(r)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
                write_file(&with_ext(prefix, "csv"), &bytes)?;
            }
        }
        None => std::io::stdout().lock().write_all(json.as_bytes())?,
    }
    Ok(report.status.exit_code())
}

fn with_ext(prefix: &Path, ext: &str) -> std::path::PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    s.into()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed report {}: {e}", path.display())))
}
