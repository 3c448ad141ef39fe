//! Config files: one TOML document whose keys are the subcommand's long flag
//! names. Explicit flags beat the file, the file beats `DORA_SEED` and
//! built-in defaults.

use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Flags that belong to the invocation rather than to the run.
const GLOBAL_IDS: [&str; 6] = ["config", "jobs", "reproducible", "print_config", "help", "version"];

fn key_of(id: &str) -> String {
    id.replace('_', "-")
}

pub fn read_table(path: &Path) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::user(format!("invalid config {}: {e}", path.display())))
}

/// Merges `file` under the values parsed from the command line.
pub fn resolve<T>(parsed: &T, cmd: &Command, matches: &ArgMatches, file: Option<&toml::Table>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned,
{
    let mut merged =
        toml::Table::try_from(parsed).map_err(|e| CliError::internal(format!("cannot serialize arguments: {e}")))?;
    let Some(file) = file else {
        return parsed_roundtrip(merged);
    };
    let known: Vec<String> = cmd
        .get_arguments()
        .map(|a| a.get_id().as_str())
        .filter(|id| !GLOBAL_IDS.contains(id))
        .map(key_of)
        .collect();
    for (key, value) in file {
        if !known.contains(key) {
            return Err(CliError::user(format!(
                "unknown config key '{key}' for `{}` (expected one of: {})",
                cmd.get_name(),
                known.join(", ")
            )));
        }
        let id = key.replace('-', "_");
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        merged.insert(key.clone(), value.clone());
    }
    parsed_roundtrip(merged)
}

fn parsed_roundtrip<T: DeserializeOwned>(table: toml::Table) -> CliResult<T> {
    table.try_into().map_err(|e| CliError::user(format!("invalid config value: {e}")))
}

pub fn to_toml<T: Serialize>(value: &T) -> CliResult<String> {
    toml::to_string(value).map_err(|e| CliError::internal(format!("cannot serialize config: {e}")))
}
