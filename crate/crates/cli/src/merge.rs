//! Layering of command-line flags over a TOML config file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{CliError, CliResult};

/// Fills every flag left unset with the value from `config`, if any.
///
/// Config keys are the flag names with `-` replaced by `_`. Keys that match
/// no flag are rejected so typos do not pass silently.
pub fn with_config<T: Serialize + DeserializeOwned>(
    flags: T,
    config: Option<&Path>,
) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = read_text(path)?;
    let table: toml::Table = toml::from_str(&text)
        .map_err(|e| pexp::Error::Config(format!("{}: {e}", path.display())))?;
    let mut merged = serde_json::to_value(&flags).map_err(pexp::Error::from)?;
    let slots = merged
        .as_object_mut()
        .expect("argument structs serialize to objects");
    for (key, value) in table {
        let key = key.replace('-', "_");
        let Some(slot) = slots.get_mut(&key) else {
            return Err(
                pexp::Error::Config(format!("{}: unknown key '{key}'", path.display())).into(),
            );
        };
        if slot.is_null() {
            *slot = serde_json::to_value(value).map_err(pexp::Error::from)?;
        }
    }
    serde_json::from_value(merged)
        .map_err(|e| pexp::Error::Config(format!("{}: {e}", path.display())).into())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::Pexp(pexp::Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })
}
