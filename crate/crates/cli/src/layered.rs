use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

/// Loads the config file as a table of per-subcommand tables.
pub fn load_file(path: Option<&Path>) -> Result<toml::Table, CliError> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

/// Overlays the flags that were given on top of `[section]` from the file.
pub fn resolve<T>(flags: &T, file: &toml::Table, section: &str) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned,
{
    let mut merged = match file.get(section) {
        None => serde_json::Map::new(),
        Some(toml::Value::Table(t)) => match serde_json::to_value(t) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => return Err(CliError::Usage(format!("config section [{section}] is not a table"))),
        },
        Some(_) => return Err(CliError::Usage(format!("config entry {section} must be a table"))),
    };
    let given = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))?;
    if let serde_json::Value::Object(given) = given {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(serde_json::Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("config section [{section}]: {e}")))
}
