//! Layered settings: command-line flags over a TOML file over defaults.
//!
//! Every subcommand has a settings struct with serde defaults. The defaults
//! are serialized to a JSON tree, the file's `[subcommand]` table is merged
//! on top, then every flag that was given. Flags left unset serialize as
//! `null` and are dropped before merging.

use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::UsageError;

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| (k, strip_nulls(v)))
                .collect(),
        ),
        other => other,
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Loads the `[section]` table of a TOML file as a JSON tree.
pub fn file_section(path: Option<&Path>, section: &str) -> anyhow::Result<Value> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => anyhow::Error::new(athena_core::Error::NotFound(path.to_path_buf())),
        _ => anyhow::Error::new(e).context(format!("reading {}", path.display())),
    })?;
    let doc: toml::Table =
        toml::from_str(&text).map_err(|e| UsageError(format!("config file {}: {e}", path.display())))?;
    let table = doc
        .get(section)
        .cloned()
        .unwrap_or(toml::Value::Table(Default::default()));
    serde_json::to_value(table).context("converting config file")
}

/// Resolves `defaults < file < flags` into `T`.
pub fn resolve<T, F>(defaults: &T, file: Value, flags: &F) -> anyhow::Result<T>
where
    T: Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut tree = serde_json::to_value(defaults)?;
    merge(&mut tree, strip_nulls(file));
    merge(&mut tree, strip_nulls(serde_json::to_value(flags)?));
    serde_json::from_value(strip_nulls(tree)).map_err(|e| UsageError(format!("invalid settings: {e}")).into())
}

/// Writes the resolved settings as TOML.
pub fn persist<T: Serialize>(settings: &T, section: &str, path: &Path) -> anyhow::Result<()> {
    let mut doc = toml::Table::new();
    doc.insert(section.to_string(), toml::Value::try_from(settings)?);
    std::fs::write(path, toml::to_string_pretty(&doc)?).with_context(|| format!("writing {}", path.display()))
}
