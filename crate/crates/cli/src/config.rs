//! Key-value configuration files.
//!
//! The file is TOML. Every `SystemParams` and `SolverConfig` field, and the
//! experiment-level keys (`seed`, `draws`, `starts`, `timing_repeats`,
//! `gamma_list`, `f_edge_max_list`), are top-level keys; the SCA baseline
//! and grid oracle are configured in `[sca]` and `[grid]` tables.
//!
//! ```toml
//! gamma = 0.03
//! compress_ratio = 0.2
//! beta = 10
//! step_metric = "euclidean"
//! gamma_list = [1e-4, 1e-2, 1]
//!
//! [grid]
//! refinement_rounds = 1
//! ```

use relay_mec::experiment::ExperimentConfig;
use std::path::Path;
use toml::{Table, Value};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

const TOP_LEVEL: [&str; 6] = ["seed", "draws", "starts", "timing_repeats", "gamma_list", "f_edge_max_list"];
const TABLES: [&str; 2] = ["sca", "grid"];
/// Sections of `ExperimentConfig` whose fields appear as top-level keys.
const FLATTENED: [&str; 2] = ["base", "solver"];

fn table_of(v: &Value) -> &Table {
    v.as_table().expect("struct serializes to a table")
}

/// Parses `text` over the defaults.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let file: Table = text.parse().map_err(|e| ConfigError(format!("config is not valid TOML: {e}")))?;
    let defaults = Value::try_from(ExperimentConfig::default()).expect("defaults serialize");
    let mut merged = table_of(&defaults).clone();

    for (key, value) in file {
        if TOP_LEVEL.contains(&key.as_str()) {
            merged.insert(key, value);
        } else if TABLES.contains(&key.as_str()) {
            let Value::Table(entries) = value else {
                return Err(ConfigError(format!("`{key}` must be a table")));
            };
            let section = merged.entry(key.clone()).or_insert_with(|| Value::Table(Table::new()));
            let section = section.as_table_mut().expect("section is a table");
            for (k, v) in entries {
                // `fixed_alpha` is optional and absent from the defaults.
                if !section.contains_key(&k) && !(key == "grid" && k == "fixed_alpha") {
                    return Err(ConfigError(format!("unknown key `{key}.{k}`")));
                }
                section.insert(k, v);
            }
        } else {
            let owner = FLATTENED.iter().find(|s| table_of(&defaults[**s]).contains_key(&key));
            let Some(owner) = owner else {
                return Err(ConfigError(format!("unknown key `{key}`")));
            };
            let section = merged[*owner].as_table_mut().expect("section is a table");
            section.insert(key, value);
        }
    }
    Value::Table(merged).try_into().map_err(|e| ConfigError(format!("bad config value: {e}")))
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}
