//! Loading a scenario from TOML plus command-line overrides.

use std::fmt;
use std::path::Path;

use megtomo::bench::ScenarioConfig;
use toml::{Table, Value};

use crate::presets;

/// A problem with the configuration or the command line (exit code 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

pub enum Source<'a> {
    File(&'a Path),
    Preset(&'a str),
}

/// Reads the TOML text behind a source and a name for messages.
fn read_source(source: &Source) -> Result<(String, String), ConfigError> {
    match source {
        Source::File(path) => std::fs::read_to_string(path)
            .map(|text| (text, path.display().to_string()))
            .map_err(|e| err(format!("cannot read config {}: {e}", path.display()))),
        Source::Preset(name) => presets::find(name)
            .map(|text| (text.to_string(), format!("preset {name}")))
            .ok_or_else(|| {
                let known: Vec<_> = presets::names().collect();
                err(format!("unknown preset '{name}' (known: {})", known.join(", ")))
            }),
    }
}

/// Parses the right-hand side of `--set key=value`. Anything that is not a
/// TOML literal is taken as a bare string.
fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` to a table, creating intermediate tables.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| err(format!("--set expects key=value, got '{assignment}'")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(err(format!("--set has an empty key segment in '{key}'")));
    }
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut node = table;
    for (depth, segment) in parents.iter().enumerate() {
        let entry = node
            .entry(segment.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            err(format!("--set {key}: '{}' is not a table", path[..=depth].join(".")))
        })?;
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Loads, overrides and validates a scenario.
pub fn load(source: &Source, overrides: &[String], seed: Option<u64>) -> Result<ScenarioConfig, ConfigError> {
    let (text, origin) = read_source(source)?;
    let cfg: ScenarioConfig = if overrides.is_empty() && seed.is_none() {
        toml::from_str(&text).map_err(|e| err(format!("{origin}: {e}")))?
    } else {
        let mut table: Table = text.parse().map_err(|e| err(format!("{origin}: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(s) = seed {
            let s = i64::try_from(s).map_err(|_| err(format!("--seed {s} exceeds the TOML integer range")))?;
            table.insert("master_seed".into(), Value::Integer(s));
        }
        Value::Table(table)
            .try_into()
            .map_err(|e| err(format!("{origin} with overrides: {e}")))?
    };
    cfg.validate().map_err(|e| err(format!("{origin}: {e}")))?;
    Ok(cfg)
}

/// Parses `--levels 0,1000,2500`.
pub fn parse_levels(raw: &str) -> Result<Vec<f64>, ConfigError> {
    let levels: Vec<f64> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| err(format!("invalid noise level '{s}'"))))
        .collect::<Result<_, _>>()?;
    if levels.is_empty() {
        return Err(err("--levels needs at least one value"));
    }
    if let Some(bad) = levels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(err(format!("noise level {bad} must be a finite non-negative number")));
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use megtomo::measurement::Scheme;

    #[test]
    fn override_values() {
        let mut t = Table::new();
        apply_override(&mut t, "noise.signal_rate=1e6").unwrap();
        apply_override(&mut t, "scheme=generalized_pauli").unwrap();
        apply_override(&mut t, "t_tot = 20").unwrap();
        assert_eq!(t["noise"]["signal_rate"], Value::Float(1e6));
        assert_eq!(t["scheme"], Value::String("generalized_pauli".into()));
        assert_eq!(t["t_tot"], Value::Integer(20));
        assert!(apply_override(&mut t, "noise").is_err());
        assert!(apply_override(&mut t, "t_tot.x=1").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
    }

    #[test]
    fn preset_with_overrides() {
        let cfg = load(
            &Source::Preset("smoke"),
            &["scheme=pauli".into(), "noise.extra_background_rate=2000".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(cfg.scheme, Scheme::GeneralizedPauli);
        assert_eq!(cfg.noise.extra_background_rate, 2000.0);
        assert_eq!(cfg.master_seed, 9);
    }

    #[test]
    fn missing_dim_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "t_tot = 5\n").unwrap();
        let e = load(&Source::File(&path), &[], None).unwrap_err();
        assert!(e.0.contains("dim"), "{e}");
        let e = load(&Source::File(&path), &["n_states=2".into()], None).unwrap_err();
        assert!(e.0.contains("dim"), "{e}");
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let e = load(&Source::Preset("smoke"), &["n_states=0".into()], None).unwrap_err();
        assert!(e.0.contains("n_states"), "{e}");
        let e = load(&Source::Preset("smoke"), &["bogus=1".into()], None).unwrap_err();
        assert!(e.0.contains("bogus"), "{e}");
    }

    #[test]
    fn levels() {
        assert_eq!(parse_levels("0, 1000,2500").unwrap(), vec![0.0, 1000.0, 2500.0]);
        assert!(parse_levels("").is_err());
        assert!(parse_levels(" , ").is_err());
        assert!(parse_levels("1,-2").is_err());
        assert!(parse_levels("1,x").is_err());
    }
}
