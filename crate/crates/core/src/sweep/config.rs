//! Flat `key = value` configuration files.
//!
//! ```text
//! # reference device, two temperatures
//! preset = fig1a          # optional starting point
//! g1 = 200
//! temperatures = 0, 0.08
//! drive_min = 1e8
//! drive_max = 3.8e9
//! drive_points = 40
//! formats = csv, json
//! tol.gradient_fd = 1e-6
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use super::{figure_preset, log_space, SweepConfig, Tolerances};
use crate::model::{ModelVariant, PhysicalParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}': {message}")]
    Value { key: String, message: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored
/// and a repeated key is an error.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: n + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                message: "empty key".into(),
            });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                message: format!("duplicate key '{k}'"),
            });
        }
    }
    Ok(out)
}

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

fn number(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| value_err(key, format!("'{v}' is not a number")))
}

fn list<T>(
    key: &str,
    v: &str,
    f: impl Fn(&str) -> Result<T, ConfigError>,
) -> Result<Vec<T>, ConfigError> {
    let items: Vec<&str> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(value_err(key, "empty list"));
    }
    items.into_iter().map(f).collect()
}

fn apply_tolerance(tol: &mut Tolerances, key: &str, v: &str) -> Result<(), ConfigError> {
    let slot = tol
        .get_mut(key)
        .ok_or_else(|| ConfigError::UnknownKey(format!("tol.{key}")))?;
    let x = number(key, v)?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(value_err(key, "tolerance must be finite and >= 0"));
    }
    *slot = x;
    Ok(())
}

/// Tolerance overrides: `tol.<name> = value` or bare `<name> = value`.
pub fn parse_tolerances(text: &str) -> Result<Tolerances, ConfigError> {
    let mut tol = Tolerances::default();
    for (k, v) in parse_key_values(text)? {
        apply_tolerance(&mut tol, k.strip_prefix("tol.").unwrap_or(&k), &v)?;
    }
    Ok(tol)
}

/// Builds a [`SweepConfig`] from a configuration file. Keys not given keep
/// the value of `preset` (if any) or the reference defaults.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let kv = parse_key_values(text)?;
    let mut cfg = match kv.get("preset") {
        Some(name) => {
            figure_preset(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?
        }
        None => SweepConfig::new("sweep", PhysicalParams::reference()),
    };
    let mut drive_min = cfg
        .drive_grid
        .first()
        .copied()
        .unwrap_or(super::DEFAULT_DRIVE_MIN);
    let mut drive_max = cfg
        .drive_grid
        .last()
        .copied()
        .unwrap_or(super::DEFAULT_DRIVE_MAX);
    let mut drive_points = cfg.drive_grid.len();
    let mut regrid = false;
    let mut explicit_grid = None;
    let mut out_dir_given = false;

    for (k, v) in &kv {
        let k = k.as_str();
        let p = &mut cfg.base;
        match k {
            "preset" => {}
            "name" => cfg.name = v.clone(),
            "omega_m" => p.omega_m = number(k, v)?,
            "mass" => p.mass = number(k, v)?,
            "gamma_m" => p.gamma_m = number(k, v)?,
            "delta_0" => p.delta_0 = number(k, v)?,
            "kappa" => p.kappa = number(k, v)?,
            "g1" => p.g1 = number(k, v)?,
            "g2" => p.g2 = number(k, v)?,
            "drive_min" => {
                drive_min = number(k, v)?;
                regrid = true;
            }
            "drive_max" => {
                drive_max = number(k, v)?;
                regrid = true;
            }
            "drive_points" => {
                drive_points = v
                    .parse::<usize>()
                    .map_err(|_| value_err(k, format!("'{v}' is not a positive integer")))?;
                regrid = true;
            }
            "drive_grid" => explicit_grid = Some(list(k, v, |s| number(k, s))?),
            "temperatures" => cfg.temperatures = list(k, v, |s| number(k, s))?,
            "variants" => {
                cfg.variants = list(k, v, |s| {
                    s.parse::<ModelVariant>().map_err(|e| value_err(k, e))
                })?;
            }
            "runs" => {
                cfg.runs = v
                    .parse::<u32>()
                    .map_err(|_| value_err(k, format!("'{v}' is not a positive integer")))?;
            }
            "out_dir" => {
                cfg.out_dir = PathBuf::from(v);
                out_dir_given = true;
            }
            "formats" => {
                cfg.formats = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|e: String| value_err(k, e)))
                    .collect::<Result<_, _>>()?;
            }
            _ => match k.strip_prefix("tol.") {
                Some(t) => apply_tolerance(&mut cfg.tolerances, t, v)?,
                None => return Err(ConfigError::UnknownKey(k.to_string())),
            },
        }
    }
    if explicit_grid.is_some() && regrid {
        return Err(ConfigError::Invalid(
            "give either drive_grid or drive_min/drive_max/drive_points, not both".into(),
        ));
    }
    if let Some(g) = explicit_grid {
        cfg.drive_grid = g;
    } else if regrid {
        if !(drive_min > 0.0 && drive_max >= drive_min) {
            return Err(ConfigError::Invalid(format!(
                "need 0 < drive_min <= drive_max, got {drive_min} and {drive_max}"
            )));
        }
        cfg.drive_grid = log_space(drive_min, drive_max, drive_points);
    }
    if !out_dir_given && kv.contains_key("name") {
        cfg.out_dir = PathBuf::from("out").join(&cfg.name);
    }
    cfg.validate()?;
    Ok(cfg)
}
