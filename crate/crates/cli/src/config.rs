//! Run configuration: a TOML file layered over a preset, then dotted-key overrides.
//!
//! Angles are written in degrees at this surface. A key `name_deg` sets the
//! field `name` to the value converted to radians; plain keys are taken as
//! radians, which is how manifests store them.

use anyhow::{anyhow, bail, Context, Result};
use irsloc::harness::{preset, SweepSpec, TrialConfig, PRESET_NAMES};
use serde::{Deserialize, Serialize};
use std::path::Path;
use toml::{Table, Value};

/// Crate version written to every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const DEG_SUFFIX: &str = "_deg";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub config: TrialConfig,
    pub sweep: Option<SweepSpec>,
}

/// What a run writes next to its outputs; loading it back with `--config`
/// reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub preset: Option<String>,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
    pub config: TrialConfig,
}

/// Rewrites every `name_deg = x` into `name = x·π/180`, recursively.
pub fn convert_degrees(table: &mut Table) -> Result<()> {
    let keys: Vec<String> = table.keys().cloned().collect();
    for key in keys {
        if let Some(base) = key.strip_suffix(DEG_SUFFIX) {
            let v = table.remove(&key).unwrap();
            let deg = as_float(&v).with_context(|| format!("{key} must be a number"))?;
            if table.contains_key(base) {
                bail!("both {key} and {base} are set");
            }
            table.insert(base.to_string(), Value::Float(deg.to_radians()));
        } else if let Some(Value::Table(t)) = table.get_mut(&key) {
            convert_degrees(t)?;
        }
    }
    Ok(())
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Recursively overlays `top` on `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `a.b.c=value`; the value is read as a TOML value, or as a string
/// when it does not parse as one.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = s.split_once('=').ok_or_else(|| anyhow!("override {s:?} is not KEY=VALUE"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("override key {key:?} has an empty component");
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().unwrap();
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => bail!("override path {} crosses a non-table value at {p}", path.join(".")),
        };
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Unwraps a manifest into its configuration and sweep tables.
fn split_manifest(mut file: Table) -> (Table, Option<Value>, Option<String>) {
    if file.contains_key("version") && file.contains_key("command") {
        let cfg = match file.remove("config") {
            Some(Value::Table(t)) => t,
            _ => Table::new(),
        };
        let preset = match file.remove("preset") {
            Some(Value::String(s)) => Some(s),
            _ => None,
        };
        (cfg, file.remove("sweep"), preset)
    } else {
        let sweep = file.remove("sweep");
        (file, sweep, None)
    }
}

pub struct Sources<'a> {
    pub preset: Option<&'a str>,
    pub config_path: Option<&'a Path>,
    pub overrides: &'a [String],
    pub seed: Option<u64>,
}

/// Resolves preset, file, overrides and seed into a validated configuration.
pub fn resolve(src: &Sources) -> Result<RunConfig> {
    let mut file_table = Table::new();
    let mut file_sweep = None;
    let mut manifest_preset = None;
    if let Some(path) = src.config_path {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        (file_table, file_sweep, manifest_preset) = split_manifest(table);
    }
    let preset_name = src.preset.map(str::to_string).or(manifest_preset);
    let (base, mut sweep) = match &preset_name {
        Some(name) => {
            let p = preset(name).ok_or_else(|| anyhow!("unknown preset {name:?}; known: {}", PRESET_NAMES.join(", ")))?;
            (p.config, p.sweep)
        }
        None => (TrialConfig::default(), None),
    };
    let mut table = Table::try_from(&base).context("serializing the base configuration")?;
    convert_degrees(&mut file_table)?;
    merge(&mut table, file_table);
    for o in src.overrides {
        let (path, value) = parse_override(o)?;
        let mut single = Table::new();
        set_path(&mut single, &path, value)?;
        convert_degrees(&mut single)?;
        merge(&mut table, single);
    }
    let mut config: TrialConfig = Value::Table(table).try_into().context("invalid configuration")?;
    if let Some(seed) = src.seed {
        config.harness.seed = seed;
    }
    if let Some(v) = file_sweep {
        let mut t = match v {
            Value::Table(t) => t,
            _ => bail!("sweep must be a table"),
        };
        convert_degrees(&mut t)?;
        sweep = Some(Value::Table(t).try_into().context("invalid sweep")?);
    }
    config.validate().context("invalid configuration")?;
    Ok(RunConfig {
        preset: preset_name,
        config,
        sweep,
    })
}

impl Manifest {
    pub fn new(command: &str, run: &RunConfig) -> Self {
        Self {
            version: VERSION.to_string(),
            command: command.to_string(),
            preset: run.preset.clone(),
            seed: run.config.harness.seed,
            sweep: run.sweep.clone(),
            config: run.config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing manifest")?;
        std::fs::write(dir.join("manifest.toml"), text).context("writing manifest.toml")
    }
}
