//! Run configuration: defaults, then the TOML file, then flags.

use std::path::{Path, PathBuf};

use paretoreid::descent::OptimizerConfig;
use paretoreid::simulator::{WorldConfig, DEFAULT_MARGIN};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::args::{ModeKind, ProblemKind};
use crate::error::{CliError, CliResult};

pub const OUT_ENV: &str = "PARETOREID_OUT";
pub const DEFAULT_OUT: &str = "paretoreid-out";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Not written back out, so saved configs do not depend on where they
    /// were saved.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub sampler: BatchSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub name: ProblemKind,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            name: ProblemKind::Quadratic,
            dim: 2,
            theta0: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeSection {
    pub kind: ModeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub prefs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pref: Option<usize>,
}

impl Default for ModeSection {
    fn default() -> Self {
        Self {
            kind: ModeKind::Gbo,
            weights: None,
            prefs: 5,
            pref: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSection {
    pub p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self { p: 16, k: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub synthesis: usize,
    pub d_feat: usize,
    pub margin: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            synthesis: 0,
            d_feat: 16,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub ls_grid: Vec<f64>,
    pub tolerance: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            ls_grid: (1..10).map(|i| i as f64 / 10.0).collect(),
            tolerance: 1e-3,
        }
    }
}

/// A partial configuration tree; later layers replace leaves of earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Overrides(pub Table);

pub trait IntoToml {
    fn into_toml(self) -> Value;
}

impl IntoToml for usize {
    fn into_toml(self) -> Value {
        Value::Integer(self as i64)
    }
}

impl IntoToml for u64 {
    fn into_toml(self) -> Value {
        Value::Integer(self as i64)
    }
}

impl IntoToml for f64 {
    fn into_toml(self) -> Value {
        Value::Float(self)
    }
}

impl IntoToml for bool {
    fn into_toml(self) -> Value {
        Value::Boolean(self)
    }
}

impl IntoToml for String {
    fn into_toml(self) -> Value {
        Value::String(self)
    }
}

impl IntoToml for &str {
    fn into_toml(self) -> Value {
        Value::String(self.to_string())
    }
}

impl IntoToml for Vec<f64> {
    fn into_toml(self) -> Value {
        Value::Array(self.into_iter().map(Value::Float).collect())
    }
}

impl Overrides {
    /// Sets `section.key` when `value` is present; an empty section name
    /// addresses the top level.
    pub fn set<V: IntoToml>(&mut self, section: &str, key: &str, value: Option<V>) {
        let Some(v) = value else { return };
        let table = if section.is_empty() {
            &mut self.0
        } else {
            let entry = self
                .0
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => t,
                _ => unreachable!("sections are always tables"),
            }
        };
        table.insert(key.to_string(), v.into_toml());
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Layers `defaults`, the config file and `flags`, in increasing priority.
pub fn resolve(defaults: Overrides, file: Option<&Path>, flags: Overrides) -> CliResult<RunConfig> {
    let mut tree = defaults.0;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let parsed: Table = text.parse()?;
        merge(&mut tree, parsed);
    }
    merge(&mut tree, flags.0);
    if let Some(Value::Integer(s)) = tree.get("seed") {
        if *s < 0 {
            return Err(CliError::config("seed must be at most 2^63 - 1"));
        }
    }
    let mut cfg: RunConfig = Value::Table(tree).try_into()?;
    cfg.optimizer.seed = cfg.seed;
    cfg.world.seed = cfg.seed;
    Ok(cfg)
}

impl RunConfig {
    /// Flag, then config file, then the environment, then the default.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::config(format!("cannot serialize config: {e}")))
    }
}
