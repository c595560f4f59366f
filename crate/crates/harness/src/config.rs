//! Experiment configuration: a TOML document plus `key=value` overrides.
//!
//! ```toml
//! algorithms = ["p2sro", "naive_psro"]
//! workers = [1, 4, 8]
//! learning_rates = [0.5]
//! run_seeds = [0, 1, 2]
//!
//! [game]
//! kind = "random"
//! dim = 60
//! seeds = [0, 1, 2, 3, 4]
//!
//! [scheduler]
//! max_rounds = 1000
//! eval_every = 50
//! ```
//!
//! Every sweep list must be non-empty and free of duplicates. Overrides use
//! dotted paths (`scheduler.max_rounds=300`, `game.seeds=[0,1]`) and win
//! over the file; a value that does not parse as TOML is taken as a string.

use std::fmt::Debug;
use std::path::{Path, PathBuf};

use psro_core::game::Fixture;
use psro_core::learners::{AnnealSchedule, PlateauConfig};
use psro_core::meta_solver::SolverBudget;
use psro_core::population::InitialPolicy;
use psro_core::{AlgorithmKind, ExecutionMode, RunConfig, SchedulerConfig};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{HarnessError, Result};

/// Output directory used when neither the config nor the environment names one.
pub const DEFAULT_OUTPUT_DIR: &str = "psro-output";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    #[serde(deserialize_with = "sweep")]
    pub algorithms: Vec<AlgorithmKind>,
    #[serde(default = "default_workers", deserialize_with = "worker_sweep")]
    pub workers: Vec<usize>,
    #[serde(deserialize_with = "rate_sweep")]
    pub learning_rates: Vec<f64>,
    #[serde(default = "default_run_seeds", deserialize_with = "sweep")]
    pub run_seeds: Vec<u64>,
    #[serde(default, deserialize_with = "checked")]
    pub anneal: AnnealShape,
    #[serde(default, deserialize_with = "checked")]
    pub plateau: PlateauConfig,
    #[serde(default, deserialize_with = "checked")]
    pub scheduler: SchedulerSettings,
    #[serde(default, deserialize_with = "checked")]
    pub solver: SolverSettings,
    #[serde(default)]
    pub initial_policy: InitialPolicy,
    /// Directory for the trace files.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Maximum number of cells run at once; defaults to the number of CPUs.
    #[serde(default, deserialize_with = "positive_option")]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", try_from = "RawGameSpec")]
pub enum GameSpec {
    Random { dim: usize, seeds: Vec<u64> },
    Fixture { name: Fixture },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GameKind {
    Random,
    Fixture,
}

/// Flat form of the `[game]` table. Deserializing field by field (rather
/// than through a tagged enum) keeps the line of an invalid field in the
/// error message.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGameSpec {
    kind: GameKind,
    #[serde(default, deserialize_with = "positive_option")]
    dim: Option<usize>,
    #[serde(default, deserialize_with = "sweep_option")]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    name: Option<Fixture>,
}

impl TryFrom<RawGameSpec> for GameSpec {
    type Error = String;

    fn try_from(raw: RawGameSpec) -> Result<Self, String> {
        match (raw.kind, raw.dim, raw.seeds, raw.name) {
            (GameKind::Random, Some(dim), Some(seeds), None) => Ok(GameSpec::Random { dim, seeds }),
            (GameKind::Fixture, None, None, Some(name)) => Ok(GameSpec::Fixture { name }),
            (GameKind::Random, ..) => {
                Err("a random game takes `dim` and `seeds` (and no `name`)".into())
            }
            (GameKind::Fixture, ..) => {
                Err("a fixture game takes `name` (and no `dim` or `seeds`)".into())
            }
        }
    }
}

/// Shape of the learning-rate schedule; the initial rate comes from the
/// `learning_rates` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum AnnealShape {
    #[default]
    Constant,
    InverseTime {
        gamma: f64,
    },
}

impl AnnealShape {
    pub fn with_rate(self, r0: f64) -> AnnealSchedule {
        match self {
            AnnealShape::Constant => AnnealSchedule::Constant { r0 },
            AnnealShape::InverseTime { gamma } => AnnealSchedule::InverseTime { r0, gamma },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AnnealShape::Constant => "constant",
            AnnealShape::InverseTime { .. } => "inverse_time",
        }
    }
}

/// Scheduler settings shared by every cell; the worker count is swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerSettings {
    pub mode: ExecutionMode,
    pub meta_refresh_period: u64,
    pub max_rounds: u64,
    pub max_steps: Option<u64>,
    pub eval_every: u64,
}

impl Default for SchedulerSettings {
    fn default() -> Self {
        let s = SchedulerConfig::default();
        Self {
            mode: s.mode,
            meta_refresh_period: s.meta_refresh_period,
            max_rounds: s.max_rounds,
            max_steps: s.max_steps,
            eval_every: s.eval_every,
        }
    }
}

impl SchedulerSettings {
    pub fn with_workers(self, workers: usize) -> SchedulerConfig {
        SchedulerConfig {
            workers,
            mode: self.mode,
            meta_refresh_period: self.meta_refresh_period,
            max_rounds: self.max_rounds,
            max_steps: self.max_steps,
            eval_every: self.eval_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Budget for the targets the learners train against.
    pub meta: SolverBudget,
    /// Budget for the exploitability measurements.
    pub eval: SolverBudget,
    pub refine_meta: bool,
    pub refine_eval: bool,
    pub randomize_meta_init: bool,
    pub eval_fixed_only: bool,
    pub rectified_support_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let r = RunConfig::default();
        Self {
            meta: r.meta_solver,
            eval: r.eval_solver,
            refine_meta: r.refine_meta,
            refine_eval: r.refine_eval,
            randomize_meta_init: r.randomize_meta_init,
            eval_fixed_only: r.eval_fixed_only,
            rectified_support_threshold: r.rectified_support_threshold,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document. Errors carry the line and column.
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(source_name, e.to_string()))
    }

    /// Reads `path` and applies the overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Self::from_toml_str_with_overrides(&text, &path.display().to_string(), overrides)
    }

    pub fn from_toml_str_with_overrides(
        text: &str,
        source_name: &str,
        overrides: &[String],
    ) -> Result<Self> {
        if overrides.is_empty() {
            return Self::from_toml_str(text, source_name);
        }
        let mut doc: toml_edit::DocumentMut = text
            .parse()
            .map_err(|e: toml_edit::TomlError| config_error(source_name, e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let name = format!("{source_name} (with overrides {})", overrides.join(" "));
        Self::from_toml_str(&doc.to_string(), &name)
    }

    /// The configured directory, else `env_default`, else [`DEFAULT_OUTPUT_DIR`].
    pub fn output_dir(&self, env_default: Option<&Path>) -> PathBuf {
        self.output
            .clone()
            .or_else(|| env_default.map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn dim(&self) -> usize {
        match &self.game {
            GameSpec::Random { dim, .. } => *dim,
            GameSpec::Fixture { name } => psro_core::game::canonical_game(*name).dim(),
        }
    }
}

fn config_error(source_name: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        source_name: source_name.to_string(),
        message: message.into().trim_end().to_string(),
    }
}

fn apply_override(doc: &mut toml_edit::DocumentMut, spec: &str) -> Result<()> {
    let fail = |message: String| config_error(&format!("override {spec:?}"), message);
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| fail("expected key=value".into()))?;
    let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(fail(format!("invalid key {key:?}")));
    }
    let value = raw
        .trim()
        .parse::<toml_edit::Value>()
        .unwrap_or_else(|_| toml_edit::Value::from(raw.trim()));
    let (last, parents) = path
        .split_last()
        .expect("split yields at least one segment");
    let mut table: &mut dyn toml_edit::TableLike = doc.as_table_mut();
    for (depth, segment) in parents.iter().enumerate() {
        table = table
            .entry(segment)
            .or_insert_with(toml_edit::table)
            .as_table_like_mut()
            .ok_or_else(|| fail(format!("{} is not a table", path[..=depth].join("."))))?;
    }
    table.insert(last, toml_edit::Item::Value(value));
    Ok(())
}

fn default_workers() -> Vec<usize> {
    vec![1]
}

fn default_run_seeds() -> Vec<u64> {
    vec![0]
}

fn sweep<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de> + PartialEq + Debug,
{
    let values = Vec::<T>::deserialize(d)?;
    if values.is_empty() {
        return Err(D::Error::custom("sweep list must not be empty"));
    }
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(D::Error::custom(format!("duplicate sweep value {v:?}")));
        }
    }
    Ok(values)
}

fn sweep_option<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de> + PartialEq + Debug,
{
    sweep(d).map(Some)
}

fn worker_sweep<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
    let values: Vec<usize> = sweep(d)?;
    if values.contains(&0) {
        return Err(D::Error::custom("worker counts must be at least 1"));
    }
    Ok(values)
}

fn rate_sweep<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let values: Vec<f64> = sweep(d)?;
    if let Some(r) = values.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(D::Error::custom(format!(
            "learning rate {r} outside (0, 1]"
        )));
    }
    Ok(values)
}

fn positive<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    match usize::deserialize(d)? {
        0 => Err(D::Error::custom("must be at least 1")),
        n => Ok(n),
    }
}

fn positive_option<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
    positive(d).map(Some)
}

/// Settings tables that can check themselves once deserialized.
trait Check {
    fn check(&self) -> psro_core::Result<()>;
}

impl Check for PlateauConfig {
    fn check(&self) -> psro_core::Result<()> {
        self.validate()
    }
}

impl Check for AnnealShape {
    fn check(&self) -> psro_core::Result<()> {
        // Any admissible rate works here; the swept rates are checked separately.
        self.with_rate(1.0).validate()
    }
}

impl Check for SchedulerSettings {
    fn check(&self) -> psro_core::Result<()> {
        self.with_workers(1).validate()
    }
}

impl Check for SolverSettings {
    fn check(&self) -> psro_core::Result<()> {
        RunConfig {
            meta_solver: self.meta,
            eval_solver: self.eval,
            rectified_support_threshold: self.rectified_support_threshold,
            ..RunConfig::default()
        }
        .validate()
    }
}

fn checked<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de> + Check,
{
    let value = T::deserialize(d)?;
    value.check().map_err(D::Error::custom)?;
    Ok(value)
}
