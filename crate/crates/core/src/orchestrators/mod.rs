//! Algorithm drivers: Sequential PSRO, naive parallel PSRO, P2SRO, DCH,
//! Rectified PSRO and self-play over one shared round-based scheduler.
//!
//! A *round* advances every training worker by one `train_step`; the global
//! step counter adds one per worker step. Meta-Nash refreshes and
//! exploitability measurements are scheduled in rounds, so traces from runs
//! with different worker counts share one time axis.
//!
//! Two execution modes exist. [`ExecutionMode::Lockstep`] is
//! single-threaded and bit-deterministic. [`ExecutionMode::Threaded`] steps
//! workers in parallel and computes meta-Nash targets and evaluations in the
//! background, installing them once they are ready; workers keep training
//! against their previous target meanwhile.

mod jobs;
mod rectified;
mod state;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{MixedStrategy, PayoffMatrix};
use crate::learners::{AnnealSchedule, PlateauConfig};
use crate::meta_solver::SolverBudget;
use crate::population::{InitialPolicy, Population};
use crate::trace::{ExploitabilityTrace, TraceSink};

pub use rectified::{RectifiedGeneration, RectifiedTarget};
pub use state::{RunState, WorkerView};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    SequentialPsro,
    NaivePsro,
    #[default]
    P2sro,
    Dch,
    RectifiedPsro,
    SelfPlay,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 6] = [
        AlgorithmKind::SequentialPsro,
        AlgorithmKind::NaivePsro,
        AlgorithmKind::P2sro,
        AlgorithmKind::Dch,
        AlgorithmKind::RectifiedPsro,
        AlgorithmKind::SelfPlay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::SequentialPsro => "sequential_psro",
            AlgorithmKind::NaivePsro => "naive_psro",
            AlgorithmKind::P2sro => "p2sro",
            AlgorithmKind::Dch => "dch",
            AlgorithmKind::RectifiedPsro => "rectified_psro",
            AlgorithmKind::SelfPlay => "self_play",
        }
    }

    /// Sequential PSRO and self-play are single-worker by definition.
    pub fn effective_workers(self, requested: usize) -> usize {
        match self {
            AlgorithmKind::SequentialPsro | AlgorithmKind::SelfPlay => 1,
            _ => requested,
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    #[default]
    Lockstep,
    Threaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    pub workers: usize,
    pub mode: ExecutionMode,
    /// Rounds between meta-Nash target recomputations.
    pub meta_refresh_period: u64,
    pub max_rounds: u64,
    /// Optional cap on the total number of worker steps.
    pub max_steps: Option<u64>,
    /// Rounds between exploitability measurements.
    pub eval_every: u64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            mode: ExecutionMode::Lockstep,
            meta_refresh_period: 10,
            max_rounds: 1000,
            max_steps: None,
            eval_every: 10,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("scheduler.workers must be at least 1".into()));
        }
        if self.meta_refresh_period == 0 {
            return Err(Error::Config(
                "scheduler.meta_refresh_period must be at least 1".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::Config(
                "scheduler.eval_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algorithm: AlgorithmKind,
    pub scheduler: SchedulerConfig,
    pub anneal: AnnealSchedule,
    pub plateau: PlateauConfig,
    /// Budget for the meta-Nash targets the learners train against.
    pub meta_solver: SolverBudget,
    /// Sharpen every target meta-Nash into an exact equilibrium when the
    /// support system allows it.
    pub refine_meta: bool,
    /// Budget for the whole-population meta-Nash used in measurements.
    pub eval_solver: SolverBudget,
    /// Sharpen the measurement meta-Nash into an exact equilibrium when the
    /// support system allows it.
    pub refine_eval: bool,
    /// Start every target fictitious-play run from a random member instead
    /// of member 0, drawn from the run seed.
    pub randomize_meta_init: bool,
    pub initial_policy: InitialPolicy,
    /// Measure over fixed policies only, ignoring in-training snapshots.
    pub eval_fixed_only: bool,
    /// Rectified PSRO trains a response for each member whose meta-Nash
    /// weight exceeds this.
    pub rectified_support_threshold: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: AlgorithmKind::default(),
            scheduler: SchedulerConfig::default(),
            anneal: AnnealSchedule::default(),
            plateau: PlateauConfig::default(),
            meta_solver: SolverBudget::default(),
            refine_meta: false,
            eval_solver: SolverBudget::new(20_000, 1e-3),
            refine_eval: false,
            randomize_meta_init: false,
            initial_policy: InitialPolicy::default(),
            eval_fixed_only: false,
            rectified_support_threshold: 0.02,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        self.anneal.validate()?;
        self.plateau.validate()?;
        self.meta_solver.validate()?;
        self.eval_solver.validate()?;
        if !(0.0..1.0).contains(&self.rectified_support_threshold) {
            return Err(Error::Config(format!(
                "rectified_support_threshold must be in [0, 1), got {}",
                self.rectified_support_threshold
            )));
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.algorithm.effective_workers(self.scheduler.workers)
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: ExploitabilityTrace,
    pub population: Population,
    /// Rounds at which a policy was added to the fixed set.
    pub promotion_rounds: Vec<u64>,
    /// Rectified PSRO only: one entry per completed or started generation.
    pub generations: Vec<RectifiedGeneration>,
    /// Rectified PSRO stopped because a generation added nothing new.
    pub terminated_early: bool,
    pub rounds: u64,
    pub global_steps: u64,
}

impl RunOutcome {
    pub fn final_exploitability(&self) -> Option<f64> {
        self.trace.final_exploitability()
    }

    pub fn fixed_policies(&self) -> Vec<MixedStrategy> {
        self.population
            .fixed_strategies()
            .map(|s| s.as_ref().clone())
            .collect()
    }
}

/// Runs `cfg.algorithm` to the end of its budget.
pub fn run(game: Arc<PayoffMatrix>, cfg: &RunConfig) -> Result<RunOutcome> {
    run_with_sink(game, cfg, &mut ())
}

/// Like [`run`], streaming every trace record to `sink` in round order as
/// soon as it is available.
pub fn run_with_sink(
    game: Arc<PayoffMatrix>,
    cfg: &RunConfig,
    sink: &mut dyn TraceSink,
) -> Result<RunOutcome> {
    let mut state = RunState::new(game, cfg.clone())?;
    state.flush_records(sink)?;
    while !state.is_done() {
        state.step_round()?;
        state.flush_records(sink)?;
    }
    state.finish(sink)
}

#[cfg(test)]
mod tests;
