//! Exact-oracle learners.
//!
//! A learner "trains" against a target strategy by mixing in the exact best
//! response: `π' = r·BR(target) + (1 − r)·π`. With `r = 1` every step is a
//! full oracle best response.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{best_response, expected_utility, MixedStrategy, PayoffMatrix};

/// Learning-rate schedule, indexed by the learner's own step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum AnnealSchedule {
    Constant {
        r0: f64,
    },
    /// `r0 / (1 + gamma·t)`; the rates sum to infinity.
    InverseTime {
        r0: f64,
        gamma: f64,
    },
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule::Constant { r0: 1.0 }
    }
}

impl AnnealSchedule {
    pub fn initial_rate(&self) -> f64 {
        match *self {
            AnnealSchedule::Constant { r0 } | AnnealSchedule::InverseTime { r0, .. } => r0,
        }
    }

    /// Same schedule shape with a different initial rate.
    pub fn with_initial_rate(self, rate: f64) -> Self {
        match self {
            AnnealSchedule::Constant { .. } => AnnealSchedule::Constant { r0: rate },
            AnnealSchedule::InverseTime { gamma, .. } => {
                AnnealSchedule::InverseTime { r0: rate, gamma }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r0 = self.initial_rate();
        if !(r0 > 0.0 && r0 <= 1.0) {
            return Err(Error::Config(format!("learning rate {r0} outside (0, 1]")));
        }
        if let AnnealSchedule::InverseTime { gamma, .. } = *self {
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return Err(Error::Config(format!(
                    "anneal gamma {gamma} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }
}

pub fn learning_rate_at(schedule: &AnnealSchedule, step: u64) -> f64 {
    match *schedule {
        AnnealSchedule::Constant { r0 } => r0,
        AnnealSchedule::InverseTime { r0, gamma } => r0 / (1.0 + gamma * step as f64),
    }
}

/// Parameters of the plateau (promotion) rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateauConfig {
    /// Number of most recent evaluations considered.
    pub window: usize,
    /// Improvement over the window below which performance has plateaued.
    pub min_improvement: f64,
    /// Learner steps between performance evaluations.
    pub eval_period: u64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            window: 5,
            min_improvement: 0.01,
            eval_period: 10,
        }
    }
}

impl PlateauConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config("plateau window must be at least 2".into()));
        }
        if self.eval_period < 1 {
            return Err(Error::Config(
                "plateau eval_period must be at least 1".into(),
            ));
        }
        if !(self.min_improvement >= 0.0) {
            return Err(Error::Config(
                "plateau min_improvement must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    policy: MixedStrategy,
    level: u32,
    schedule: AnnealSchedule,
    step_count: u64,
    perf_history: VecDeque<(u64, f64)>,
    history_capacity: usize,
}

impl LearnerState {
    pub fn new(
        policy: MixedStrategy,
        level: u32,
        schedule: AnnealSchedule,
        history_capacity: usize,
    ) -> Self {
        Self {
            policy,
            level,
            schedule,
            step_count: 0,
            perf_history: VecDeque::with_capacity(history_capacity),
            history_capacity: history_capacity.max(1),
        }
    }

    pub fn policy(&self) -> &MixedStrategy {
        &self.policy
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn schedule(&self) -> &AnnealSchedule {
        &self.schedule
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn history(&self) -> impl Iterator<Item = &(u64, f64)> {
        self.perf_history.iter()
    }

    pub fn current_rate(&self) -> f64 {
        learning_rate_at(&self.schedule, self.step_count)
    }

    /// One step towards the best response to `target`. Returns the index of
    /// that best response.
    ///
    /// The new probabilities are computed as `(1 − r)·π_i` off the best
    /// response and `1 − Σ_{i≠br} π'_i` on it, so the sum stays at 1 to
    /// within a few ulps no matter how many steps are taken.
    pub fn train_step(&mut self, target: &MixedStrategy, game: &PayoffMatrix) -> Result<usize> {
        if self.policy.len() != game.dim() {
            return Err(Error::Shape {
                expected: game.dim(),
                found: self.policy.len(),
            });
        }
        let br = best_response(game, target)?;
        let r = self.current_rate();
        let keep = 1.0 - r;
        let mut probs: Vec<f64> = self.policy.probs().iter().map(|p| keep * p).collect();
        probs[br] = 0.0;
        let rest: f64 = probs.iter().sum();
        probs[br] = (1.0 - rest).max(0.0);
        self.policy = MixedStrategy::from_vec_unchecked(probs);
        self.step_count += 1;
        Ok(br)
    }

    /// Expected utility of the learner's policy against `target`.
    pub fn performance(&self, target: &MixedStrategy, game: &PayoffMatrix) -> Result<f64> {
        expected_utility(game, &self.policy, target)
    }

    pub fn record_performance(&mut self, value: f64) {
        if self.perf_history.len() == self.history_capacity {
            self.perf_history.pop_front();
        }
        self.perf_history.push_back((self.step_count, value));
    }

    /// Records performance if the step count is on the evaluation cadence.
    /// Returns whether an evaluation happened.
    pub fn evaluate_if_due(
        &mut self,
        target: &MixedStrategy,
        game: &PayoffMatrix,
        cfg: &PlateauConfig,
    ) -> Result<bool> {
        if self.step_count == 0 || !self.step_count.is_multiple_of(cfg.eval_period) {
            return Ok(false);
        }
        let value = self.performance(target, game)?;
        self.record_performance(value);
        Ok(true)
    }

    /// True once the last `window` evaluations improve on the first of them
    /// by less than `min_improvement`.
    pub fn is_plateaued(&self, cfg: &PlateauConfig) -> bool {
        let n = self.perf_history.len();
        if n < cfg.window {
            return false;
        }
        let recent = self.perf_history.range(n - cfg.window..).map(|&(_, v)| v);
        let first = self.perf_history[n - cfg.window].1;
        let best = recent.fold(f64::NEG_INFINITY, f64::max);
        best - first < cfg.min_improvement
    }
}
