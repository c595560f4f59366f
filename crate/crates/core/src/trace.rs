//! Exploitability traces: the unit of experimental output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameOrigin;
use crate::orchestrators::AlgorithmKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: u64,
    pub global_step: u64,
    pub exploitability: f64,
    pub population_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub algorithm: AlgorithmKind,
    pub dim: usize,
    pub learning_rate: f64,
    pub workers: usize,
    pub game: GameOrigin,
    pub run_seed: u64,
}

impl TraceMetadata {
    /// Flat `key=value` view, in a fixed order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut pairs = vec![
            ("algorithm", self.algorithm.to_string()),
            ("dim", self.dim.to_string()),
            ("lr", self.learning_rate.to_string()),
            ("workers", self.workers.to_string()),
        ];
        match self.game {
            GameOrigin::Random { seed } => {
                pairs.push(("game", "random".into()));
                pairs.push(("game_seed", seed.to_string()));
            }
            GameOrigin::Fixture { name } => {
                pairs.push(("game", name.to_string()));
            }
            GameOrigin::Custom => pairs.push(("game", "custom".into())),
        }
        pairs.push(("run_seed", self.run_seed.to_string()));
        pairs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitabilityTrace {
    pub metadata: TraceMetadata,
    pub records: Vec<TraceRecord>,
}

impl ExploitabilityTrace {
    pub fn final_exploitability(&self) -> Option<f64> {
        self.records.last().map(|r| r.exploitability)
    }

    /// Record at exactly `round`, if one was taken.
    pub fn at_round(&self, round: u64) -> Option<&TraceRecord> {
        self.records
            .binary_search_by_key(&round, |r| r.round)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Rounds strictly increasing, exploitability finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        for pair in self.records.windows(2) {
            if pair[1].round <= pair[0].round {
                return Err(Error::State(format!(
                    "trace rounds not increasing: {} then {}",
                    pair[0].round, pair[1].round
                )));
            }
        }
        if let Some(r) = self
            .records
            .iter()
            .find(|r| !(r.exploitability >= 0.0 && r.exploitability.is_finite()))
        {
            return Err(Error::State(format!(
                "invalid exploitability {} at round {}",
                r.exploitability, r.round
            )));
        }
        Ok(())
    }
}

/// Receives trace records as they are produced.
pub trait TraceSink {
    fn record(&mut self, record: &TraceRecord);
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, record: &TraceRecord) {
        self.push(*record);
    }
}

/// Discards everything.
impl TraceSink for () {
    fn record(&mut self, _: &TraceRecord) {}
}
