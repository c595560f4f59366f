//! Rectified PSRO: per generation, every member in the support of the
//! fixed-population meta-Nash trains a response to the meta-Nash mixture
//! of the members it beats or ties.

use std::sync::Arc;

use super::state::{RunState, Worker};
use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::meta_solver::solve_precise;
use crate::population::{mixture, RestrictedMeta};

/// Responses closer than this (in L∞) to an existing policy are not added.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedTarget {
    /// Population index of the member the response is trained for.
    pub member: usize,
    /// Members it beats or ties, with their renormalized meta-Nash weights.
    pub opponents: Vec<usize>,
    pub opponent_weights: Vec<f64>,
    pub target: MixedStrategy,
    /// The trained response, once its learner has plateaued.
    pub response: Option<MixedStrategy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedGeneration {
    /// 1-based generation number.
    pub index: usize,
    pub start_round: u64,
    /// Meta-Nash over the fixed population at the start of the generation.
    pub meta: RestrictedMeta,
    pub targets: Vec<RectifiedTarget>,
    /// Population indices of the policies this generation added.
    pub added: Vec<usize>,
    pub complete: bool,
}

/// Which targets of the current generation are being trained.
#[derive(Debug, Clone, Default)]
pub(crate) struct RectifiedProgress {
    next_target: usize,
    batch: Vec<usize>,
}

impl RunState {
    /// Trains the current generation's targets in batches of `workers`
    /// learners; each learner stops at its plateau. When the last batch is
    /// done the non-duplicate responses join the population, and a
    /// generation that adds nothing ends the run.
    pub(super) fn rectified_round(&mut self) -> Result<()> {
        if self.terminated {
            return Ok(());
        }
        if self.workers.is_empty() {
            if self.generations.last().is_none_or(|g| g.complete) {
                self.start_generation()?;
            }
            self.start_batch()?;
        }
        self.step_workers()?;
        let plateau = self.cfg.plateau;
        for w in &mut self.workers {
            if !w.frozen && w.plateaued_now(&plateau) {
                w.frozen = true;
            }
        }
        if self.workers.iter().all(|w| w.frozen) {
            let generation = self.generations.last_mut().expect("generation in progress");
            for (w, &t) in self.workers.iter().zip(&self.rectified.batch) {
                generation.targets[t].response = Some(w.learner.policy().clone());
            }
            self.workers.clear();
            self.rectified.batch.clear();
            if self.rectified.next_target == generation.targets.len() {
                self.finish_generation()?;
            }
        }
        Ok(())
    }

    fn start_generation(&mut self) -> Result<()> {
        let meta = if self.cfg.refine_meta {
            let members: Vec<usize> = (0..self.population.fixed_count()).collect();
            let matrix = self.population.payoff_matrix(&members)?;
            RestrictedMeta {
                members,
                meta: solve_precise(&matrix, self.cfg.meta_solver)?,
            }
        } else {
            self.population.meta_nash_fixed(self.cfg.meta_solver)?
        };
        let weights = meta.meta.weights.probs();
        let threshold = self.cfg.rectified_support_threshold;
        let mut chosen: Vec<usize> = (0..weights.len())
            .filter(|&p| weights[p] > threshold)
            .collect();
        if chosen.is_empty() {
            // A wide, flat meta-Nash can put every weight under the
            // threshold; fall back to the whole support.
            chosen = (0..weights.len()).filter(|&p| weights[p] > 0.0).collect();
        }
        let table = self.population.table();
        let mut targets = Vec::with_capacity(chosen.len());
        for pos in chosen {
            let member = meta.members[pos];
            // The member always ties itself, so this is never empty.
            let beaten: Vec<usize> = (0..meta.members.len())
                .filter(|&k| table.get(member, meta.members[k]) >= 0.0)
                .collect();
            let total: f64 = beaten.iter().map(|&k| weights[k]).sum();
            if !(total > 0.0) {
                return Err(Error::State(format!(
                    "rectified target of member {member} has no weight"
                )));
            }
            let opponent_weights: Vec<f64> = beaten.iter().map(|&k| weights[k] / total).collect();
            let opponents: Vec<usize> = beaten.iter().map(|&k| meta.members[k]).collect();
            let strategies: Vec<&MixedStrategy> = opponents
                .iter()
                .map(|&i| self.population.strategy(i).as_ref())
                .collect();
            let target = mixture(&strategies, &MixedStrategy::new(opponent_weights.clone())?)?;
            targets.push(RectifiedTarget {
                member,
                opponents,
                opponent_weights,
                target,
                response: None,
            });
        }
        self.generations.push(RectifiedGeneration {
            index: self.generations.len() + 1,
            start_round: self.round,
            meta,
            targets,
            added: Vec::new(),
            complete: false,
        });
        self.rectified.next_target = 0;
        Ok(())
    }

    fn start_batch(&mut self) -> Result<()> {
        let generation = self.generations.last().expect("generation in progress");
        let start = self.rectified.next_target;
        let end = (start + self.cfg.workers()).min(generation.targets.len());
        let mut workers = Vec::with_capacity(end - start);
        for t in &generation.targets[start..end] {
            let mut w = Worker::fresh(self.game.dim(), 0, &self.cfg)?;
            w.set_target(Arc::new(t.target.clone()), t.opponents.clone(), self.epoch);
            workers.push(w);
        }
        self.workers = workers;
        self.rectified.batch = (start..end).collect();
        self.rectified.next_target = end;
        Ok(())
    }

    fn finish_generation(&mut self) -> Result<()> {
        let generation = self.generations.last_mut().expect("generation in progress");
        generation.complete = true;
        for t in &generation.targets {
            let response = t.response.as_ref().expect("every target was trained");
            let duplicate = self
                .population
                .policies()
                .iter()
                .any(|p| p.strategy.linf_distance(response) < DUPLICATE_TOLERANCE);
            if !duplicate {
                let index = self.population.add_fixed_policy(response.clone())?;
                generation.added.push(index);
                self.epoch += 1;
                self.promotion_rounds.push(self.round);
            }
        }
        if generation.added.is_empty() {
            self.terminated = true;
            let record = self.evaluation_job()?.run()?;
            self.frozen_eval = Some((record.exploitability, record.population_size));
        }
        Ok(())
    }
}
