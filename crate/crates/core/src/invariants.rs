//! Executable statements of the numerical invariants the crate relies on.
//!
//! Each check returns `Err(Error::Invariant(..))` describing the first
//! violation it finds. The property tests drive them with random inputs,
//! and experiment code can call them as cheap self-checks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{
    best_response, best_response_value, expected_utility, MixedStrategy, PayoffMatrix,
};
use crate::learners::{AnnealSchedule, LearnerState};
use crate::meta_solver::{fictitious_play_from, SolverBudget};
use crate::population::Population;

/// Largest tolerated drift of a learner's probability sum from 1.
pub const SIMPLEX_DRIFT_LIMIT: f64 = 1e-12;

/// Slack between the fictitious-play stopping test, evaluated on a running
/// sum, and the residual recomputed from the final weights.
pub const RESIDUAL_ROUNDING_SLACK: f64 = 1e-12;

fn violation(msg: String) -> Error {
    Error::Invariant(msg)
}

/// `G = -Gᵀ` exactly, zero diagonal, entries in `[-1, 1]`.
pub fn check_antisymmetric(game: &PayoffMatrix) -> Result<()> {
    let n = game.dim();
    for i in 0..n {
        for j in 0..n {
            let g = game.get(i, j);
            if g != -game.get(j, i) {
                return Err(violation(format!(
                    "G[{i}][{j}] = {g} but G[{j}][{i}] = {}",
                    game.get(j, i)
                )));
            }
            if !(-1.0..=1.0).contains(&g) {
                return Err(violation(format!("G[{i}][{j}] = {g} outside [-1, 1]")));
            }
        }
    }
    Ok(())
}

/// `u(a, b) = -u(b, a)` and `u(a, a) = 0`, both exactly.
pub fn check_utility_antisymmetry(
    game: &PayoffMatrix,
    a: &MixedStrategy,
    b: &MixedStrategy,
) -> Result<()> {
    let ab = expected_utility(game, a, b)?;
    let ba = expected_utility(game, b, a)?;
    if ab != -ba {
        return Err(violation(format!("u(a, b) = {ab} but u(b, a) = {ba}")));
    }
    let aa = expected_utility(game, a, a)?;
    if aa != 0.0 {
        return Err(violation(format!("u(a, a) = {aa}")));
    }
    Ok(())
}

/// Runs `steps` learner updates towards `target` and checks that the policy
/// stays a probability vector throughout. Returns the largest drift of the
/// probability sum from 1 that was observed.
pub fn check_simplex_preservation(
    game: &PayoffMatrix,
    policy: MixedStrategy,
    target: &MixedStrategy,
    schedule: AnnealSchedule,
    steps: u64,
) -> Result<f64> {
    let mut learner = LearnerState::new(policy, 1, schedule, 1);
    let mut worst: f64 = 0.0;
    for step in 0..steps {
        learner.train_step(target, game)?;
        let probs = learner.policy().probs();
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(violation(format!(
                "negative probability {p} after step {step}"
            )));
        }
        let drift = (probs.iter().sum::<f64>() - 1.0).abs();
        worst = worst.max(drift);
        if drift >= SIMPLEX_DRIFT_LIMIT {
            return Err(violation(format!(
                "probability sum off by {drift} after step {step}"
            )));
        }
    }
    Ok(worst)
}

/// The best response attains the best-response value, no pure strategy
/// does better, and ties go to the lowest index.
pub fn check_best_response(game: &PayoffMatrix, opponent: &MixedStrategy) -> Result<()> {
    let br = best_response(game, opponent)?;
    let value = best_response_value(game, opponent)?;
    let payoffs = game.payoffs_against(opponent)?;
    if payoffs[br] != value {
        return Err(violation(format!(
            "best response {br} earns {} but the best-response value is {value}",
            payoffs[br]
        )));
    }
    if let Some((i, p)) = payoffs.iter().enumerate().find(|&(_, &p)| p > value) {
        return Err(violation(format!(
            "strategy {i} earns {p} > best-response value {value}"
        )));
    }
    if let Some(i) = payoffs[..br].iter().position(|&p| p == value) {
        return Err(violation(format!(
            "strategy {i} ties the best response {br} at a lower index"
        )));
    }
    let pure = MixedStrategy::pure(game.dim(), br)?;
    let u = expected_utility(game, &pure, opponent)?;
    if (u - value).abs() > 1e-12 {
        return Err(violation(format!(
            "u(br, opponent) = {u} differs from {value}"
        )));
    }
    Ok(())
}

/// The reported residual is the exploitability of the reported weights,
/// it is nonnegative, and an early stop only happens at the target.
pub fn check_fictitious_play(
    game: &PayoffMatrix,
    budget: SolverBudget,
    start: usize,
) -> Result<()> {
    let meta = fictitious_play_from(game, budget, start)?;
    let weights = meta.weights.probs();
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(violation(format!("negative weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(violation(format!("weights sum to {sum}")));
    }
    let recomputed = meta.recompute_residual(game)?;
    if recomputed != meta.residual {
        return Err(violation(format!(
            "residual {} but recomputed {recomputed}",
            meta.residual
        )));
    }
    if meta.residual < 0.0 {
        return Err(violation(format!("negative residual {}", meta.residual)));
    }
    if meta.iterations_used == 0 || meta.iterations_used > budget.max_iters {
        return Err(violation(format!(
            "{} iterations used with a budget of {}",
            meta.iterations_used, budget.max_iters
        )));
    }
    if meta.iterations_used < budget.max_iters
        && meta.residual > budget.target_residual + RESIDUAL_ROUNDING_SLACK
    {
        return Err(violation(format!(
            "stopped after {} iterations at residual {} above target {}",
            meta.iterations_used, meta.residual, budget.target_residual
        )));
    }
    Ok(())
}

/// One mutation of a population.
#[derive(Debug, Clone)]
pub enum PopulationOp {
    AddActive(MixedStrategy),
    /// Replace the snapshot of the `k`-th active policy (modulo the count).
    UpdateActive(usize, MixedStrategy),
    PromoteLowest,
    AddFixed(MixedStrategy),
}

/// Applies `ops` in order. Operations the population refuses must leave it
/// untouched; after every operation the ordering and table invariants must
/// hold. Returns how many operations were accepted.
pub fn check_population_ops(game: Arc<PayoffMatrix>, ops: &[PopulationOp]) -> Result<usize> {
    let mut population = Population::new(game, Default::default())?;
    let mut accepted = 0;
    for (k, op) in ops.iter().enumerate() {
        let before = population.to_checkpoint();
        let outcome = match op {
            PopulationOp::AddActive(s) => population.add_active_policy(s.clone()).map(drop),
            PopulationOp::UpdateActive(pick, s) => match population.active_count() {
                0 => Err(Error::State("no active policy".into())),
                active => {
                    let index = population.fixed_count() + pick % active;
                    let level = population.policies()[index].level;
                    population.update_active_policy(level, Arc::new(s.clone()))
                }
            },
            PopulationOp::PromoteLowest => population.promote_lowest_active().map(drop),
            PopulationOp::AddFixed(s) => population.add_fixed_policy(s.clone()).map(drop),
        };
        match outcome {
            Ok(()) => accepted += 1,
            Err(_) if population.to_checkpoint() == before => {}
            Err(e) => {
                return Err(violation(format!(
                    "operation {k} failed ({e}) but changed the population"
                )));
            }
        }
        population
            .check_invariants()
            .map_err(|e| violation(format!("after operation {k} ({op:?}): {e}")))?;
    }
    Ok(accepted)
}
