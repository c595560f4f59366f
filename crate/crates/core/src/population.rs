//! The policy population: fixed policies, the active pipeline above them,
//! and the empirical payoff table between fixed policies.
//!
//! Policies are kept in level order. Fixed policies come first and occupy
//! table rows `0..fixed_count()`; active policies follow with consecutive
//! levels. Only the lowest active policy can be promoted, so the ordering is
//! preserved by construction.
//!
//! The table stores fixed-vs-fixed payoffs only. Payoffs involving active
//! policies are computed on demand from the current snapshots, since active
//! strategies keep changing.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{dot, GameOrigin, MixedStrategy, PayoffMatrix};
use crate::meta_solver::{fictitious_play_from, MetaNash, SolverBudget};

const CHECKPOINT_HEADER: &str = "psro-population v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyStatus {
    Fixed,
    Active,
}

/// How the single starting policy of a population is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialPolicy {
    /// Uniform mixture over all pure strategies.
    #[default]
    Uniform,
    /// A pure strategy drawn from a seeded generator.
    RandomPure { seed: u64 },
    /// A specific pure strategy.
    Pure { index: usize },
}

impl InitialPolicy {
    pub fn strategy(self, dim: usize) -> Result<MixedStrategy> {
        match self {
            InitialPolicy::Uniform => MixedStrategy::uniform(dim),
            InitialPolicy::RandomPure { seed } => {
                let index = ChaCha8Rng::seed_from_u64(seed).gen_range(0..dim);
                MixedStrategy::pure(dim, index)
            }
            InitialPolicy::Pure { index } => MixedStrategy::pure(dim, index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry {
    pub strategy: Arc<MixedStrategy>,
    pub status: PolicyStatus,
    pub level: u32,
}

/// Antisymmetric table of expected utilities between fixed policies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalPayoffTable {
    size: usize,
    values: Vec<f64>,
}

impl EmpiricalPayoffTable {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.size.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Grows the table by one policy given its payoffs against the existing
    /// ones (`payoffs[i] = u(new, i)`).
    fn push(&mut self, payoffs: &[f64]) {
        debug_assert_eq!(payoffs.len(), self.size);
        let old = self.size;
        let size = old + 1;
        let mut values = vec![0.0; size * size];
        for i in 0..old {
            values[i * size..i * size + old].copy_from_slice(&self.values[i * old..(i + 1) * old]);
            values[i * size + old] = -payoffs[i];
            values[old * size + i] = payoffs[i];
        }
        self.size = size;
        self.values = values;
    }
}

/// A meta-Nash over a subset of the population, aligned with `members`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedMeta {
    pub members: Vec<usize>,
    pub meta: MetaNash,
}

#[derive(Debug, Clone)]
pub struct Population {
    game: Arc<PayoffMatrix>,
    policies: Vec<PolicyEntry>,
    table: EmpiricalPayoffTable,
}

/// Empirical payoff matrix between arbitrary strategies: `u(a, b) = aᵀ G b`.
///
/// Only the upper triangle is computed; the lower one is its negation so the
/// result is exactly antisymmetric.
pub fn empirical_matrix(
    game: &PayoffMatrix,
    strategies: &[&MixedStrategy],
) -> Result<PayoffMatrix> {
    if strategies.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    let responses = strategies
        .iter()
        .map(|s| game.payoffs_against(s))
        .collect::<Result<Vec<_>>>()?;
    let k = strategies.len();
    let mut entries = vec![0.0; k * k];
    for a in 0..k {
        for b in a + 1..k {
            let u = dot(strategies[a].probs(), &responses[b]);
            entries[a * k + b] = u;
            entries[b * k + a] = -u;
        }
    }
    Ok(PayoffMatrix::from_flat_unchecked(k, entries))
}

/// `Σ_k weights[k] · strategies[k]`.
pub fn mixture<S: AsRef<MixedStrategy>>(
    strategies: &[S],
    weights: &MixedStrategy,
) -> Result<MixedStrategy> {
    if strategies.len() != weights.len() {
        return Err(Error::Shape {
            expected: strategies.len(),
            found: weights.len(),
        });
    }
    let dim = strategies[0].as_ref().len();
    let mut probs = vec![0.0; dim];
    for (s, &w) in strategies.iter().zip(weights.probs()) {
        let s = s.as_ref();
        if s.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                found: s.len(),
            });
        }
        if w == 0.0 {
            continue;
        }
        for (p, &q) in probs.iter_mut().zip(s.probs()) {
            *p += w * q;
        }
    }
    MixedStrategy::new(probs)
}

impl Population {
    /// One fixed policy at level 0; the table is the 1×1 zero matrix.
    pub fn new(game: Arc<PayoffMatrix>, initial: InitialPolicy) -> Result<Self> {
        let strategy = initial.strategy(game.dim())?;
        Ok(Self {
            game,
            policies: vec![PolicyEntry {
                strategy: Arc::new(strategy),
                status: PolicyStatus::Fixed,
                level: 0,
            }],
            table: EmpiricalPayoffTable {
                size: 1,
                values: vec![0.0],
            },
        })
    }

    pub fn game(&self) -> &Arc<PayoffMatrix> {
        &self.game
    }

    pub fn table(&self) -> &EmpiricalPayoffTable {
        &self.table
    }

    pub fn policies(&self) -> &[PolicyEntry] {
        &self.policies
    }

    pub fn strategy(&self, index: usize) -> &Arc<MixedStrategy> {
        &self.policies[index].strategy
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn fixed_count(&self) -> usize {
        self.table.size
    }

    pub fn active_count(&self) -> usize {
        self.policies.len() - self.fixed_count()
    }

    pub fn fixed_strategies(&self) -> impl Iterator<Item = &Arc<MixedStrategy>> {
        self.policies[..self.fixed_count()]
            .iter()
            .map(|p| &p.strategy)
    }

    pub fn lowest_active_level(&self) -> Option<u32> {
        self.policies.get(self.fixed_count()).map(|p| p.level)
    }

    pub fn highest_level(&self) -> u32 {
        self.policies.last().map_or(0, |p| p.level)
    }

    /// Index of the policy at `level`, if any.
    pub fn index_of_level(&self, level: u32) -> Option<usize> {
        self.policies.binary_search_by_key(&level, |p| p.level).ok()
    }

    fn check_strategy(&self, policy: &MixedStrategy) -> Result<()> {
        if policy.len() != self.game.dim() {
            return Err(Error::Shape {
                expected: self.game.dim(),
                found: policy.len(),
            });
        }
        Ok(())
    }

    /// Appends an active policy one level above everything else.
    pub fn add_active_policy(&mut self, policy: MixedStrategy) -> Result<u32> {
        self.check_strategy(&policy)?;
        let level = self.highest_level() + 1;
        self.policies.push(PolicyEntry {
            strategy: Arc::new(policy),
            status: PolicyStatus::Active,
            level,
        });
        Ok(level)
    }

    /// Publishes a new snapshot for the active policy at `level`.
    pub fn update_active_policy(&mut self, level: u32, policy: Arc<MixedStrategy>) -> Result<()> {
        self.check_strategy(&policy)?;
        let index = self
            .index_of_level(level)
            .ok_or_else(|| Error::State(format!("no policy at level {level}")))?;
        let entry = &mut self.policies[index];
        if entry.status != PolicyStatus::Active {
            return Err(Error::State(format!("policy at level {level} is fixed")));
        }
        entry.strategy = policy;
        Ok(())
    }

    /// Freezes the lowest active policy and fills in its table row and
    /// column against every fixed policy. Returns its index.
    pub fn promote_lowest_active(&mut self) -> Result<usize> {
        let index = self.fixed_count();
        let entry = self
            .policies
            .get(index)
            .ok_or_else(|| Error::State("no active policy to promote".into()))?;
        let response = self.game.payoffs_against(&entry.strategy)?;
        // u(new, i) = -u(i, new) = -(p_i · G p_new)
        let payoffs: Vec<f64> = self.policies[..index]
            .iter()
            .map(|p| -dot(p.strategy.probs(), &response))
            .collect();
        self.table.push(&payoffs);
        self.policies[index].status = PolicyStatus::Fixed;
        Ok(index)
    }

    /// Adds a policy directly to the fixed set. Only allowed while no active
    /// policies exist, so the fixed-below-active ordering is kept.
    pub fn add_fixed_policy(&mut self, policy: MixedStrategy) -> Result<usize> {
        if self.active_count() > 0 {
            return Err(Error::State(
                "cannot add a fixed policy above active policies".into(),
            ));
        }
        self.add_active_policy(policy)?;
        self.promote_lowest_active()
    }

    /// Indices of all policies with a level strictly below `level`.
    pub fn indices_below(&self, level: u32) -> Vec<usize> {
        (0..self.policies.len())
            .take_while(|&i| self.policies[i].level < level)
            .collect()
    }

    /// Empirical payoff matrix over population members `indices` followed by
    /// `extras` (strategies that are not part of the population).
    pub fn payoff_matrix_with(
        &self,
        indices: &[usize],
        extras: &[&MixedStrategy],
    ) -> Result<PayoffMatrix> {
        let fixed = self.fixed_count();
        let mut strategies: Vec<&MixedStrategy> = Vec::with_capacity(indices.len() + extras.len());
        for &i in indices {
            let p = self.policies.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                dim: self.policies.len(),
            })?;
            strategies.push(&p.strategy);
        }
        strategies.extend_from_slice(extras);
        let k = strategies.len();
        if k == 0 {
            return Err(Error::InvalidDimension(0));
        }
        // Best responses are only needed for columns that are not covered by
        // the stored fixed-vs-fixed table.
        let responses: Vec<Option<Vec<f64>>> = (0..k)
            .map(|b| {
                let stored = b < indices.len() && indices[b] < fixed;
                if stored {
                    Ok(None)
                } else {
                    self.game.payoffs_against(strategies[b]).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let mut entries = vec![0.0; k * k];
        for a in 0..k {
            for b in a + 1..k {
                let u = match (&responses[a], &responses[b]) {
                    (_, Some(gb)) => dot(strategies[a].probs(), gb),
                    (Some(ga), None) => -dot(strategies[b].probs(), ga),
                    (None, None) => self.table.get(indices[a], indices[b]),
                };
                entries[a * k + b] = u;
                entries[b * k + a] = -u;
            }
        }
        Ok(PayoffMatrix::from_flat_unchecked(k, entries))
    }

    pub fn payoff_matrix(&self, indices: &[usize]) -> Result<PayoffMatrix> {
        self.payoff_matrix_with(indices, &[])
    }

    /// Fictitious-play meta-Nash over the listed members, starting from the
    /// member at position `start`.
    pub fn meta_nash_over(
        &self,
        members: Vec<usize>,
        budget: SolverBudget,
        start: usize,
    ) -> Result<RestrictedMeta> {
        if members.is_empty() {
            return Err(Error::State(
                "meta-Nash over an empty set of policies".into(),
            ));
        }
        let matrix = self.payoff_matrix(&members)?;
        let meta = fictitious_play_from(&matrix, budget, start)?;
        Ok(RestrictedMeta { members, meta })
    }

    /// Meta-Nash over every policy (fixed or active) below `level`.
    pub fn meta_nash_below(&self, level: u32, budget: SolverBudget) -> Result<RestrictedMeta> {
        self.meta_nash_over(self.indices_below(level), budget, 0)
    }

    /// Meta-Nash over fixed policies only.
    pub fn meta_nash_fixed(&self, budget: SolverBudget) -> Result<RestrictedMeta> {
        self.meta_nash_over((0..self.fixed_count()).collect(), budget, 0)
    }

    /// Collapses a meta-distribution over members into one base-game strategy.
    pub fn mixture_strategy(&self, meta: &RestrictedMeta) -> Result<MixedStrategy> {
        let strategies =
            meta.members
                .iter()
                .map(|&i| {
                    self.policies.get(i).map(|p| p.strategy.as_ref()).ok_or(
                        Error::IndexOutOfRange {
                            index: i,
                            dim: self.policies.len(),
                        },
                    )
                })
                .collect::<Result<Vec<_>>>()?;
        mixture(&strategies, &meta.meta.weights)
    }

    /// Verifies the ordering and table invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let fixed = self.fixed_count();
        for (i, p) in self.policies.iter().enumerate() {
            self.check_strategy(&p.strategy)?;
            let expected = if i < fixed {
                PolicyStatus::Fixed
            } else {
                PolicyStatus::Active
            };
            if p.status != expected {
                return Err(Error::State(format!(
                    "policy {i} has status {:?}",
                    p.status
                )));
            }
            if i > 0 && p.level <= self.policies[i - 1].level {
                return Err(Error::State(format!("levels not increasing at policy {i}")));
            }
            if i > fixed && p.level != self.policies[i - 1].level + 1 {
                return Err(Error::State(format!(
                    "active levels not consecutive at policy {i}"
                )));
            }
        }
        for a in 0..fixed {
            for b in 0..fixed {
                let stored = self.table.get(a, b);
                if stored != -self.table.get(b, a) {
                    return Err(Error::State(format!(
                        "table not antisymmetric at ({a}, {b})"
                    )));
                }
                let exact =
                    crate::game::expected_utility(&self.game, self.strategy(a), self.strategy(b))?;
                if (stored - exact).abs() > 1e-12 {
                    return Err(Error::State(format!("stale table entry ({a}, {b})")));
                }
            }
        }
        Ok(())
    }

    /// Serializes to the versioned checkpoint format: a header line followed
    /// by a JSON document.
    pub fn to_checkpoint(&self) -> String {
        let doc = CheckpointDoc {
            dim: self.game.dim(),
            game: self.game.origin(),
            policies: self
                .policies
                .iter()
                .map(|p| CheckpointPolicy {
                    status: p.status,
                    level: p.level,
                    strategy: p.strategy.as_ref().clone(),
                })
                .collect(),
        };
        let body = serde_json::to_string_pretty(&doc).expect("checkpoint serializes");
        format!("{CHECKPOINT_HEADER}\n{body}\n")
    }

    /// Restores a checkpoint against `game`, recomputing the payoff table.
    pub fn from_checkpoint(game: Arc<PayoffMatrix>, text: &str) -> Result<Self> {
        let (header, body) = text.split_once('\n').unwrap_or((text, ""));
        if header.trim_end() != CHECKPOINT_HEADER {
            return Err(Error::Checkpoint(format!("unsupported header {header:?}")));
        }
        let doc: CheckpointDoc =
            serde_json::from_str(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if doc.dim != game.dim() || doc.game != game.origin() {
            return Err(Error::Checkpoint(format!(
                "checkpoint is for {:?} (dim {}), not {:?} (dim {})",
                doc.game,
                doc.dim,
                game.origin(),
                game.dim()
            )));
        }
        let mut policies = doc.policies.into_iter();
        let first = policies
            .next()
            .ok_or_else(|| Error::Checkpoint("no policies".into()))?;
        if first.status != PolicyStatus::Fixed {
            return Err(Error::Checkpoint("first policy must be fixed".into()));
        }
        let mut population = Self::new(game, InitialPolicy::Uniform)?;
        population.policies[0].strategy = Arc::new(first.strategy);
        population.policies[0].level = first.level;
        for p in policies {
            if p.level <= population.highest_level() {
                return Err(Error::Checkpoint(format!("level {} out of order", p.level)));
            }
            population.check_strategy(&p.strategy)?;
            let status = p.status;
            population.policies.push(PolicyEntry {
                strategy: Arc::new(p.strategy),
                status: PolicyStatus::Active,
                level: p.level,
            });
            if status == PolicyStatus::Fixed {
                if population.fixed_count() + 1 != population.policies.len() {
                    return Err(Error::Checkpoint("fixed policy above an active one".into()));
                }
                population.promote_lowest_active()?;
            }
        }
        population
            .check_invariants()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(population)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    dim: usize,
    game: GameOrigin,
    policies: Vec<CheckpointPolicy>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointPolicy {
    status: PolicyStatus,
    level: u32,
    strategy: MixedStrategy,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{canonical_game, expected_utility, generate_random_game, Fixture};

    fn pop(fixture: Fixture) -> Population {
        Population::new(Arc::new(canonical_game(fixture)), InitialPolicy::Uniform).unwrap()
    }

    #[test]
    fn init_is_single_uniform_fixed_policy() {
        let p = pop(Fixture::Rps);
        assert_eq!(p.len(), 1);
        assert_eq!(p.fixed_count(), 1);
        assert_eq!(p.strategy(0).probs(), &[1.0 / 3.0; 3]);
        assert_eq!(
            pop(Fixture::RectifiedCounterexample).table().to_rows(),
            vec![vec![0.0]]
        );
    }

    #[test]
    fn first_active_level_is_one() {
        let game = Arc::new(generate_random_game(60, 3).unwrap());
        let mut p = Population::new(game, InitialPolicy::Uniform).unwrap();
        assert_eq!(
            p.add_active_policy(MixedStrategy::uniform(60).unwrap())
                .unwrap(),
            1
        );
        assert_eq!(p.lowest_active_level(), Some(1));
        assert_eq!(
            p.add_active_policy(MixedStrategy::pure(60, 4).unwrap())
                .unwrap(),
            2
        );
        p.check_invariants().unwrap();
    }

    #[test]
    fn initial_policy_variants() {
        let g = Arc::new(canonical_game(Fixture::RectifiedCounterexample));
        let rock = Population::new(g.clone(), InitialPolicy::Pure { index: 0 }).unwrap();
        assert_eq!(rock.strategy(0).as_pure(), Some(0));
        let a = Population::new(g.clone(), InitialPolicy::RandomPure { seed: 9 }).unwrap();
        let b = Population::new(g.clone(), InitialPolicy::RandomPure { seed: 9 }).unwrap();
        assert!(a.strategy(0).as_pure().is_some());
        assert_eq!(a.strategy(0), b.strategy(0));
        assert!(Population::new(g, InitialPolicy::Pure { index: 4 }).is_err());
    }

    #[test]
    fn add_rejects_wrong_shape() {
        let mut p = pop(Fixture::Rps);
        assert_eq!(
            p.add_active_policy(MixedStrategy::uniform(4).unwrap()),
            Err(Error::Shape {
                expected: 3,
                found: 4
            })
        );
    }

    #[test]
    fn promote_fills_table() {
        let mut p = pop(Fixture::Rps);
        p.add_active_policy(MixedStrategy::pure(3, 1).unwrap())
            .unwrap();
        assert_eq!(p.promote_lowest_active().unwrap(), 1);
        assert_eq!(p.fixed_count(), 2);
        let exact = expected_utility(p.game(), p.strategy(0), p.strategy(1)).unwrap();
        assert_eq!(p.table().get(0, 1), exact);
        assert_eq!(p.table().get(1, 0), -exact);
        p.check_invariants().unwrap();
    }

    #[test]
    fn promote_moves_to_next_lowest() {
        let mut p = pop(Fixture::Rps);
        p.add_active_policy(MixedStrategy::pure(3, 0).unwrap())
            .unwrap();
        p.add_active_policy(MixedStrategy::pure(3, 1).unwrap())
            .unwrap();
        p.promote_lowest_active().unwrap();
        assert_eq!(p.lowest_active_level(), Some(2));
        p.promote_lowest_active().unwrap();
        assert_eq!(p.lowest_active_level(), None);
        assert!(matches!(p.promote_lowest_active(), Err(Error::State(_))));
    }

    #[test]
    fn add_fixed_requires_no_active() {
        let mut p = pop(Fixture::Rps);
        assert_eq!(
            p.add_fixed_policy(MixedStrategy::pure(3, 2).unwrap())
                .unwrap(),
            1
        );
        p.add_active_policy(MixedStrategy::pure(3, 1).unwrap())
            .unwrap();
        assert!(p
            .add_fixed_policy(MixedStrategy::pure(3, 0).unwrap())
            .is_err());
    }

    #[test]
    fn meta_nash_below_fresh_population() {
        let p = pop(Fixture::Rps);
        let m = p.meta_nash_below(1, SolverBudget::default()).unwrap();
        assert_eq!(m.members, vec![0]);
        assert_eq!(m.meta.weights.probs(), &[1.0]);
        assert!(matches!(
            p.meta_nash_below(0, SolverBudget::default()),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn meta_nash_below_rock_paper_scissors() {
        let g = Arc::new(canonical_game(Fixture::RectifiedCounterexample));
        let mut p = Population::new(g, InitialPolicy::Pure { index: 0 }).unwrap();
        p.add_fixed_policy(MixedStrategy::pure(4, 1).unwrap())
            .unwrap();
        p.add_fixed_policy(MixedStrategy::pure(4, 2).unwrap())
            .unwrap();
        let level = p
            .add_active_policy(MixedStrategy::pure(4, 3).unwrap())
            .unwrap();
        assert_eq!(level, 3);
        let m = p
            .meta_nash_below(level, SolverBudget::new(100_000, 1e-4))
            .unwrap();
        assert_eq!(m.members, vec![0, 1, 2]);
        for &w in m.meta.weights.probs() {
            assert!((w - 1.0 / 3.0).abs() < 0.02, "{:?}", m.meta.weights);
        }
    }

    #[test]
    fn lowest_active_target_ignores_active_policies() {
        let game = Arc::new(generate_random_game(12, 5).unwrap());
        let mut p = Population::new(game, InitialPolicy::Uniform).unwrap();
        p.add_fixed_policy(MixedStrategy::pure(12, 3).unwrap())
            .unwrap();
        let lowest = p
            .add_active_policy(MixedStrategy::pure(12, 7).unwrap())
            .unwrap();
        let upper = p
            .add_active_policy(MixedStrategy::pure(12, 1).unwrap())
            .unwrap();
        let before = p.meta_nash_below(lowest, SolverBudget::default()).unwrap();
        assert_eq!(before.members, vec![0, 1]);
        p.update_active_policy(lowest, Arc::new(MixedStrategy::pure(12, 9).unwrap()))
            .unwrap();
        p.update_active_policy(upper, Arc::new(MixedStrategy::uniform(12).unwrap()))
            .unwrap();
        let after = p.meta_nash_below(lowest, SolverBudget::default()).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn update_rejects_fixed_and_missing() {
        let mut p = pop(Fixture::Rps);
        let s = Arc::new(MixedStrategy::pure(3, 0).unwrap());
        assert!(p.update_active_policy(0, s.clone()).is_err());
        assert!(p.update_active_policy(5, s).is_err());
    }

    #[test]
    fn mixture_examples() {
        let p = pop(Fixture::Rps);
        let m = p.meta_nash_fixed(SolverBudget::default()).unwrap();
        assert_eq!(p.mixture_strategy(&m).unwrap().probs(), &[1.0 / 3.0; 3]);
        let rock = MixedStrategy::pure(3, 0).unwrap();
        let scissors = MixedStrategy::pure(3, 2).unwrap();
        let half = MixedStrategy::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(
            mixture(&[rock, scissors], &half).unwrap().probs(),
            &[0.5, 0.0, 0.5]
        );
        let bad = MixedStrategy::pure(1, 0).unwrap();
        assert!(mixture(
            &[
                MixedStrategy::uniform(3).unwrap(),
                MixedStrategy::uniform(3).unwrap()
            ],
            &bad
        )
        .is_err());
    }

    #[test]
    fn payoff_matrix_mixes_table_and_snapshots() {
        let game = Arc::new(generate_random_game(9, 1).unwrap());
        let mut p = Population::new(game.clone(), InitialPolicy::Uniform).unwrap();
        p.add_fixed_policy(MixedStrategy::pure(9, 2).unwrap())
            .unwrap();
        p.add_active_policy(MixedStrategy::pure(9, 5).unwrap())
            .unwrap();
        let extra = MixedStrategy::pure(9, 8).unwrap();
        let m = p.payoff_matrix_with(&[0, 1, 2], &[&extra]).unwrap();
        let all: Vec<&MixedStrategy> = vec![p.strategy(0), p.strategy(1), p.strategy(2), &extra];
        let reference = empirical_matrix(&game, &all).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!((m.get(a, b) - reference.get(a, b)).abs() < 1e-15);
                assert_eq!(m.get(a, b), -m.get(b, a));
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let game = Arc::new(generate_random_game(7, 21).unwrap());
        let mut p = Population::new(game.clone(), InitialPolicy::Uniform).unwrap();
        p.add_fixed_policy(MixedStrategy::pure(7, 3).unwrap())
            .unwrap();
        p.add_active_policy(MixedStrategy::new(vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let text = p.to_checkpoint();
        assert!(text.starts_with("psro-population v1\n"));
        let q = Population::from_checkpoint(game, &text).unwrap();
        assert_eq!(q.policies(), p.policies());
        assert_eq!(q.table(), p.table());

        let other = Arc::new(generate_random_game(7, 22).unwrap());
        assert!(Population::from_checkpoint(other, &text).is_err());
        let bumped = text.replace("v1", "v9");
        assert!(Population::from_checkpoint(p.game().clone(), &bumped).is_err());
    }
}
