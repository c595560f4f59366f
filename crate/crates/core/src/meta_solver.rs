//! Meta-game solving: fictitious play on restricted games, support
//! extraction, and an exhaustive checker for the support-coverage theorem
//! (some Nash-support strategy missing from a population never loses to the
//! population's meta-Nash).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{argmax, best_response_value, MixedStrategy, PayoffMatrix};

/// Iteration budget and early-stopping residual for fictitious play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBudget {
    pub max_iters: usize,
    pub target_residual: f64,
}

impl Default for SolverBudget {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            target_residual: 1e-3,
        }
    }
}

impl SolverBudget {
    pub fn new(max_iters: usize, target_residual: f64) -> Self {
        Self {
            max_iters,
            target_residual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("solver max_iters must be at least 1".into()));
        }
        if !(self.target_residual >= 0.0) {
            return Err(Error::Config(
                "solver target_residual must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Approximate Nash equilibrium of a (restricted) symmetric game.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaNash {
    pub weights: MixedStrategy,
    /// Exploitability of `weights` inside the game it was solved on.
    pub residual: f64,
    /// Number of pure strategies averaged, including the starting one.
    pub iterations_used: usize,
}

impl MetaNash {
    /// Recomputes the residual from scratch; matches `residual` up to rounding.
    pub fn recompute_residual(&self, game: &PayoffMatrix) -> Result<f64> {
        best_response_value(game, &self.weights)
    }
}

/// Fictitious play from pure strategy 0.
pub fn fictitious_play(
    game: &PayoffMatrix,
    max_iters: usize,
    target_residual: f64,
) -> Result<MetaNash> {
    fictitious_play_from(game, SolverBudget::new(max_iters, target_residual), 0)
}

/// Fictitious play seeded with the pure strategy `start`.
///
/// The running average `σ̄_t` is kept as integer visit counts, and `G · σ̄_t`
/// as a running sum of columns, so each iteration is linear in the game
/// dimension. Since `G` is antisymmetric, column `k` is the negated row `k`.
pub fn fictitious_play_from(
    game: &PayoffMatrix,
    budget: SolverBudget,
    start: usize,
) -> Result<MetaNash> {
    budget.validate()?;
    let n = game.dim();
    if start >= n {
        return Err(Error::IndexOutOfRange {
            index: start,
            dim: n,
        });
    }
    let mut counts = vec![0u64; n];
    let mut column_sum: Vec<f64> = game.row(start).iter().map(|v| -v).collect();
    counts[start] = 1;
    let mut t = 1usize;
    loop {
        let (br, best) = argmax(&column_sum);
        if best / t as f64 <= budget.target_residual || t >= budget.max_iters {
            break;
        }
        counts[br] += 1;
        for (acc, g) in column_sum.iter_mut().zip(game.row(br)) {
            *acc -= g;
        }
        t += 1;
    }
    let total = t as f64;
    let weights =
        MixedStrategy::from_vec_unchecked(counts.iter().map(|&c| c as f64 / total).collect());
    let residual = best_response_value(game, &weights)?;
    Ok(MetaNash {
        weights,
        residual,
        iterations_used: t,
    })
}

/// Masses tried, largest first, when guessing the support to refine on.
const REFINE_SUPPORT_CUTOFFS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// An equilibrium is accepted from refinement only if its exploitability
/// is below this.
const REFINE_ACCEPT_RESIDUAL: f64 = 1e-9;

/// Sharpens an approximate equilibrium by solving for the exact one on its
/// apparent support.
///
/// For a guessed support `S`, the equilibrium of a symmetric zero-sum game
/// equalizes every row of `S` at the game value 0: `G_SS x = v·1`,
/// `1ᵀx = 1`. The solution is accepted only if it is a probability vector
/// whose exploitability in the whole game is below 1e-9; otherwise the next
/// (smaller) mass cutoff is tried. Returns `None` when no guess verifies.
pub fn refine_on_support(game: &PayoffMatrix, approx: &MetaNash) -> Option<MetaNash> {
    let n = game.dim();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for cutoff in REFINE_SUPPORT_CUTOFFS {
        let support: Vec<usize> = (0..n)
            .filter(|&i| approx.weights.probs()[i] > cutoff)
            .collect();
        if !support.is_empty() && !candidates.contains(&support) {
            candidates.push(support);
        }
    }
    // Slowly converging iterates can still carry real mass on a strategy
    // that leaves the support in the limit.
    if let Some(widest) = candidates.first().cloned() {
        for skip in 0..widest.len() {
            let mut fewer = widest.clone();
            fewer.remove(skip);
            if !fewer.is_empty() && !candidates.contains(&fewer) {
                candidates.push(fewer);
            }
        }
    }
    candidates
        .iter()
        .filter_map(|support| equalizer_on(game, support))
        .filter(|(_, residual)| *residual <= REFINE_ACCEPT_RESIDUAL)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(weights, residual)| MetaNash {
            weights,
            residual,
            iterations_used: approx.iterations_used,
        })
}

/// Solves `G_SS x = v·1, 1ᵀx = 1` and returns the embedded strategy with
/// its exploitability, if `x` is a probability vector.
fn equalizer_on(game: &PayoffMatrix, support: &[usize]) -> Option<(MixedStrategy, f64)> {
    let s = support.len();
    let system = nalgebra::DMatrix::from_fn(s + 1, s + 1, |r, c| match (r < s, c < s) {
        (true, true) => game.get(support[r], support[c]),
        (true, false) => -1.0,
        (false, true) => 1.0,
        (false, false) => 0.0,
    });
    let mut rhs = nalgebra::DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let solution = system.lu().solve(&rhs)?;
    if (0..s).any(|i| !(solution[i] >= -1e-12)) {
        return None;
    }
    let mut probs = vec![0.0; game.dim()];
    for (k, &i) in support.iter().enumerate() {
        probs[i] = solution[k].max(0.0);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let weights = MixedStrategy::new(probs).ok()?;
    let residual = best_response_value(game, &weights).ok()?;
    Some((weights, residual))
}

/// Exact equilibrium by trying every support, smallest first. Only used on
/// games no larger than [`THEOREM_MAX_DIM`].
fn enumerate_supports(game: &PayoffMatrix) -> Option<(MixedStrategy, f64)> {
    let n = game.dim();
    if n > THEOREM_MAX_DIM {
        return None;
    }
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks.into_iter().find_map(|mask| {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        equalizer_on(game, &support).filter(|(_, residual)| *residual <= REFINE_ACCEPT_RESIDUAL)
    })
}

/// Equilibrium by linear programming: maximize `v` subject to
/// `Σ_i x_i G_ij ≥ v` for every column `j`, `Σ x = 1`, `x ≥ 0`. The value of
/// a symmetric zero-sum game is 0, so the optimum has `v = 0` up to solver
/// tolerance. The LP solution is then polished by the exact equalizer on its
/// own support, which removes the solver's round-off when it applies.
fn lp_equilibrium(game: &PayoffMatrix) -> Option<(MixedStrategy, f64)> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    let n = game.dim();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..n).map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
    let v = problem.add_var(1.0, (-1.0, 1.0));
    for j in 0..n {
        let terms = (0..n)
            .filter(|&i| game.get(i, j) != 0.0)
            .map(|i| (xs[i], game.get(i, j)))
            .chain(std::iter::once((v, -1.0)));
        problem.add_constraint(terms, ComparisonOp::Ge, 0.0);
    }
    problem.add_constraint(xs.iter().map(|&x| (x, 1.0)), ComparisonOp::Eq, 1.0);
    let solution = problem.solve().ok()?.into_solution().ok()?;
    let mut probs: Vec<f64> = xs.iter().map(|&x| solution.var_value(x).max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    probs.iter_mut().for_each(|p| *p /= total);
    let support: Vec<usize> = (0..n).filter(|&i| probs[i] > 1e-9).collect();
    let weights = MixedStrategy::new(probs).ok()?;
    let residual = best_response_value(game, &weights).ok()?;
    match equalizer_on(game, &support) {
        Some((polished, r)) if r < residual => Some((polished, r)),
        _ => Some((weights, residual)),
    }
}

/// Fictitious play sharpened into an exact equilibrium when possible: first
/// [`refine_on_support`], then a linear program, then (for small games)
/// support enumeration. Returns the candidate with the smallest residual if
/// none of them verifies.
pub fn solve_precise(game: &PayoffMatrix, budget: SolverBudget) -> Result<MetaNash> {
    solve_precise_from(game, budget, 0)
}

/// [`solve_precise`] with fictitious play started from pure strategy `start`.
pub fn solve_precise_from(
    game: &PayoffMatrix,
    budget: SolverBudget,
    start: usize,
) -> Result<MetaNash> {
    let approx = fictitious_play_from(game, budget, start)?;
    if let Some(refined) = refine_on_support(game, &approx) {
        return Ok(refined);
    }
    let iterations_used = approx.iterations_used;
    let exact = |(weights, residual): (MixedStrategy, f64)| MetaNash {
        weights,
        residual,
        iterations_used,
    };
    let mut best = approx;
    if let Some(lp) = lp_equilibrium(game) {
        if lp.1 <= REFINE_ACCEPT_RESIDUAL {
            return Ok(exact(lp));
        }
        if lp.1 < best.residual {
            best = exact(lp);
        }
    }
    if let Some(found) = enumerate_supports(game) {
        return Ok(exact(found));
    }
    Ok(best)
}

/// Submatrix over `indices` (rows and columns in the listed order).
pub fn restricted_game(game: &PayoffMatrix, indices: &[usize]) -> Result<PayoffMatrix> {
    if indices.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    let mut seen = vec![false; game.dim()];
    for &i in indices {
        if i >= game.dim() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: game.dim(),
            });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    let k = indices.len();
    let mut entries = Vec::with_capacity(k * k);
    for &i in indices {
        let row = game.row(i);
        entries.extend(indices.iter().map(|&j| row[j]));
    }
    Ok(PayoffMatrix::from_flat_unchecked(k, entries))
}

/// Pure strategies carrying more than `threshold` mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pub indices: BTreeSet<usize>,
    pub threshold: f64,
}

impl SupportSet {
    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn extract_support(strategy: &MixedStrategy, threshold: f64) -> SupportSet {
    debug_assert!((0.0..1.0).contains(&threshold));
    SupportSet {
        indices: strategy
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > threshold)
            .map(|(i, _)| i)
            .collect(),
        threshold,
    }
}

/// Largest game the theorem checker will enumerate subpopulations of.
pub const THEOREM_MAX_DIM: usize = 12;

/// Settings for [`check_theorem1_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremCheckConfig {
    pub support_threshold: f64,
    pub tolerance: f64,
    /// Budget for the full-game equilibrium.
    pub full_game: SolverBudget,
    /// A full-game residual above this leaves the game unresolved.
    pub resolve_residual: f64,
    /// Budget for each restricted meta-Nash.
    pub subgame: SolverBudget,
    /// Sharpen fictitious-play solutions with [`refine_on_support`].
    pub refine: bool,
}

impl Default for TheoremCheckConfig {
    fn default() -> Self {
        Self {
            support_threshold: 1e-6,
            tolerance: 1e-4,
            full_game: SolverBudget::new(200_000, 1e-6),
            resolve_residual: 1e-3,
            subgame: SolverBudget::new(20_000, 1e-6),
            refine: true,
        }
    }
}

/// A subpopulation for which every uncovered support strategy loses to the
/// restricted meta-Nash by more than the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFailure {
    pub subpopulation: Vec<usize>,
    /// Meta-Nash weights aligned with `subpopulation`.
    pub meta: MixedStrategy,
    pub best_witness_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    /// All subpopulations had a non-losing witness (false if unresolved).
    pub holds: bool,
    /// The full-game equilibrium was not accurate enough to decide.
    pub unresolved: bool,
    pub full_residual: f64,
    pub support: SupportSet,
    pub subpopulations_checked: usize,
    /// Smallest best-witness payoff across all checked subpopulations.
    pub min_witness_value: f64,
    pub witness_failures: Vec<WitnessFailure>,
}

pub fn check_theorem1(
    game: &PayoffMatrix,
    support_threshold: f64,
    tol: f64,
) -> Result<Theorem1Report> {
    check_theorem1_with(
        game,
        &TheoremCheckConfig {
            support_threshold,
            tolerance: tol,
            ..TheoremCheckConfig::default()
        },
    )
}

/// Enumerates every proper subpopulation that misses part of the Nash
/// support, solves its meta-Nash `σ'`, and checks that some missing support
/// strategy `π` satisfies `1_πᵀ G σ' ≥ -tol`.
pub fn check_theorem1_with(
    game: &PayoffMatrix,
    cfg: &TheoremCheckConfig,
) -> Result<Theorem1Report> {
    let n = game.dim();
    if n > THEOREM_MAX_DIM {
        return Err(Error::TooLarge {
            dim: n,
            limit: THEOREM_MAX_DIM,
        });
    }
    let solve = |g: &PayoffMatrix, budget: SolverBudget| {
        if cfg.refine {
            solve_precise(g, budget)
        } else {
            fictitious_play_from(g, budget, 0)
        }
    };
    let full = solve(game, cfg.full_game)?;
    let support = extract_support(&full.weights, cfg.support_threshold);
    let mut report = Theorem1Report {
        holds: false,
        unresolved: full.residual > cfg.resolve_residual,
        full_residual: full.residual,
        support,
        subpopulations_checked: 0,
        min_witness_value: f64::INFINITY,
        witness_failures: Vec::new(),
    };
    if report.unresolved {
        return Ok(report);
    }
    let support_mask: u32 = report.support.indices.iter().map(|&i| 1u32 << i).sum();
    let all: u32 = (1u32 << n) - 1;
    for mask in 1..all {
        if support_mask & !mask == 0 {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = restricted_game(game, &members)?;
        let meta = solve(&sub, cfg.subgame)?;
        let mut embedded = vec![0.0; n];
        for (&m, &w) in members.iter().zip(meta.weights.probs()) {
            embedded[m] = w;
        }
        let payoffs = game.apply(&embedded)?;
        let best = report
            .support
            .indices
            .iter()
            .filter(|&&i| mask & (1 << i) == 0)
            .map(|&i| payoffs[i])
            .fold(f64::NEG_INFINITY, f64::max);
        report.subpopulations_checked += 1;
        report.min_witness_value = report.min_witness_value.min(best);
        if best < -cfg.tolerance {
            report.witness_failures.push(WitnessFailure {
                subpopulation: members,
                meta: meta.weights,
                best_witness_value: best,
            });
        }
    }
    report.holds = report.witness_failures.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{canonical_game, exploitability, generate_random_game, Fixture};

    #[test]
    fn linear_program_solves_games_fictitious_play_cannot_refine() {
        for seed in [7, 15, 40] {
            let game = generate_random_game(15, seed).unwrap();
            let (weights, residual) = lp_equilibrium(&game).unwrap();
            assert!(residual <= 1e-9, "seed {seed}: {residual}");
            assert_eq!(residual, exploitability(&game, &weights).unwrap());
            let precise = solve_precise(&game, SolverBudget::default()).unwrap();
            assert!(precise.residual <= 1e-9);
        }
    }

    #[test]
    fn linear_program_finds_the_pure_equilibrium() {
        let game = canonical_game(Fixture::RectifiedCounterexample);
        let (weights, residual) = lp_equilibrium(&game).unwrap();
        assert_eq!(weights.as_pure(), Some(3));
        assert_eq!(residual, 0.0);
    }

    #[test]
    fn rps_converges_to_uniform() {
        let meta = fictitious_play(&canonical_game(Fixture::Rps), 10_000, 0.0).unwrap();
        assert_eq!(meta.iterations_used, 10_000);
        for &p in meta.weights.probs() {
            assert!((p - 1.0 / 3.0).abs() < 0.05, "{:?}", meta.weights);
        }
    }

    #[test]
    fn single_strategy_game() {
        let g = PayoffMatrix::from_rows(vec![vec![0.0]]).unwrap();
        let meta = fictitious_play(&g, 50, 0.0).unwrap();
        assert_eq!(meta.weights.probs(), &[1.0]);
        assert_eq!(meta.residual, 0.0);
        assert_eq!(meta.iterations_used, 1);
    }

    #[test]
    fn counterexample_converges_to_pure_fourth() {
        let g = canonical_game(Fixture::RectifiedCounterexample);
        let meta = fictitious_play(&g, 10_000, 1e-3).unwrap();
        assert!(meta.residual <= 1e-3);
        assert!(meta.iterations_used < 10_000);
        let target = MixedStrategy::pure(4, 3).unwrap();
        assert!(meta.weights.linf_distance(&target) < 0.05);
        assert_eq!(meta.residual, exploitability(&g, &meta.weights).unwrap());
    }

    #[test]
    fn zero_iterations_rejected() {
        let g = canonical_game(Fixture::Rps);
        assert!(matches!(fictitious_play(&g, 0, 0.0), Err(Error::Config(_))));
        assert!(fictitious_play_from(&g, SolverBudget::default(), 3).is_err());
    }

    #[test]
    fn restricted_game_examples() {
        let c = canonical_game(Fixture::RectifiedCounterexample);
        let block = restricted_game(&c, &[0, 1, 2]).unwrap();
        assert_eq!(block.to_rows(), canonical_game(Fixture::Rps).to_rows());
        let g = generate_random_game(6, 2).unwrap();
        assert_eq!(
            restricted_game(&g, &[4]).unwrap().to_rows(),
            vec![vec![0.0]]
        );
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(restricted_game(&g, &all).unwrap().to_rows(), g.to_rows());
        let reordered = restricted_game(&g, &[3, 1]).unwrap();
        assert_eq!(reordered.get(0, 1), g.get(3, 1));
    }

    #[test]
    fn restricted_game_index_errors() {
        let g = generate_random_game(4, 0).unwrap();
        assert_eq!(
            restricted_game(&g, &[0, 4]),
            Err(Error::IndexOutOfRange { index: 4, dim: 4 })
        );
        assert_eq!(
            restricted_game(&g, &[1, 2, 1]),
            Err(Error::DuplicateIndex(1))
        );
    }

    #[test]
    fn support_examples() {
        let s = MixedStrategy::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]).unwrap();
        assert_eq!(extract_support(&s, 0.01).indices, BTreeSet::from([0, 1, 2]));
        let p = MixedStrategy::pure(3, 0).unwrap();
        assert_eq!(extract_support(&p, 0.01).indices, BTreeSet::from([0]));
        let u = MixedStrategy::uniform(60).unwrap();
        assert_eq!(extract_support(&u, 0.01).len(), 60);
    }

    #[test]
    fn theorem_holds_on_rps() {
        let r = check_theorem1(&canonical_game(Fixture::Rps), 0.02, 1e-6).unwrap();
        assert!(r.holds && !r.unresolved, "{r:?}");
        assert_eq!(r.support.indices, BTreeSet::from([0, 1, 2]));
        // Every proper nonempty subset misses a support strategy.
        assert_eq!(r.subpopulations_checked, 6);
    }

    #[test]
    fn theorem_holds_on_counterexample() {
        let r = check_theorem1(
            &canonical_game(Fixture::RectifiedCounterexample),
            0.02,
            1e-6,
        )
        .unwrap();
        assert!(r.holds, "{r:?}");
        assert_eq!(r.support.indices, BTreeSet::from([3]));
        // The 7 nonempty subsets of {0, 1, 2}; strategy 4 earns 2/5 against each.
        assert_eq!(r.subpopulations_checked, 7);
        assert!((r.min_witness_value - 0.4).abs() < 1e-12);
    }

    #[test]
    fn theorem_holds_on_random_dim6_seed11() {
        let g = generate_random_game(6, 11).unwrap();
        let r = check_theorem1(&g, 0.02, 1e-4).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn theorem_guard() {
        let g = generate_random_game(13, 0).unwrap();
        assert_eq!(
            check_theorem1(&g, 0.02, 1e-4).unwrap_err(),
            Error::TooLarge { dim: 13, limit: 12 }
        );
    }
}
