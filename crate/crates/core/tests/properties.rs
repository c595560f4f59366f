//! Randomized checks of the game, learner, solver and population invariants.

use std::sync::Arc;

use proptest::prelude::*;
use psro_core::game::{generate_random_game, MixedStrategy, PayoffMatrix};
use psro_core::invariants::{
    check_antisymmetric, check_best_response, check_fictitious_play, check_population_ops,
    check_simplex_preservation, check_utility_antisymmetry, PopulationOp,
};
use psro_core::learners::AnnealSchedule;
use psro_core::meta_solver::SolverBudget;

const CASES: u32 = 1000;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        ..ProptestConfig::default()
    }
}

/// A point of the simplex: mostly interior, sometimes a vertex, sometimes
/// on a face.
fn strategy(dim: usize) -> impl Strategy<Value = MixedStrategy> {
    prop_oneof![
        1 => (0..dim).prop_map(move |i| MixedStrategy::pure(dim, i).unwrap()),
        4 => prop::collection::vec(0u32..1000, dim).prop_map(move |w| {
            let total: u32 = w.iter().sum();
            if total == 0 {
                return MixedStrategy::uniform(dim).unwrap();
            }
            let probs: Vec<f64> = w.iter().map(|&x| f64::from(x) / f64::from(total)).collect();
            MixedStrategy::new(probs).unwrap()
        }),
    ]
}

fn game(max_dim: usize) -> impl Strategy<Value = PayoffMatrix> {
    (1..=max_dim, any::<u64>()).prop_map(|(dim, seed)| generate_random_game(dim, seed).unwrap())
}

fn game_and_pair(
    max_dim: usize,
) -> impl Strategy<Value = (PayoffMatrix, MixedStrategy, MixedStrategy)> {
    game(max_dim).prop_flat_map(|g| {
        let dim = g.dim();
        (Just(g), strategy(dim), strategy(dim))
    })
}

fn schedule() -> impl Strategy<Value = AnnealSchedule> {
    prop_oneof![
        (0.01f64..=1.0).prop_map(|r0| AnnealSchedule::Constant { r0 }),
        (0.01f64..=1.0, 0.0f64..1.0)
            .prop_map(|(r0, gamma)| AnnealSchedule::InverseTime { r0, gamma }),
    ]
}

fn population_op(dim: usize) -> impl Strategy<Value = PopulationOp> {
    prop_oneof![
        3 => strategy(dim).prop_map(PopulationOp::AddActive),
        3 => (0usize..8, strategy(dim)).prop_map(|(k, s)| PopulationOp::UpdateActive(k, s)),
        2 => Just(PopulationOp::PromoteLowest),
        2 => strategy(dim).prop_map(PopulationOp::AddFixed),
    ]
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn random_games_are_antisymmetric(g in game(40)) {
        prop_assert_eq!(check_antisymmetric(&g), Ok(()));
    }

    #[test]
    fn utility_is_antisymmetric((g, a, b) in game_and_pair(12)) {
        prop_assert_eq!(check_utility_antisymmetry(&g, &a, &b), Ok(()));
    }

    #[test]
    fn best_response_is_consistent((g, _, opponent) in game_and_pair(12)) {
        prop_assert_eq!(check_best_response(&g, &opponent), Ok(()));
    }

    #[test]
    fn fictitious_play_reports_its_own_residual(
        g in game(10),
        max_iters in 1usize..400,
        target in prop_oneof![Just(0.0), 1e-4f64..0.2],
        start in 0usize..10,
    ) {
        let start = start % g.dim();
        prop_assert_eq!(check_fictitious_play(&g, SolverBudget::new(max_iters, target), start), Ok(()));
    }

    #[test]
    fn population_invariants_survive_any_operation_sequence(
        (g, ops) in game(6).prop_flat_map(|g| {
            let dim = g.dim();
            (Just(g), prop::collection::vec(population_op(dim), 0..24))
        })
    ) {
        prop_assert!(check_population_ops(Arc::new(g), &ops).is_ok());
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn learners_stay_on_the_simplex(
        (g, start, target) in (2usize..=5, any::<u64>()).prop_flat_map(|(dim, seed)| {
            let g = generate_random_game(dim, seed).unwrap();
            (Just(g), strategy(dim), strategy(dim))
        }),
        schedule in schedule(),
    ) {
        let drift = check_simplex_preservation(&g, start, &target, schedule, 100_000);
        prop_assert!(drift.is_ok(), "{:?}", drift);
    }
}
