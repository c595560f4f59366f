use super::*;
use crate::game::{canonical_game, exploitability, generate_random_game, Fixture};
use crate::population::PolicyStatus;
use crate::trace::TraceRecord;

fn counterexample() -> Arc<PayoffMatrix> {
    Arc::new(canonical_game(Fixture::RectifiedCounterexample))
}

fn oracle_config(algorithm: AlgorithmKind, workers: usize, max_rounds: u64) -> RunConfig {
    RunConfig {
        algorithm,
        scheduler: SchedulerConfig {
            workers,
            max_rounds,
            ..SchedulerConfig::default()
        },
        anneal: AnnealSchedule::Constant { r0: 1.0 },
        ..RunConfig::default()
    }
}

fn lr_config(algorithm: AlgorithmKind, workers: usize, r0: f64, max_rounds: u64) -> RunConfig {
    RunConfig {
        anneal: AnnealSchedule::Constant { r0 },
        ..oracle_config(algorithm, workers, max_rounds)
    }
}

fn is_pure(s: &MixedStrategy, index: usize) -> bool {
    s.as_pure() == Some(index)
}

#[test]
fn algorithm_names_round_trip() {
    for a in AlgorithmKind::ALL {
        assert_eq!(a.name().parse::<AlgorithmKind>().unwrap(), a);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, format!("\"{}\"", a.name()));
    }
    assert!("psro".parse::<AlgorithmKind>().is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let game = counterexample();
    let mut cfg = RunConfig::default();
    cfg.scheduler.workers = 0;
    assert!(matches!(run(game.clone(), &cfg), Err(Error::Config(_))));
    let mut cfg = RunConfig::default();
    cfg.scheduler.eval_every = 0;
    assert!(matches!(run(game.clone(), &cfg), Err(Error::Config(_))));
    let cfg = RunConfig {
        anneal: AnnealSchedule::Constant { r0: 0.0 },
        ..RunConfig::default()
    };
    assert!(run(game.clone(), &cfg).is_err());
    let cfg = RunConfig {
        rectified_support_threshold: 1.5,
        ..RunConfig::default()
    };
    assert!(run(game, &cfg).is_err());
}

#[test]
fn p2sro_single_worker_oracle_solves_counterexample() {
    let mut cfg = oracle_config(AlgorithmKind::P2sro, 1, 400);
    cfg.initial_policy = InitialPolicy::Pure { index: 0 };
    cfg.refine_eval = true;
    let out = run(counterexample(), &cfg).unwrap();
    assert!(out.final_exploitability().unwrap() <= 1e-9);
    assert!(out.fixed_policies().iter().any(|s| is_pure(s, 3)));
}

#[test]
fn sequential_oracle_reaches_the_pure_equilibrium_within_four_promotions() {
    let mut cfg = oracle_config(AlgorithmKind::SequentialPsro, 1, 400);
    cfg.initial_policy = InitialPolicy::Pure { index: 0 };
    cfg.refine_eval = true;
    let out = run(counterexample(), &cfg).unwrap();
    let fixed = out.fixed_policies();
    let first_four = fixed.iter().position(|s| is_pure(s, 3)).unwrap();
    // Rock was there from the start; Paper, Scissors, then strategy 4.
    assert_eq!(first_four, 3);
    assert!(is_pure(&fixed[1], 1) && is_pure(&fixed[2], 2));
    assert!(out.final_exploitability().unwrap() <= 1e-9);
}

#[test]
fn rectified_oracle_stalls_on_counterexample() {
    let mut cfg = oracle_config(AlgorithmKind::RectifiedPsro, 1, 500);
    cfg.initial_policy = InitialPolicy::Pure { index: 0 };
    // Fictitious play approaches the RPS equilibrium slowly.
    cfg.meta_solver = SolverBudget::new(200_000, 1e-6);
    let out = run(counterexample(), &cfg).unwrap();
    assert!(out.terminated_early);
    assert_eq!(out.generations.len(), 3);
    let added: Vec<Vec<usize>> = out.generations.iter().map(|g| g.added.clone()).collect();
    assert_eq!(added, vec![vec![1], vec![2], vec![]]);
    assert!(is_pure(out.population.strategy(1), 1));
    assert!(is_pure(out.population.strategy(2), 2));
    assert_eq!(out.population.len(), 3);
    // Generation 3: Rock targets the 50-50 mix of Rock and Scissors.
    let rock = out.generations[2]
        .targets
        .iter()
        .find(|t| t.member == 0)
        .unwrap();
    assert_eq!(rock.opponents, vec![0, 2]);
    let expected = [0.5, 0.0, 0.5, 0.0];
    for (a, b) in rock.target.probs().iter().zip(expected) {
        assert!((a - b).abs() < 1e-2, "{:?}", rock.target);
    }
    // The final meta-Nash weighs RPS evenly.
    for w in out.generations[2].meta.meta.weights.probs() {
        assert!((w - 1.0 / 3.0).abs() < 1e-2);
    }
    assert!((out.final_exploitability().unwrap() - 0.4).abs() < 1e-9);
    // The trace is padded to the full round budget.
    assert_eq!(out.trace.records.last().unwrap().round, 500);
}

#[test]
fn selfplay_on_rps_stays_in_range() {
    let cfg = lr_config(AlgorithmKind::SelfPlay, 1, 0.5, 300);
    let out = run(Arc::new(canonical_game(Fixture::Rps)), &cfg).unwrap();
    assert!(!out.trace.records.is_empty());
    for r in &out.trace.records {
        assert!((0.0..=1.0).contains(&r.exploitability), "{r:?}");
    }
}

#[test]
fn selfplay_oracle_cycles_through_rps() {
    let game = Arc::new(canonical_game(Fixture::Rps));
    let cfg = oracle_config(AlgorithmKind::SelfPlay, 1, 600);
    let out = run(game.clone(), &cfg).unwrap();
    let fixed = out.fixed_policies();
    assert!(fixed.len() >= 7, "only {} fixings", fixed.len());
    // The uniform start is followed by Rock, Paper, Scissors, Rock, ...
    for (k, s) in fixed[1..].iter().enumerate() {
        assert!(is_pure(s, k % 3), "policy {} is {:?}", k + 1, s);
    }
    let latest = fixed.last().unwrap();
    assert_eq!(exploitability(&game, latest).unwrap(), 1.0);
    assert!(out.final_exploitability().unwrap() < 0.01);
}

#[test]
fn dch_population_size_is_constant() {
    let game = Arc::new(generate_random_game(12, 3).unwrap());
    let cfg = lr_config(AlgorithmKind::Dch, 4, 0.5, 200);
    let out = run(game, &cfg).unwrap();
    assert_eq!(out.population.len(), 5);
    assert_eq!(out.population.fixed_count(), 1);
    assert!(out.promotion_rounds.is_empty());
    for r in &out.trace.records {
        assert_eq!(r.population_size, 5);
    }
    assert_eq!(out.global_steps, 4 * 200);
}

#[test]
fn naive_with_one_worker_matches_sequential() {
    let game = Arc::new(generate_random_game(15, 7).unwrap());
    for r0 in [0.5, 1.0] {
        let seq = run(
            game.clone(),
            &lr_config(AlgorithmKind::SequentialPsro, 1, r0, 400),
        )
        .unwrap();
        let naive = run(
            game.clone(),
            &lr_config(AlgorithmKind::NaivePsro, 1, r0, 400),
        )
        .unwrap();
        assert!(seq.promotion_rounds.len() >= 3);
        assert_eq!(seq.trace.records, naive.trace.records);
        assert_eq!(seq.promotion_rounds, naive.promotion_rounds);
        assert_eq!(seq.fixed_policies(), naive.fixed_policies());
    }
}

#[test]
fn single_worker_p2sro_fixes_the_same_policies_as_sequential() {
    for seed in [1, 2] {
        let game = Arc::new(generate_random_game(15, seed).unwrap());
        let seq = run(
            game.clone(),
            &oracle_config(AlgorithmKind::SequentialPsro, 1, 300),
        )
        .unwrap();
        let p2 = run(game.clone(), &oracle_config(AlgorithmKind::P2sro, 1, 300)).unwrap();
        assert_eq!(seq.fixed_policies(), p2.fixed_policies());
        assert_eq!(seq.trace.records, p2.trace.records);
    }
}

#[test]
fn sequential_ignores_the_worker_count() {
    let game = Arc::new(generate_random_game(10, 4).unwrap());
    let one = run(
        game.clone(),
        &oracle_config(AlgorithmKind::SequentialPsro, 1, 200),
    )
    .unwrap();
    let many = run(game, &oracle_config(AlgorithmKind::SequentialPsro, 5, 200)).unwrap();
    assert_eq!(one.trace.records, many.trace.records);
    assert_eq!(many.trace.metadata.workers, 1);
}

#[test]
fn lockstep_runs_are_deterministic() {
    let game = Arc::new(generate_random_game(20, 5).unwrap());
    for algorithm in AlgorithmKind::ALL {
        let mut cfg = lr_config(algorithm, 3, 0.5, 150);
        cfg.randomize_meta_init = true;
        cfg.seed = 99;
        let a = run(game.clone(), &cfg).unwrap();
        let b = run(game.clone(), &cfg).unwrap();
        assert_eq!(a.trace, b.trace, "{algorithm}");
        assert_eq!(a.fixed_policies(), b.fixed_policies(), "{algorithm}");
    }
}

#[test]
fn run_seed_matters_only_with_randomized_meta_init() {
    let game = Arc::new(generate_random_game(20, 8).unwrap());
    let mut cfg = lr_config(AlgorithmKind::Dch, 4, 1.0, 100);
    let a = run(game.clone(), &cfg).unwrap();
    cfg.seed = 1;
    let b = run(game.clone(), &cfg).unwrap();
    assert_eq!(a.trace.records, b.trace.records);
    cfg.randomize_meta_init = true;
    let c = run(game.clone(), &cfg).unwrap();
    cfg.seed = 2;
    let d = run(game, &cfg).unwrap();
    assert_ne!(c.trace.records, d.trace.records);
}

#[test]
fn p2sro_round_keeps_the_pipeline_shape() {
    let game = Arc::new(generate_random_game(15, 12).unwrap());
    let cfg = oracle_config(AlgorithmKind::P2sro, 3, 400);
    let mut state = RunState::new(game, cfg).unwrap();
    let mut promotions = 0;
    while !state.is_done() {
        let second_level = state.workers()[1].level;
        let epoch = state.epoch();
        state.step_round().unwrap();
        let workers = state.workers();
        let pop = state.population();
        assert_eq!(workers.len(), 3);
        assert_eq!(pop.active_count(), 3);
        for (k, w) in workers.iter().enumerate() {
            let entry = &pop.policies()[pop.fixed_count() + k];
            assert_eq!(entry.level, w.level);
            assert_eq!(entry.status, PolicyStatus::Active);
            assert_eq!(entry.strategy.as_ref(), w.policy);
        }
        // The lowest learner's target only mixes fixed policies.
        let lowest = &workers[0];
        assert!(lowest.target_members.iter().all(|&i| i < pop.fixed_count()));
        assert_eq!(lowest.target_members.len(), pop.fixed_count());
        if state.epoch() > epoch {
            promotions += 1;
            assert_eq!(workers[0].level, second_level);
        }
        pop.check_invariants().unwrap();
    }
    assert!(promotions >= 3, "only {promotions} promotions");
}

#[test]
fn p2sro_targets_match_population_meta_nash_below() {
    let game = Arc::new(generate_random_game(12, 21).unwrap());
    let cfg = lr_config(AlgorithmKind::P2sro, 3, 0.5, 60);
    let mut state = RunState::new(game, cfg.clone()).unwrap();
    for _ in 0..60 {
        state.step_round().unwrap();
        // Right after a refresh every cached target is exactly the
        // meta-Nash mixture over the levels below.
        if state
            .round()
            .is_multiple_of(cfg.scheduler.meta_refresh_period)
        {
            let pop = state.population();
            for w in state.workers() {
                let meta = pop.meta_nash_below(w.level, cfg.meta_solver).unwrap();
                let expected = pop.mixture_strategy(&meta).unwrap();
                assert_eq!(w.target.unwrap(), &expected);
            }
        }
    }
}

#[test]
fn trace_records_are_on_the_eval_grid() {
    let game = Arc::new(generate_random_game(10, 2).unwrap());
    let mut cfg = lr_config(AlgorithmKind::P2sro, 2, 0.5, 95);
    cfg.scheduler.eval_every = 20;
    let mut streamed: Vec<TraceRecord> = Vec::new();
    let out = run_with_sink(game, &cfg, &mut streamed).unwrap();
    let rounds: Vec<u64> = out.trace.records.iter().map(|r| r.round).collect();
    assert_eq!(rounds, vec![0, 20, 40, 60, 80]);
    assert_eq!(streamed, out.trace.records);
    assert_eq!(out.trace.records[2].global_step, 80);
}

#[test]
fn step_budget_caps_the_run() {
    let game = Arc::new(generate_random_game(10, 2).unwrap());
    let mut cfg = lr_config(AlgorithmKind::Dch, 3, 0.5, 1000);
    cfg.scheduler.max_steps = Some(30);
    let out = run(game, &cfg).unwrap();
    assert_eq!(out.global_steps, 30);
    assert_eq!(out.rounds, 10);
}

#[test]
fn fixed_only_evaluation_ignores_active_snapshots() {
    let game = Arc::new(generate_random_game(10, 6).unwrap());
    let mut cfg = lr_config(AlgorithmKind::P2sro, 3, 0.5, 40);
    cfg.eval_fixed_only = true;
    let out = run(game.clone(), &cfg).unwrap();
    let first = &out.trace.records[0];
    assert_eq!(first.population_size, 1);
    let uniform = MixedStrategy::uniform(10).unwrap();
    assert_eq!(
        first.exploitability,
        exploitability(&game, &uniform).unwrap()
    );
}

#[test]
fn threaded_mode_produces_a_valid_trace() {
    let game = Arc::new(generate_random_game(15, 9).unwrap());
    for algorithm in AlgorithmKind::ALL {
        let mut cfg = lr_config(algorithm, 3, 0.5, 200);
        cfg.scheduler.mode = ExecutionMode::Threaded;
        let out = run(game.clone(), &cfg).unwrap();
        out.trace.validate().unwrap();
        let rounds: Vec<u64> = out.trace.records.iter().map(|r| r.round).collect();
        assert_eq!(
            rounds,
            (0..=20).map(|k| k * 10).collect::<Vec<_>>(),
            "{algorithm}"
        );
        out.population.check_invariants().unwrap();
    }
}

#[test]
fn threaded_p2sro_still_solves_the_counterexample() {
    let mut cfg = oracle_config(AlgorithmKind::P2sro, 2, 600);
    cfg.initial_policy = InitialPolicy::Pure { index: 0 };
    cfg.refine_eval = true;
    cfg.scheduler.mode = ExecutionMode::Threaded;
    let out = run(counterexample(), &cfg).unwrap();
    assert!(out.fixed_policies().iter().any(|s| is_pure(s, 3)));
    assert!(out.final_exploitability().unwrap() <= 1e-9);
}
