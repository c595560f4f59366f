//! The counterexample replay and the support-witness sweep behind the
//! `verify-counterexample` and `check-theorem` subcommands.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use psro_core::game::{canonical_game, generate_random_game, Fixture, MixedStrategy};
use psro_core::learners::AnnealSchedule;
use psro_core::meta_solver::{check_theorem1, THEOREM_MAX_DIM};
use psro_core::population::InitialPolicy;
use psro_core::{run, AlgorithmKind, RunConfig, RunOutcome, SchedulerConfig};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

/// Tolerance on the stalled rectified exploitability (2/5).
pub const RECTIFIED_TOLERANCE: f64 = 1e-9;
/// Largest accepted double-oracle exploitability.
pub const DOUBLE_ORACLE_TOLERANCE: f64 = 1e-9;
pub const COUNTEREXAMPLE_TIME_LIMIT: Duration = Duration::from_secs(1);

const STRATEGY_NAMES: [&str; 4] = ["Rock", "Paper", "Scissors", "Fourth"];

fn strategy_name(s: &MixedStrategy) -> String {
    match s.as_pure() {
        Some(i) => STRATEGY_NAMES
            .get(i)
            .map_or_else(|| format!("#{i}"), |n| n.to_string()),
        None => format!("{:?}", s.probs()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// One rectified generation in strategy names.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    pub index: usize,
    /// Meta-Nash weight of every fixed policy at the start of the generation.
    pub meta: Vec<(String, f64)>,
    /// `(member, opponents it beats or ties, trained response)`.
    pub targets: Vec<(String, Vec<String>, String)>,
    pub added: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub generations: Vec<GenerationSummary>,
    pub rectified_terminated: bool,
    pub rectified_population: Vec<String>,
    pub rectified_exploitability: f64,
    /// Distinct fixed policies in the order they were first added.
    pub double_oracle_population: Vec<String>,
    pub double_oracle_exploitability: f64,
    pub elapsed: Duration,
    pub checks: Vec<Check>,
}

impl CounterexampleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Error naming every failed check, if any.
    pub fn into_result(self) -> Result<Self> {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        if failed.is_empty() {
            Ok(self)
        } else {
            Err(HarnessError::Verification(failed.join("; ")))
        }
    }
}

impl fmt::Display for CounterexampleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "rectified PSRO (oracle best responses, starting from Rock)"
        )?;
        for g in &self.generations {
            let meta: Vec<String> = g.meta.iter().map(|(n, w)| format!("{n} {w:.4}")).collect();
            writeln!(
                f,
                "  generation {}: meta-Nash [{}]",
                g.index,
                meta.join(", ")
            )?;
            for (member, opponents, response) in &g.targets {
                writeln!(
                    f,
                    "    {member} vs {{{}}} -> {response}",
                    opponents.join(", ")
                )?;
            }
            if g.added.is_empty() {
                writeln!(f, "    adds nothing; terminates")?;
            } else {
                writeln!(f, "    adds {}", g.added.join(", "))?;
            }
        }
        writeln!(
            f,
            "  final population {{{}}}, exploitability {}",
            self.rectified_population.join(", "),
            self.rectified_exploitability
        )?;
        writeln!(f, "double oracle (sequential PSRO, oracle best responses)")?;
        writeln!(
            f,
            "  policies in order of discovery: {}; exploitability {}",
            self.double_oracle_population.join(", "),
            self.double_oracle_exploitability
        )?;
        writeln!(f, "elapsed {:.3} s", self.elapsed.as_secs_f64())?;
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

fn oracle_config(algorithm: AlgorithmKind, max_rounds: u64) -> RunConfig {
    RunConfig {
        algorithm,
        scheduler: SchedulerConfig {
            workers: 3,
            max_rounds,
            ..SchedulerConfig::default()
        },
        anneal: AnnealSchedule::Constant { r0: 1.0 },
        initial_policy: InitialPolicy::Pure { index: 0 },
        // Exact meta-Nash equilibria, so the replay matches the hand trace.
        refine_meta: true,
        refine_eval: true,
        ..RunConfig::default()
    }
}

fn names<S: AsRef<MixedStrategy>>(strategies: impl IntoIterator<Item = S>) -> Vec<String> {
    strategies
        .into_iter()
        .map(|s| strategy_name(s.as_ref()))
        .collect()
}

fn summarize_generations(out: &RunOutcome) -> Vec<GenerationSummary> {
    let population = &out.population;
    let name = |i: usize| strategy_name(population.strategy(i));
    out.generations
        .iter()
        .map(|g| GenerationSummary {
            index: g.index,
            meta: g
                .meta
                .members
                .iter()
                .zip(g.meta.meta.weights.probs())
                .map(|(&m, &w)| (name(m), w))
                .collect(),
            targets: g
                .targets
                .iter()
                .map(|t| {
                    let response = t
                        .response
                        .as_ref()
                        .map_or_else(|| "untrained".into(), strategy_name);
                    (
                        name(t.member),
                        t.opponents.iter().map(|&o| name(o)).collect(),
                        response,
                    )
                })
                .collect(),
            added: g.added.iter().map(|&i| name(i)).collect(),
        })
        .collect()
}

/// Replays the Rock-Paper-Scissors-plus-one counterexample with oracle best
/// responses: Rectified PSRO adds Paper, then Scissors, then stops at
/// exploitability 2/5, while the double oracle finds the pure equilibrium.
pub fn verify_counterexample() -> Result<CounterexampleReport> {
    let start = Instant::now();
    let game = Arc::new(canonical_game(Fixture::RectifiedCounterexample));
    let rectified = run(
        game.clone(),
        &oracle_config(AlgorithmKind::RectifiedPsro, 200),
    )?;
    let double_oracle = run(game, &oracle_config(AlgorithmKind::SequentialPsro, 400))?;
    let elapsed = start.elapsed();

    let generations = summarize_generations(&rectified);
    let rectified_population = names(
        rectified
            .population
            .policies()
            .iter()
            .map(|p| p.strategy.clone()),
    );
    let rectified_exploitability = rectified.final_exploitability().unwrap_or(f64::NAN);
    // Once at the equilibrium, PSRO keeps re-adding the same best response;
    // report each policy once, in order of discovery.
    let mut double_oracle_population = names(double_oracle.fixed_policies());
    let mut seen = Vec::new();
    double_oracle_population.retain(|n| {
        let fresh = !seen.contains(n);
        seen.push(n.clone());
        fresh
    });
    let double_oracle_exploitability = double_oracle.final_exploitability().unwrap_or(f64::NAN);

    let added: Vec<Vec<String>> = generations.iter().map(|g| g.added.clone()).collect();
    let expected_added = vec![
        vec!["Paper".to_string()],
        vec!["Scissors".to_string()],
        vec![],
    ];
    let checks = vec![
        Check {
            name: "rectified generations",
            passed: added == expected_added && rectified.terminated_early,
            detail: format!(
                "added per generation {added:?}, terminated {}",
                rectified.terminated_early
            ),
        },
        Check {
            name: "rectified population",
            passed: rectified_population == ["Rock", "Paper", "Scissors"],
            detail: format!("{{{}}}", rectified_population.join(", ")),
        },
        Check {
            name: "rectified exploitability",
            passed: (rectified_exploitability - 0.4).abs() <= RECTIFIED_TOLERANCE,
            detail: format!(
                "{rectified_exploitability} (expected 0.4 within {RECTIFIED_TOLERANCE:e})"
            ),
        },
        Check {
            name: "double-oracle exploitability",
            passed: double_oracle_exploitability <= DOUBLE_ORACLE_TOLERANCE,
            detail: format!("{double_oracle_exploitability} (limit {DOUBLE_ORACLE_TOLERANCE:e})"),
        },
        Check {
            name: "runtime",
            passed: elapsed < COUNTEREXAMPLE_TIME_LIMIT,
            detail: format!(
                "{:.3} s (limit {} s)",
                elapsed.as_secs_f64(),
                COUNTEREXAMPLE_TIME_LIMIT.as_secs()
            ),
        },
    ];
    Ok(CounterexampleReport {
        generations,
        rectified_terminated: rectified.terminated_early,
        rectified_population,
        rectified_exploitability,
        double_oracle_population,
        double_oracle_exploitability,
        elapsed,
        checks,
    })
}

/// A game on which some sub-population had no non-losing support witness.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremFailure {
    pub game_seed: u64,
    pub subpopulation: Vec<usize>,
    pub best_witness_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSweepReport {
    pub dim: usize,
    pub games: usize,
    pub seed: u64,
    pub passed: usize,
    /// Games whose full equilibrium could not be computed precisely enough.
    pub unresolved: Vec<u64>,
    pub failures: Vec<TheoremFailure>,
}

impl fmt::Display for TheoremSweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "dim {}, {} games from seed {}: {} passed, {} unresolved, {} failed",
            self.dim,
            self.games,
            self.seed,
            self.passed,
            self.unresolved.len(),
            self.failures.len()
        )?;
        if !self.unresolved.is_empty() {
            writeln!(f, "unresolved game seeds: {:?}", self.unresolved)?;
        }
        for fail in &self.failures {
            writeln!(
                f,
                "FAILED game seed {}: sub-population {:?}, best witness payoff {}",
                fail.game_seed, fail.subpopulation, fail.best_witness_value
            )?;
        }
        Ok(())
    }
}

/// Support threshold and witness tolerance used by [`check_theorem`].
pub const THEOREM_SUPPORT_THRESHOLD: f64 = 1e-6;
pub const THEOREM_TOLERANCE: f64 = 1e-4;

/// Checks the support-witness property on `games` random games with seeds
/// `seed, seed + 1, ...`.
pub fn check_theorem(dim: usize, games: usize, seed: u64) -> Result<TheoremSweepReport> {
    if dim > THEOREM_MAX_DIM {
        return Err(psro_core::Error::TooLarge {
            dim,
            limit: THEOREM_MAX_DIM,
        }
        .into());
    }
    let reports = (0..games as u64)
        .into_par_iter()
        .map(|k| {
            let game_seed = seed.wrapping_add(k);
            let game = generate_random_game(dim, game_seed)?;
            Ok((
                game_seed,
                check_theorem1(&game, THEOREM_SUPPORT_THRESHOLD, THEOREM_TOLERANCE)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = TheoremSweepReport {
        dim,
        games,
        seed,
        passed: 0,
        unresolved: Vec::new(),
        failures: Vec::new(),
    };
    for (game_seed, r) in reports {
        if r.unresolved {
            report.unresolved.push(game_seed);
        } else if r.holds {
            report.passed += 1;
        } else {
            report
                .failures
                .extend(r.witness_failures.into_iter().map(|w| TheoremFailure {
                    game_seed,
                    subpopulation: w.subpopulation,
                    best_witness_value: w.best_witness_value,
                }));
        }
    }
    Ok(report)
}
