//! Exact-oracle population solvers for symmetric two-player zero-sum
//! normal-form games.
//!
//! The crate covers the whole stack: games and exact best-response oracles
//! ([`game`]), fictitious-play meta-solving ([`meta_solver`]), the policy
//! population with its empirical payoff table ([`population`]), the
//! learning-rate best-response learners ([`learners`]), and the algorithm
//! drivers that tie them together ([`orchestrators`]): sequential PSRO,
//! naive parallel PSRO, pipeline PSRO (P2SRO), DCH, Rectified PSRO and
//! self-play.

// `!(x >= 0.0)` is used on purpose: unlike `x < 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod invariants;
pub mod learners;
pub mod meta_solver;
pub mod orchestrators;
pub mod population;
pub mod trace;

pub use error::{Error, Result};
pub use game::{
    best_response, best_response_value, canonical_game, expected_utility, exploitability,
    generate_random_game, Fixture, GameOrigin, MixedStrategy, PayoffMatrix,
};
pub use learners::{learning_rate_at, AnnealSchedule, LearnerState, PlateauConfig};
pub use meta_solver::{
    check_theorem1, extract_support, fictitious_play, restricted_game, MetaNash, SolverBudget,
    SupportSet, Theorem1Report,
};
pub use orchestrators::{
    run, run_with_sink, AlgorithmKind, ExecutionMode, RunConfig, RunOutcome, RunState,
    SchedulerConfig,
};
pub use population::{InitialPolicy, Population, RestrictedMeta};
pub use trace::{ExploitabilityTrace, TraceMetadata, TraceRecord, TraceSink};
