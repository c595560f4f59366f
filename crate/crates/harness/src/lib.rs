//! Experiment harness for the psro-core solvers: configuration, seeded
//! sweeps with CSV traces, aggregation, and the verification routines
//! behind the `psro` command-line tool.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod sweep;
pub mod verify;

pub use aggregate::{
    aggregate, aggregate_files, expand_glob, mean_stderr, write_summary, Summary, SummaryRow,
};
pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use sweep::{read_trace, run_sweep, write_trace, Cell, TraceFile};
pub use verify::{check_theorem, verify_counterexample, CounterexampleReport, TheoremSweepReport};
