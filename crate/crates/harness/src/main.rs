use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psro_harness::{
    aggregate_files, check_theorem, expand_glob, run_sweep, verify_counterexample, write_summary,
    ExperimentConfig, HarnessError,
};

/// Environment variable naming the default output directory of `run`.
const OUTPUT_DIR_ENV: &str = "PSRO_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "psro",
    version,
    about = "Population solvers on symmetric zero-sum normal-form games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config and write one CSV trace per cell.
    Run {
        config: PathBuf,
        /// Dotted-path override, e.g. `scheduler.max_rounds=300`; repeatable.
        #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Mean and standard error of exploitability across trace files.
    Aggregate {
        /// Glob pattern selecting the trace files (quote it).
        pattern: String,
        /// Comma-separated metadata keys to group by.
        #[arg(long, value_delimiter = ',', required = true)]
        group_by: Vec<String>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Replay the counterexample on which Rectified PSRO stalls.
    VerifyCounterexample,
    /// Check the support-witness property on seeded random games.
    CheckTheorem {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
            let out_dir = cfg.output_dir(env_dir.as_deref());
            let paths = run_sweep(&cfg, &out_dir)?;
            println!("wrote {} trace files to {}", paths.len(), out_dir.display());
        }
        Command::Aggregate {
            pattern,
            group_by,
            output,
        } => {
            let paths = expand_glob(&pattern)?;
            let summary = aggregate_files(&paths, &group_by)?;
            write_summary(&output, &summary)?;
            println!(
                "aggregated {} traces into {} groups; wrote {}",
                paths.len(),
                summary.final_rows().len(),
                output.display()
            );
        }
        Command::VerifyCounterexample => {
            let report = verify_counterexample()?;
            print!("{report}");
            report.into_result()?;
        }
        Command::CheckTheorem { dim, games, seed } => {
            let report = check_theorem(dim, games, seed)?;
            print!("{report}");
            if !report.failures.is_empty() {
                return Err(HarnessError::Verification(format!(
                    "{} witness failures on {} games",
                    report.failures.len(),
                    games
                )));
            }
        }
    }
    Ok(())
}

/// One JSON object on stderr, so scripts can parse failures.
fn report_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": kind, "message": message })
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
