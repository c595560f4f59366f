//! Sweep execution: one run and one CSV trace file per cell of the
//! configuration's cross product.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use psro_core::game::{canonical_game, generate_random_game, PayoffMatrix};
use psro_core::trace::{ExploitabilityTrace, TraceRecord};
use psro_core::{run, AlgorithmKind, RunConfig};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GameSpec};
use crate::error::{HarnessError, Result};

/// Column header of every trace file.
pub const TRACE_HEADER: [&str; 4] = ["round", "global_step", "exploitability", "population_size"];

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub algorithm: AlgorithmKind,
    /// `None` for fixture games.
    pub game_seed: Option<u64>,
    pub run_seed: u64,
    pub learning_rate: f64,
    /// Requested worker count (single-worker algorithms run with one).
    pub workers: usize,
}

impl Cell {
    /// Deterministic, collision-free within one sweep.
    pub fn file_name(&self, dim: usize) -> String {
        let game = match self.game_seed {
            Some(seed) => format!("g{seed}"),
            None => "fixture".to_string(),
        };
        format!(
            "{}_d{dim}_{game}_r{}_lr{}_w{}.csv",
            self.algorithm, self.run_seed, self.learning_rate, self.workers
        )
    }
}

impl ExperimentConfig {
    /// The cross product, ordered by algorithm, game seed, run seed,
    /// learning rate and worker count.
    pub fn cells(&self) -> Vec<Cell> {
        let game_seeds: Vec<Option<u64>> = match &self.game {
            GameSpec::Random { seeds, .. } => seeds.iter().copied().map(Some).collect(),
            GameSpec::Fixture { .. } => vec![None],
        };
        let mut cells = Vec::new();
        for &algorithm in &self.algorithms {
            for &game_seed in &game_seeds {
                for &run_seed in &self.run_seeds {
                    for &learning_rate in &self.learning_rates {
                        for &workers in &self.workers {
                            cells.push(Cell {
                                algorithm,
                                game_seed,
                                run_seed,
                                learning_rate,
                                workers,
                            });
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn game_for(&self, cell: &Cell) -> Result<PayoffMatrix> {
        Ok(match (&self.game, cell.game_seed) {
            (GameSpec::Random { dim, .. }, Some(seed)) => generate_random_game(*dim, seed)?,
            (GameSpec::Fixture { name }, _) => canonical_game(*name),
            (GameSpec::Random { .. }, None) => {
                return Err(HarnessError::Config {
                    source_name: "game".into(),
                    message: "a random game needs a seed".into(),
                })
            }
        })
    }

    pub fn run_config(&self, cell: &Cell) -> RunConfig {
        RunConfig {
            algorithm: cell.algorithm,
            scheduler: self.scheduler.with_workers(cell.workers),
            anneal: self.anneal.with_rate(cell.learning_rate),
            plateau: self.plateau,
            meta_solver: self.solver.meta,
            refine_meta: self.solver.refine_meta,
            eval_solver: self.solver.eval,
            refine_eval: self.solver.refine_eval,
            randomize_meta_init: self.solver.randomize_meta_init,
            initial_policy: self.initial_policy,
            eval_fixed_only: self.solver.eval_fixed_only,
            rectified_support_threshold: self.solver.rectified_support_threshold,
            seed: cell.run_seed,
        }
    }

    /// Metadata lines written above the trace of `cell`.
    pub fn metadata_for(&self, cell: &Cell, trace: &ExploitabilityTrace) -> Vec<(String, String)> {
        let mut pairs: Vec<(String, String)> = trace
            .metadata
            .pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        pairs.push(("requested_workers".into(), cell.workers.to_string()));
        pairs.push(("anneal".into(), self.anneal.name().into()));
        pairs.push(("max_rounds".into(), self.scheduler.max_rounds.to_string()));
        pairs.push(("eval_every".into(), self.scheduler.eval_every.to_string()));
        pairs
    }
}

/// Runs one cell and returns its trace.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<ExploitabilityTrace> {
    let game = Arc::new(cfg.game_for(cell)?);
    Ok(run(game, &cfg.run_config(cell))?.trace)
}

/// Runs every cell, at most `parallelism` at a time, and writes one trace
/// file per cell into `out_dir`. Returns the paths in cell order.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir))?;
    let cells = cfg.cells();
    let threads = cfg
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let dim = cfg.dim();
    log::info!("running {} cells with parallelism {threads}", cells.len());
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let path = out_dir.join(cell.file_name(dim));
                let trace = run_cell(cfg, cell)?;
                write_trace(&path, &cfg.metadata_for(cell, &trace), &trace.records)?;
                log::info!(
                    "{}: final exploitability {:?}",
                    path.display(),
                    trace.final_exploitability()
                );
                Ok(path)
            })
            .collect()
    })
}

/// Writes `# key=value` metadata lines, the header and one row per record.
pub fn write_trace(
    path: &Path,
    metadata: &[(String, String)],
    records: &[TraceRecord],
) -> Result<()> {
    let file = File::create(path).map_err(HarnessError::io(path))?;
    let mut out = BufWriter::new(file);
    for (k, v) in metadata {
        writeln!(out, "# {k}={v}").map_err(HarnessError::io(path))?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(TRACE_HEADER)
        .map_err(HarnessError::csv(path))?;
    for r in records {
        writer
            .write_record([
                r.round.to_string(),
                r.global_step.to_string(),
                r.exploitability.to_string(),
                r.population_size.to_string(),
            ])
            .map_err(HarnessError::csv(path))?;
    }
    writer.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

/// A trace file read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub path: PathBuf,
    pub metadata: Vec<(String, String)>,
    pub records: Vec<TraceRecord>,
}

impl TraceFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let bad = |message: String| HarnessError::Trace {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(HarnessError::io(path))?;
    let mut metadata = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(HarnessError::io(path))?;
        let Some(comment) = line.strip_prefix('#') else {
            break;
        };
        let (k, v) = comment
            .trim()
            .split_once('=')
            .ok_or_else(|| bad(format!("metadata line {line:?} is not key=value")))?;
        metadata.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(HarnessError::csv(path))?;
    let header = reader.headers().map_err(HarnessError::csv(path))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(bad(format!(
            "header {:?}, expected {:?}",
            header,
            TRACE_HEADER.join(",")
        )));
    }
    let mut records = Vec::new();
    for row in reader.deserialize::<(u64, u64, f64, usize)>() {
        let (round, global_step, exploitability, population_size) =
            row.map_err(HarnessError::csv(path))?;
        records.push(TraceRecord {
            round,
            global_step,
            exploitability,
            population_size,
        });
    }
    Ok(TraceFile {
        path: path.to_path_buf(),
        metadata,
        records,
    })
}
