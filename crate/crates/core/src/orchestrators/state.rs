//! The round-based run state shared by every algorithm.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::jobs::Jobs;
use super::rectified::{RectifiedGeneration, RectifiedProgress};
use super::{AlgorithmKind, ExecutionMode, RunConfig, RunOutcome};
use crate::error::{Error, Result};
use crate::game::{exploitability, MixedStrategy, PayoffMatrix};
use crate::learners::{LearnerState, PlateauConfig};
use crate::meta_solver::{
    fictitious_play_from, restricted_game, solve_precise, solve_precise_from, MetaNash,
    SolverBudget,
};
use crate::population::{mixture, InitialPolicy, Population};
use crate::trace::{ExploitabilityTrace, TraceMetadata, TraceRecord, TraceSink};

/// Which workers a target update is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// The worker training the active policy at this level.
    Level(u32),
    /// Every worker (naive PSRO's shared fixed-population target).
    Shared,
}

pub(super) struct Worker {
    pub(super) learner: LearnerState,
    target: Option<Arc<MixedStrategy>>,
    /// Population indices the target mixes over.
    target_members: Vec<usize>,
    /// Population epoch (number of fixings so far) the target was computed at.
    target_epoch: u64,
    target_seq: u64,
    /// Whether the last step recorded a performance evaluation.
    evaluated: bool,
    /// Finished workers are kept around but no longer stepped.
    pub(super) frozen: bool,
}

impl Worker {
    pub(super) fn fresh(dim: usize, level: u32, cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            learner: fresh_learner(dim, level, cfg)?,
            target: None,
            target_members: Vec::new(),
            target_epoch: 0,
            target_seq: 0,
            evaluated: false,
            frozen: false,
        })
    }

    pub(super) fn set_target(
        &mut self,
        target: Arc<MixedStrategy>,
        members: Vec<usize>,
        epoch: u64,
    ) {
        self.target = Some(target);
        self.target_members = members;
        self.target_epoch = epoch;
    }

    /// Plateau test, only meaningful right after an evaluation.
    pub(super) fn plateaued_now(&self, cfg: &PlateauConfig) -> bool {
        self.evaluated && self.learner.is_plateaued(cfg)
    }
}

fn fresh_learner(dim: usize, level: u32, cfg: &RunConfig) -> Result<LearnerState> {
    Ok(LearnerState::new(
        MixedStrategy::uniform(dim)?,
        level,
        cfg.anneal,
        cfg.plateau.window,
    ))
}

/// Read-only view of one worker.
#[derive(Debug, Clone, Copy)]
pub struct WorkerView<'a> {
    pub level: u32,
    pub policy: &'a MixedStrategy,
    pub target: Option<&'a MixedStrategy>,
    pub target_members: &'a [usize],
    pub target_epoch: u64,
    pub step_count: u64,
}

struct TargetUpdate {
    slot: Slot,
    seq: u64,
    epoch: u64,
    members: Vec<usize>,
    target: Arc<MixedStrategy>,
}

/// Meta-Nash over the first `prefix` strategies of a prebuilt matrix.
struct TargetJob {
    slot: Slot,
    seq: u64,
    epoch: u64,
    matrix: Arc<PayoffMatrix>,
    strategies: Arc<Vec<Arc<MixedStrategy>>>,
    prefix: usize,
    budget: SolverBudget,
    refine: bool,
    start: usize,
}

impl TargetJob {
    fn solve(&self, matrix: &PayoffMatrix) -> Result<MetaNash> {
        if self.refine {
            solve_precise_from(matrix, self.budget, self.start)
        } else {
            fictitious_play_from(matrix, self.budget, self.start)
        }
    }

    fn run(self) -> Result<TargetUpdate> {
        let members: Vec<usize> = (0..self.prefix).collect();
        let meta = if self.prefix == self.matrix.dim() {
            self.solve(&self.matrix)?
        } else {
            self.solve(&restricted_game(&self.matrix, &members)?)?
        };
        let target = mixture(&self.strategies[..self.prefix], &meta.weights)?;
        Ok(TargetUpdate {
            slot: self.slot,
            seq: self.seq,
            epoch: self.epoch,
            members,
            target: Arc::new(target),
        })
    }
}

/// Whole-population exploitability measurement.
pub(super) struct EvalJob {
    round: u64,
    global_step: u64,
    matrix: PayoffMatrix,
    strategies: Vec<Arc<MixedStrategy>>,
    game: Arc<PayoffMatrix>,
    budget: SolverBudget,
    refine: bool,
}

impl EvalJob {
    pub(super) fn run(self) -> Result<TraceRecord> {
        let meta = if self.refine {
            solve_precise(&self.matrix, self.budget)?
        } else {
            fictitious_play_from(&self.matrix, self.budget, 0)?
        };
        let mix = mixture(&self.strategies, &meta.weights)?;
        Ok(TraceRecord {
            round: self.round,
            global_step: self.global_step,
            exploitability: exploitability(&self.game, &mix)?,
            population_size: self.strategies.len(),
        })
    }
}

/// Loop state of one run: the population, one learner per worker, the
/// counters and the trace so far.
pub struct RunState {
    pub(super) cfg: RunConfig,
    pub(super) game: Arc<PayoffMatrix>,
    pub(super) population: Population,
    pub(super) workers: Vec<Worker>,
    pub(super) round: u64,
    global_step: u64,
    /// Incremented whenever the fixed set changes.
    pub(super) epoch: u64,
    next_seq: u64,
    rng: ChaCha8Rng,
    targets: Jobs<Result<TargetUpdate>>,
    evals: Jobs<Result<TraceRecord>>,
    pending_evals: BTreeSet<u64>,
    finished_evals: BTreeMap<u64, TraceRecord>,
    records: Vec<TraceRecord>,
    emitted: usize,
    pub(super) promotion_rounds: Vec<u64>,
    pub(super) rectified: RectifiedProgress,
    pub(super) generations: Vec<RectifiedGeneration>,
    pub(super) terminated: bool,
    /// Measurement reused once the population can no longer change.
    pub(super) frozen_eval: Option<(f64, usize)>,
}

impl RunState {
    pub fn new(game: Arc<PayoffMatrix>, cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let threaded = cfg.scheduler.mode == ExecutionMode::Threaded;
        // The base of the DCH hierarchy is a frozen uniform policy.
        let initial = match cfg.algorithm {
            AlgorithmKind::Dch => InitialPolicy::Uniform,
            _ => cfg.initial_policy,
        };
        let population = Population::new(game.clone(), initial)?;
        let mut state = Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            game,
            population,
            workers: Vec::new(),
            round: 0,
            global_step: 0,
            epoch: 0,
            next_seq: 0,
            targets: Jobs::new(threaded),
            evals: Jobs::new(threaded),
            pending_evals: BTreeSet::new(),
            finished_evals: BTreeMap::new(),
            records: Vec::new(),
            emitted: 0,
            promotion_rounds: Vec::new(),
            rectified: RectifiedProgress::default(),
            generations: Vec::new(),
            terminated: false,
            frozen_eval: None,
        };
        let workers = state.cfg.workers();
        let dim = state.game.dim();
        match state.cfg.algorithm {
            AlgorithmKind::SequentialPsro | AlgorithmKind::P2sro | AlgorithmKind::Dch => {
                for _ in 0..workers {
                    state.add_level_worker()?;
                }
                state.refresh_level_targets()?;
            }
            AlgorithmKind::NaivePsro => {
                for _ in 0..workers {
                    state.workers.push(Worker::fresh(dim, 0, &state.cfg)?);
                }
                state.refresh_shared_target()?;
            }
            AlgorithmKind::SelfPlay => {
                state.workers.push(Worker::fresh(dim, 0, &state.cfg)?);
                state.target_latest_fixed();
            }
            AlgorithmKind::RectifiedPsro => {}
        }
        // Workers cannot start without a target; this is the only point
        // where the coordinator waits for one.
        let initial_targets = state.targets.wait_all();
        state.install_targets(initial_targets)?;
        state.schedule_evaluation()?;
        state.collect_evals(false)?;
        Ok(state)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Trace records released so far, in round order.
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn generations(&self) -> &[RectifiedGeneration] {
        &self.generations
    }

    pub fn workers(&self) -> Vec<WorkerView<'_>> {
        self.workers
            .iter()
            .map(|w| WorkerView {
                level: w.learner.level(),
                policy: w.learner.policy(),
                target: w.target.as_deref(),
                target_members: &w.target_members,
                target_epoch: w.target_epoch,
                step_count: w.learner.step_count(),
            })
            .collect()
    }

    pub fn is_done(&self) -> bool {
        let s = &self.cfg.scheduler;
        if self.round >= s.max_rounds {
            return true;
        }
        match s.max_steps {
            // A terminated run takes no more steps, so a step budget alone
            // would never be reached.
            Some(limit) => self.global_step >= limit || self.terminated,
            None => false,
        }
    }

    /// Advances the run by one round of the configured algorithm.
    pub fn step_round(&mut self) -> Result<()> {
        if self.is_done() {
            return Err(Error::State("run budget exhausted".into()));
        }
        self.round += 1;
        let ready = self.targets.drain();
        self.install_targets(ready)?;
        match self.cfg.algorithm {
            AlgorithmKind::SequentialPsro | AlgorithmKind::P2sro => self.p2sro_round()?,
            AlgorithmKind::NaivePsro => self.naive_round()?,
            AlgorithmKind::Dch => self.dch_round()?,
            AlgorithmKind::SelfPlay => self.selfplay_round()?,
            AlgorithmKind::RectifiedPsro => self.rectified_round()?,
        }
        if self.round.is_multiple_of(self.cfg.scheduler.eval_every) {
            self.schedule_evaluation()?;
        }
        self.collect_evals(false)
    }

    /// Pipeline round. Sequential PSRO is the single-worker case.
    ///
    /// Every learner steps against its cached target, snapshots are
    /// published, and the lowest learner is promoted once it plateaus
    /// against a target computed for the current fixed set. A promotion adds
    /// a fresh learner on top and recomputes every target.
    pub(super) fn p2sro_round(&mut self) -> Result<()> {
        self.step_workers()?;
        self.publish_snapshots()?;
        let plateau = self.cfg.plateau;
        let promote = self
            .workers
            .first()
            .is_some_and(|w| w.plateaued_now(&plateau) && w.target_epoch == self.epoch);
        if promote {
            self.population.promote_lowest_active()?;
            self.workers.remove(0);
            self.note_fixing();
            self.add_level_worker()?;
            self.refresh_level_targets()?;
        } else if self.refresh_due() {
            self.refresh_level_targets()?;
        }
        Ok(())
    }

    /// DCH round: a fixed hierarchy where nothing is ever promoted.
    pub(super) fn dch_round(&mut self) -> Result<()> {
        self.step_workers()?;
        self.publish_snapshots()?;
        if self.refresh_due() {
            self.refresh_level_targets()?;
        }
        Ok(())
    }

    /// Naive parallel PSRO: all workers train against the fixed-set
    /// meta-Nash. The first plateaued worker (lowest index) is fixed and
    /// restarts from uniform.
    pub(super) fn naive_round(&mut self) -> Result<()> {
        self.step_workers()?;
        let plateau = self.cfg.plateau;
        let epoch = self.epoch;
        let plateaued = self
            .workers
            .iter()
            .position(|w| w.plateaued_now(&plateau) && w.target_epoch == epoch);
        if let Some(i) = plateaued {
            let policy = self.workers[i].learner.policy().clone();
            self.population.add_fixed_policy(policy)?;
            self.note_fixing();
            self.workers[i].learner = fresh_learner(self.game.dim(), 0, &self.cfg)?;
            self.refresh_shared_target()?;
        } else if self.refresh_due() {
            self.refresh_shared_target()?;
        }
        Ok(())
    }

    /// Self-play: one worker against the most recently fixed policy; a
    /// plateaued snapshot becomes the new latest policy and training goes on.
    pub(super) fn selfplay_round(&mut self) -> Result<()> {
        self.step_workers()?;
        let plateau = self.cfg.plateau;
        if self.workers[0].plateaued_now(&plateau) {
            let policy = self.workers[0].learner.policy().clone();
            self.population.add_fixed_policy(policy)?;
            self.note_fixing();
            self.target_latest_fixed();
        }
        Ok(())
    }

    fn refresh_due(&self) -> bool {
        self.round
            .is_multiple_of(self.cfg.scheduler.meta_refresh_period)
    }

    pub(super) fn note_fixing(&mut self) {
        self.epoch += 1;
        self.promotion_rounds.push(self.round);
    }

    fn add_level_worker(&mut self) -> Result<()> {
        let level = self
            .population
            .add_active_policy(MixedStrategy::uniform(self.game.dim())?)?;
        self.workers
            .push(Worker::fresh(self.game.dim(), level, &self.cfg)?);
        Ok(())
    }

    fn target_latest_fixed(&mut self) {
        let latest = self.population.fixed_count() - 1;
        let target = self.population.strategy(latest).clone();
        let epoch = self.epoch;
        self.workers[0].set_target(target, vec![latest], epoch);
    }

    /// Steps every worker that has a target and is not frozen. In threaded
    /// mode the steps run in parallel; each worker owns its learner.
    pub(super) fn step_workers(&mut self) -> Result<()> {
        let game = &*self.game;
        let plateau = &self.cfg.plateau;
        let step = |w: &mut Worker| -> Result<u64> {
            w.evaluated = false;
            if w.frozen {
                return Ok(0);
            }
            let Some(target) = w.target.as_deref() else {
                return Ok(0);
            };
            w.learner.train_step(target, game)?;
            w.evaluated = w.learner.evaluate_if_due(target, game, plateau)?;
            Ok(1)
        };
        let threaded = self.cfg.scheduler.mode == ExecutionMode::Threaded;
        let stepped: u64 = if threaded && self.workers.len() > 1 {
            self.workers
                .par_iter_mut()
                .map(step)
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum()
        } else {
            let mut total = 0;
            for w in &mut self.workers {
                total += step(w)?;
            }
            total
        };
        self.global_step += stepped;
        Ok(())
    }

    fn publish_snapshots(&mut self) -> Result<()> {
        for w in &self.workers {
            self.population
                .update_active_policy(w.learner.level(), Arc::new(w.learner.policy().clone()))?;
        }
        Ok(())
    }

    /// Recomputes the target of every level-based worker: the meta-Nash
    /// over everything below its level. Those sets are prefixes of the
    /// population, so one payoff matrix serves all of them.
    fn refresh_level_targets(&mut self) -> Result<()> {
        let all: Vec<usize> = (0..self.population.len()).collect();
        let matrix = Arc::new(self.population.payoff_matrix(&all)?);
        let strategies = Arc::new(self.population_strategies(self.population.len()));
        let levels: Vec<u32> = self.workers.iter().map(|w| w.learner.level()).collect();
        for level in levels {
            let prefix = self.population.indices_below(level).len();
            self.submit_target(
                Slot::Level(level),
                matrix.clone(),
                strategies.clone(),
                prefix,
            );
        }
        let ready = self.targets.drain();
        self.install_targets(ready)
    }

    /// Recomputes the shared fixed-set target of naive PSRO.
    fn refresh_shared_target(&mut self) -> Result<()> {
        let fixed = self.population.fixed_count();
        let members: Vec<usize> = (0..fixed).collect();
        let matrix = Arc::new(self.population.payoff_matrix(&members)?);
        let strategies = Arc::new(self.population_strategies(fixed));
        self.submit_target(Slot::Shared, matrix, strategies, fixed);
        let ready = self.targets.drain();
        self.install_targets(ready)
    }

    fn population_strategies(&self, count: usize) -> Vec<Arc<MixedStrategy>> {
        (0..count)
            .map(|i| self.population.strategy(i).clone())
            .collect()
    }

    fn submit_target(
        &mut self,
        slot: Slot,
        matrix: Arc<PayoffMatrix>,
        strategies: Arc<Vec<Arc<MixedStrategy>>>,
        prefix: usize,
    ) {
        let start = if self.cfg.randomize_meta_init {
            self.rng.gen_range(0..prefix)
        } else {
            0
        };
        self.next_seq += 1;
        let job = TargetJob {
            slot,
            seq: self.next_seq,
            epoch: self.epoch,
            matrix,
            strategies,
            prefix,
            budget: self.cfg.meta_solver,
            refine: self.cfg.refine_meta,
            start,
        };
        self.targets.submit(move || job.run());
    }

    /// Installs finished targets. Results for promoted levels are dropped,
    /// and a result never replaces a newer one.
    fn install_targets(&mut self, updates: Vec<Result<TargetUpdate>>) -> Result<()> {
        for update in updates {
            let update = update?;
            for w in &mut self.workers {
                let addressed = match update.slot {
                    Slot::Shared => true,
                    Slot::Level(level) => w.learner.level() == level,
                };
                if addressed && update.seq > w.target_seq {
                    w.target = Some(update.target.clone());
                    w.target_members.clone_from(&update.members);
                    w.target_epoch = update.epoch;
                    w.target_seq = update.seq;
                }
            }
        }
        Ok(())
    }

    /// Builds the measurement for the current state: the meta-Nash over the
    /// whole population plus any in-training policies that are not
    /// registered in it.
    pub(super) fn evaluation_job(&self) -> Result<EvalJob> {
        let fixed_only = self.cfg.eval_fixed_only;
        let count = if fixed_only {
            self.population.fixed_count()
        } else {
            self.population.len()
        };
        let members: Vec<usize> = (0..count).collect();
        let unregistered = matches!(
            self.cfg.algorithm,
            AlgorithmKind::NaivePsro | AlgorithmKind::SelfPlay | AlgorithmKind::RectifiedPsro
        );
        let extras: Vec<Arc<MixedStrategy>> = if unregistered && !fixed_only {
            self.workers
                .iter()
                .map(|w| Arc::new(w.learner.policy().clone()))
                .collect()
        } else {
            Vec::new()
        };
        let extra_refs: Vec<&MixedStrategy> = extras.iter().map(|s| s.as_ref()).collect();
        let matrix = self.population.payoff_matrix_with(&members, &extra_refs)?;
        let mut strategies = self.population_strategies(count);
        strategies.extend(extras);
        Ok(EvalJob {
            round: self.round,
            global_step: self.global_step,
            matrix,
            strategies,
            game: self.game.clone(),
            budget: self.cfg.eval_solver,
            refine: self.cfg.refine_eval,
        })
    }

    fn schedule_evaluation(&mut self) -> Result<()> {
        if let Some((value, size)) = self.frozen_eval {
            self.finished_evals.insert(
                self.round,
                TraceRecord {
                    round: self.round,
                    global_step: self.global_step,
                    exploitability: value,
                    population_size: size,
                },
            );
            return Ok(());
        }
        let job = self.evaluation_job()?;
        self.pending_evals.insert(self.round);
        self.evals.submit(move || job.run());
        Ok(())
    }

    /// Moves finished measurements into the trace, keeping round order even
    /// when background jobs complete out of order.
    fn collect_evals(&mut self, block: bool) -> Result<()> {
        let done = if block {
            self.evals.wait_all()
        } else {
            self.evals.drain()
        };
        for record in done {
            let record = record?;
            self.pending_evals.remove(&record.round);
            self.finished_evals.insert(record.round, record);
        }
        while let Some((&round, _)) = self.finished_evals.first_key_value() {
            if self.pending_evals.first().is_some_and(|&p| p < round) {
                break;
            }
            let record = self
                .finished_evals
                .remove(&round)
                .expect("key just observed");
            self.records.push(record);
        }
        Ok(())
    }

    pub(super) fn flush_records(&mut self, sink: &mut dyn TraceSink) -> Result<()> {
        for record in &self.records[self.emitted..] {
            sink.record(record);
        }
        self.emitted = self.records.len();
        Ok(())
    }

    pub fn metadata(&self) -> TraceMetadata {
        TraceMetadata {
            algorithm: self.cfg.algorithm,
            dim: self.game.dim(),
            learning_rate: self.cfg.anneal.initial_rate(),
            workers: self.cfg.workers(),
            game: self.game.origin(),
            run_seed: self.cfg.seed,
        }
    }

    /// Waits for outstanding measurements and packages the result.
    pub fn finish(mut self, sink: &mut dyn TraceSink) -> Result<RunOutcome> {
        self.collect_evals(true)?;
        if !self.pending_evals.is_empty() {
            return Err(Error::State(
                "a background evaluation never completed".into(),
            ));
        }
        self.flush_records(sink)?;
        let trace = ExploitabilityTrace {
            metadata: self.metadata(),
            records: self.records,
        };
        trace.validate()?;
        Ok(RunOutcome {
            trace,
            population: self.population,
            promotion_rounds: self.promotion_rounds,
            generations: self.generations,
            terminated_early: self.terminated,
            rounds: self.round,
            global_steps: self.global_step,
        })
    }
}
