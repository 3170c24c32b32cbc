//! Parallel-tempered MCMC over independent stacks of tempered chains.
//!
//! Each stack is a ladder of chains. Chains advance independently between
//! swap rounds, so a block of iterations runs in parallel across every
//! chain of every stack. Randomness comes from one root seed split into a
//! stream per chain and a swap stream per stack, so the output does not
//! depend on the number of worker threads.

pub mod chain;
pub mod checkpoint;
pub mod ladder;
pub mod store;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Target;
use crate::prior::WhitenMap;
use crate::proposal::{ProposalKind, ProposalState};

pub use chain::{stream_rng, ChainState, Walker};
pub use ladder::{swap_step, Exchange, Ladder};

/// Columns appended to every recorded parameter row.
pub const EXTRA_COLUMNS: [&str; 2] = ["log_prior", "log_likelihood"];

/// Number of adaptation snapshots kept over a run.
const HISTORY_POINTS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub iterations: u64,
    pub n_stacks: usize,
    pub n_temps: usize,
    pub beta_min: f64,
    /// Iterations between swap rounds; `None` or 0 disables swaps.
    pub swap_interval: Option<u64>,
    pub proposal: ProposalKind,
    /// Initial step size of the untempered chain.
    pub eta0: f64,
    /// aGRW adaptation timescale, in samples.
    pub timescale: f64,
    pub step_gain: f64,
    pub ladder_gain: f64,
    /// Ladder adaptation step is `ladder_gain / (rounds + ladder_timescale)`.
    pub ladder_timescale: f64,
    pub adapt_ladder: bool,
    /// Step-size and ladder adaptation stop after this fraction of the run.
    pub adapt_until_fraction: f64,
    /// Record every `thinning`-th untempered state.
    pub thinning: u64,
    pub seed: u64,
    pub checkpoint_interval: Option<u64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 10_000,
            n_stacks: 4,
            n_temps: 8,
            beta_min: 1e-3,
            swap_interval: Some(10),
            proposal: ProposalKind::Pcn,
            eta0: 0.1,
            timescale: 10.0,
            step_gain: 1.0,
            ladder_gain: 50.0,
            ladder_timescale: 1000.0,
            adapt_ladder: true,
            adapt_until_fraction: 1.0,
            thinning: 10,
            seed: 0,
            checkpoint_interval: None,
        }
    }
}

impl SamplerConfig {
    /// All violated constraints, prefixed with the field name.
    pub fn problems(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.iterations == 0 {
            e.push("sampler.iterations must be at least 1".to_string());
        }
        if self.n_stacks == 0 {
            e.push("sampler.n_stacks must be at least 1".to_string());
        }
        if self.n_temps == 0 {
            e.push("sampler.n_temps must be at least 1".to_string());
        }
        if self.n_temps > 1 && !(self.beta_min > 0.0 && self.beta_min < 1.0) {
            e.push(format!("sampler.beta_min must lie in (0, 1), got {}", self.beta_min));
        }
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            e.push(format!("sampler.eta0 must be positive, got {}", self.eta0));
        }
        if self.proposal == ProposalKind::Pcn && self.eta0 > 1.0 {
            e.push(format!("sampler.eta0 must be at most 1 for pcn, got {}", self.eta0));
        }
        if !(self.timescale.is_finite() && self.timescale > 0.0) {
            e.push(format!("sampler.timescale must be positive, got {}", self.timescale));
        }
        if !(self.step_gain.is_finite() && self.step_gain >= 0.0) {
            e.push(format!("sampler.step_gain must be non-negative, got {}", self.step_gain));
        }
        if !(self.ladder_gain.is_finite() && self.ladder_gain >= 0.0) {
            e.push(format!("sampler.ladder_gain must be non-negative, got {}", self.ladder_gain));
        }
        if !(self.ladder_timescale.is_finite() && self.ladder_timescale >= 0.0) {
            e.push(format!(
                "sampler.ladder_timescale must be non-negative, got {}",
                self.ladder_timescale
            ));
        }
        if !(0.0..=1.0).contains(&self.adapt_until_fraction) {
            e.push(format!(
                "sampler.adapt_until_fraction must lie in [0, 1], got {}",
                self.adapt_until_fraction
            ));
        }
        if self.thinning == 0 {
            e.push("sampler.thinning must be at least 1".to_string());
        }
        if self.checkpoint_interval == Some(0) {
            e.push("sampler.checkpoint_interval must be at least 1".to_string());
        }
        e
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.problems();
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    fn swap_every(&self) -> Option<u64> {
        self.swap_interval.filter(|&s| s > 0)
    }

    /// Iteration at which adaptation stops.
    pub fn freeze_at(&self) -> u64 {
        (self.adapt_until_fraction * self.iterations as f64).ceil() as u64
    }

    fn history_every(&self) -> u64 {
        (self.iterations / HISTORY_POINTS).max(1)
    }

    /// Initial step size at inverse temperature `beta`: `eta0 / sqrt(beta)`.
    pub fn initial_eta(&self, beta: f64) -> f64 {
        let eta = self.eta0 / beta.sqrt();
        if self.proposal == ProposalKind::Pcn {
            eta.min(1.0)
        } else {
            eta
        }
    }
}

fn ladder_for(cfg: &SamplerConfig) -> Result<Ladder> {
    if cfg.n_temps == 1 {
        Ladder::from_betas(vec![1.0])
    } else {
        Ladder::geometric(cfg.n_temps, cfg.beta_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackState {
    pub ladder: Ladder,
    /// Ordered hottest-last, aligned with `ladder.betas()`.
    pub chains: Vec<ChainState>,
    pub swap_rng: ChaCha8Rng,
    /// Recorded rows: parameters then `EXTRA_COLUMNS`, row-major.
    pub samples: Vec<f64>,
}

/// Adaptation state at one iteration, per stack and chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: u64,
    pub eta: Vec<Vec<f64>>,
    pub betas: Vec<Vec<f64>>,
    pub acceptance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    /// Iterations completed.
    pub iteration: u64,
    pub dim: usize,
    pub config: SamplerConfig,
    pub stacks: Vec<StackState>,
    pub history: Vec<Snapshot>,
}

impl RunState {
    pub fn row_width(&self) -> usize {
        self.dim + EXTRA_COLUMNS.len()
    }

    pub fn n_rows(&self, stack: usize) -> usize {
        self.stacks[stack].samples.len() / self.row_width()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            iteration: self.iteration,
            eta: self
                .stacks
                .iter()
                .map(|s| s.chains.iter().map(|c| c.proposal.eta).collect())
                .collect(),
            betas: self.stacks.iter().map(|s| s.ladder.betas().to_vec()).collect(),
            acceptance: self
                .stacks
                .iter()
                .map(|s| s.chains.iter().map(|c| c.proposal.acceptance_fraction()).collect())
                .collect(),
        }
    }
}

pub struct Sampler<'a, T: Target + ?Sized> {
    target: &'a T,
    config: SamplerConfig,
    whiten: WhitenMap,
}

impl<'a, T: Target + ?Sized> Sampler<'a, T> {
    pub fn new(target: &'a T, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Sampler {
            whiten: target.prior().whiten_map(),
            target,
            config,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn whiten(&self) -> &WhitenMap {
        &self.whiten
    }

    /// Fresh state: every chain starts from its own prior draw.
    pub fn init(&self) -> Result<RunState> {
        let cfg = &self.config;
        let dim = self.target.dim();
        let stacks = (0..cfg.n_stacks)
            .into_par_iter()
            .map(|s| {
                let ladder = ladder_for(cfg)?;
                let chains = ladder
                    .betas()
                    .par_iter()
                    .enumerate()
                    .map(|(k, &beta)| {
                        let proposal = ProposalState::new(
                            cfg.proposal,
                            cfg.initial_eta(beta),
                            dim,
                            cfg.timescale,
                            cfg.step_gain,
                        )?;
                        let rng = stream_rng(cfg.seed, 1 + (s as u64) * 65_536 + k as u64);
                        Ok(ChainState::from_prior(self.target, &self.whiten, proposal, rng))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(StackState {
                    ladder,
                    chains,
                    swap_rng: stream_rng(cfg.seed, (s as u64 + 1) << 32),
                    samples: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut state = RunState {
            iteration: 0,
            dim,
            config: cfg.clone(),
            stacks,
            history: Vec::new(),
        };
        state.history.push(state.snapshot());
        Ok(state)
    }

    /// Checks that `state` was produced by a sampler with this configuration.
    pub fn check_state(&self, state: &RunState) -> Result<()> {
        if state.config != self.config {
            return Err(Error::Checkpoint("sampler settings differ from the checkpoint".into()));
        }
        if state.dim != self.target.dim() {
            return Err(Error::Checkpoint("parameter dimension differs from the checkpoint".into()));
        }
        Ok(())
    }

    fn advance_stack(&self, stack: &mut StackState, start: u64, end: u64) -> Result<()> {
        let cfg = &self.config;
        let freeze = cfg.freeze_at();
        let betas = stack.ladder.betas().to_vec();
        let target = self.target;
        let whiten = &self.whiten;
        let recorded = stack
            .chains
            .par_iter_mut()
            .enumerate()
            .map(|(k, chain)| {
                let mut rows = Vec::new();
                for t in start..end {
                    if t >= freeze {
                        chain.proposal.adapting = false;
                    }
                    chain.step(target, whiten, betas[k])?;
                    if k == 0 && (t + 1) % cfg.thinning == 0 {
                        rows.extend(whiten.unwhiten(&chain.walker.z));
                        rows.push(chain.walker.log_prior);
                        rows.push(chain.walker.log_like);
                    }
                }
                Ok(rows)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        if let Some(rows) = recorded.into_iter().next() {
            stack.samples.extend(rows);
        }
        Ok(())
    }

    fn swap_round(&self, stack: &mut StackState, iteration: u64) {
        let mut walkers: Vec<Walker> = stack
            .chains
            .iter_mut()
            .map(|c| std::mem::take(&mut c.walker))
            .collect();
        swap_step(&mut stack.ladder, &mut walkers, &mut stack.swap_rng);
        for (c, w) in stack.chains.iter_mut().zip(walkers) {
            c.walker = w;
        }
        if self.config.adapt_ladder && iteration <= self.config.freeze_at() {
            let n = stack.ladder.rounds() as f64;
            stack.ladder.adapt(self.config.ladder_gain / (n + self.config.ladder_timescale));
        }
    }

    /// Runs until `until` iterations have completed, calling `checkpoint`
    /// at every checkpoint interval. Block boundaries never change the
    /// sample stream, so stopping and resuming is exact.
    pub fn advance(
        &self,
        state: &mut RunState,
        until: u64,
        checkpoint: &mut dyn FnMut(&RunState) -> Result<()>,
    ) -> Result<()> {
        let cfg = &self.config;
        let until = until.min(cfg.iterations);
        let history_every = cfg.history_every();
        let next_multiple = |t: u64, m: u64| (t / m + 1) * m;
        while state.iteration < until {
            let t = state.iteration;
            let mut next = until.min(next_multiple(t, history_every));
            if let Some(s) = cfg.swap_every() {
                next = next.min(next_multiple(t, s));
            }
            if let Some(c) = cfg.checkpoint_interval {
                next = next.min(next_multiple(t, c));
            }
            state
                .stacks
                .par_iter_mut()
                .try_for_each(|s| self.advance_stack(s, t, next))?;
            state.iteration = next;
            if let Some(s) = cfg.swap_every() {
                if next % s == 0 {
                    state
                        .stacks
                        .par_iter_mut()
                        .for_each(|st| self.swap_round(st, next));
                }
            }
            if next % history_every == 0 || next == cfg.iterations {
                state.history.push(state.snapshot());
            }
            if let Some(c) = cfg.checkpoint_interval {
                if next % c == 0 && next < cfg.iterations {
                    checkpoint(state)?;
                }
            }
        }
        Ok(())
    }

    /// A complete run from a fresh state.
    pub fn run(&self) -> Result<RunState> {
        let mut state = self.init()?;
        self.advance(&mut state, self.config.iterations, &mut |_| Ok(()))?;
        Ok(state)
    }
}

/// Runs `f` on a pool of `threads` workers (machine parallelism if `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
