//! The self-play / fitting loop.
//!
//! Each iteration clears the buffer, fills it with whole episodes played by
//! the current parameters under the improved policy, then fits the policy
//! head to the stored improved policies and the action-value head to the
//! lambda-returns.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{play_match, GreedyAgent, RandomAgent};
use crate::approx::{optimizer_step, NetOutput, OptimizerState, Parameters, SampleRecord, TrainBatch};
use crate::config::{Hyperparameters, TrainConfig};
use crate::error::{Error, Result};
use crate::games::{self, GameSpec, GameState, LegalMask, Observation};
use crate::regopt::{entropy, improved_policy, ActionDistribution, RegWeights};
use crate::returns::{lambda_returns, state_value_estimate, StepSignal};
use crate::rng::{self, Rng};

pub const METRICS_SCHEMA: &str = "klent.metrics.v1";

const TAG_COLLECT: u64 = 1;
const TAG_FIT: u64 = 2;
const TAG_EVAL: u64 = 3;

/// The improved policy, its state value, and the raw network output at one state.
#[derive(Clone, Debug)]
pub struct ActingPolicy {
    pub improved: ActionDistribution,
    pub vhat: f64,
    pub output: NetOutput,
}

pub fn acting_policy(params: &Parameters, obs: &Observation, mask: &LegalMask, w: RegWeights) -> Result<ActingPolicy> {
    let output = params.forward(obs, mask)?;
    let prior = output.policy();
    let improved = improved_policy(&output.q, &prior, w)?;
    let vhat = state_value_estimate(&improved, &output.q)?;
    Ok(ActingPolicy { improved, vhat, output })
}

/// One ply as recorded during an episode, before returns are known.
#[derive(Clone, Debug)]
pub struct Ply {
    pub obs: Observation,
    pub action: usize,
    pub target: ActionDistribution,
    pub signal: StepSignal,
}

/// Plays from `state` to the end, sampling from the improved policy. When
/// `first_action` is given it replaces the sample at the first ply.
pub fn rollout(
    state: &GameState,
    params: &Parameters,
    w: RegWeights,
    rng: &mut Rng,
    max_plies: usize,
    first_action: Option<usize>,
) -> Result<Vec<Ply>> {
    let mut plies = Vec::new();
    let mut state = state.clone();
    let mut forced = first_action;
    while !state.is_terminal() {
        if plies.len() >= max_plies {
            return Err(Error::EpisodeTooLong(max_plies));
        }
        let mask = games::legal_actions(&state)?;
        let obs = state.observe();
        let acting = acting_policy(params, &obs, &mask, w)?;
        let u: f64 = rng.gen();
        let action = forced.take().unwrap_or_else(|| acting.improved.sample_with(u));
        let mover = state.to_move();
        let (next, reward) = games::step(&state, action)?;
        plies.push(Ply {
            obs,
            action,
            target: acting.improved,
            signal: StepSignal {
                reward,
                vhat: acting.vhat,
                mover,
            },
        });
        state = next;
    }
    Ok(plies)
}

/// Plays one full game and returns one record per ply.
pub fn run_episode(
    spec: GameSpec,
    params: &Parameters,
    hp: &Hyperparameters,
    rng: &mut Rng,
    max_plies: usize,
    version: u64,
) -> Result<Vec<SampleRecord>> {
    let start = games::reset(spec)?;
    let plies = rollout(&start, params, hp.weights()?, rng, max_plies, None)?;
    let signals: Vec<StepSignal> = plies.iter().map(|p| p.signal).collect();
    let targets = lambda_returns(&signals, hp.lambda, hp.gamma)?;
    Ok(plies
        .into_iter()
        .zip(targets.g_lambda)
        .map(|(p, g)| SampleRecord {
            obs: p.obs,
            action: p.action,
            target: p.target,
            g_lambda: g,
            version,
        })
        .collect())
}

#[derive(Clone, Debug, Default)]
pub struct SampleBuffer {
    pub records: Vec<SampleRecord>,
    pub capacity: usize,
    pub episodes: usize,
    /// Simulator evaluations spent on the kept episodes.
    pub plies: u64,
}

impl SampleBuffer {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_entropy(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| entropy(&r.target)).sum::<f64>() / self.records.len() as f64
    }
}

/// Collects whole episodes until at least `target` records are held.
///
/// With several workers each round plays one episode per worker in parallel;
/// episodes are appended in worker order and the rest of the round is
/// dropped once the target is met, so the result depends only on
/// `(seed, iteration, workers)`.
pub fn fill_buffer(cfg: &TrainConfig, params: &Parameters, iteration: u64, target: usize) -> Result<SampleBuffer> {
    let mut workers: Vec<Rng> = (0..cfg.workers as u64)
        .map(|w| rng::stream(cfg.seed, &[TAG_COLLECT, iteration, w]))
        .collect();
    let max_plies = cfg.max_plies();
    let mut buf = SampleBuffer {
        capacity: target,
        ..SampleBuffer::default()
    };
    'rounds: loop {
        let episodes: Vec<Result<Vec<SampleRecord>>> = if workers.len() == 1 {
            vec![run_episode(
                cfg.game,
                params,
                &cfg.hp,
                &mut workers[0],
                max_plies,
                iteration,
            )]
        } else {
            workers
                .par_iter_mut()
                .map(|r| run_episode(cfg.game, params, &cfg.hp, r, max_plies, iteration))
                .collect()
        };
        for ep in episodes {
            let ep = ep?;
            buf.plies += ep.len() as u64;
            buf.episodes += 1;
            buf.records.extend(ep);
            if buf.records.len() >= target {
                break 'rounds;
            }
        }
    }
    Ok(buf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub schema: String,
    pub iteration: u64,
    pub sim_evals: u64,
    pub mean_loss: f64,
    pub mean_entropy: f64,
    pub mean_episode_length: f64,
    pub episodes: usize,
    pub eval_win_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_seconds: Option<f64>,
}

impl IterationMetrics {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

pub struct Trainer {
    cfg: TrainConfig,
    params: Parameters,
    opt: OptimizerState,
    iteration: u64,
    sim_evals: u64,
    last_buffer_entropy: f64,
    started: Instant,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = Parameters::for_game(cfg.game, cfg.backend, &cfg.hidden, rng::derive_seed(cfg.seed, &[0]));
        Self::resume(cfg, params, None, 0, 0)
    }

    pub fn resume(
        cfg: TrainConfig,
        params: Parameters,
        opt: Option<OptimizerState>,
        iteration: u64,
        sim_evals: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let opt = opt.unwrap_or_else(|| OptimizerState::new(cfg.adam, params.theta().len()));
        Ok(Trainer {
            cfg,
            params,
            opt,
            iteration,
            sim_evals,
            last_buffer_entropy: 0.0,
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.opt
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn sim_evals(&self) -> u64 {
        self.sim_evals
    }

    pub fn into_params(self) -> Parameters {
        self.params
    }

    /// Records the next iteration may collect without the total exceeding the
    /// budget, allowing for the final episode's overshoot.
    fn collection_target(&self) -> usize {
        let slack = self.cfg.max_plies().saturating_sub(1) as u64;
        let room = self.cfg.budget.saturating_sub(self.sim_evals).saturating_sub(slack);
        room.min(self.cfg.capacity as u64) as usize
    }

    pub fn finished(&self) -> bool {
        self.collection_target() == 0
    }

    pub fn collect(&self) -> Result<SampleBuffer> {
        fill_buffer(&self.cfg, &self.params, self.iteration, self.collection_target())
    }

    /// Epochs of shuffled minibatch Adam steps over `buffer`; returns the mean
    /// minibatch loss. Parameters are untouched by a step whose loss or
    /// gradient is non-finite.
    pub fn fit(&mut self, buffer: &SampleBuffer) -> Result<f64> {
        if let Some(r) = buffer.records.iter().find(|r| r.version != self.iteration) {
            return Err(Error::Config(format!(
                "off-policy record from version {} in iteration {}",
                r.version, self.iteration
            )));
        }
        let mut rng = rng::stream(self.cfg.seed, &[TAG_FIT, self.iteration]);
        let mut order: Vec<usize> = (0..buffer.len()).collect();
        let mut total = 0.0;
        let mut steps = 0usize;
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let batch = TrainBatch::new(chunk.iter().map(|&i| &buffer.records[i]).collect())?;
                self.params.register(&batch);
                let (loss, grad) = self.params.loss_and_gradient(&batch)?;
                optimizer_step(&mut self.params, &grad, &mut self.opt)?;
                total += loss;
                steps += 1;
            }
        }
        Ok(if steps == 0 { 0.0 } else { total / steps as f64 })
    }

    /// Greedy policy-head agent vs uniform random, alternating colors.
    pub fn evaluate(&self, games: usize) -> Result<f64> {
        let agent = GreedyAgent::new(self.params.clone());
        let seed = rng::derive_seed(self.cfg.seed, &[TAG_EVAL, self.iteration]);
        let result = play_match(&agent, &RandomAgent, self.cfg.game, games, seed)?;
        Ok(result.win_rate())
    }

    pub fn iterate(&mut self) -> Result<IterationMetrics> {
        let buffer = self.collect()?;
        self.sim_evals += buffer.plies;
        self.last_buffer_entropy = buffer.mean_entropy();
        let mean_loss = self.fit(&buffer)?;
        let eval_win_rate = if self.cfg.eval_every > 0 && (self.iteration + 1).is_multiple_of(self.cfg.eval_every) {
            Some(self.evaluate(self.cfg.eval_games)?)
        } else {
            None
        };
        let metrics = IterationMetrics {
            schema: METRICS_SCHEMA.to_string(),
            iteration: self.iteration,
            sim_evals: self.sim_evals,
            mean_loss,
            mean_entropy: self.last_buffer_entropy,
            mean_episode_length: buffer.plies as f64 / buffer.episodes.max(1) as f64,
            episodes: buffer.episodes,
            eval_win_rate,
            wall_clock_seconds: self.cfg.timing.then(|| self.started.elapsed().as_secs_f64()),
        };
        self.iteration += 1;
        Ok(metrics)
    }
}

/// Runs to the budget, handing each iteration's metrics and the updated
/// trainer to `sink`.
pub fn train<F>(cfg: TrainConfig, mut sink: F) -> Result<Parameters>
where
    F: FnMut(&IterationMetrics, &Trainer) -> Result<()>,
{
    let mut trainer = Trainer::new(cfg)?;
    while !trainer.finished() {
        let m = trainer.iterate()?;
        sink(&m, &trainer)?;
    }
    Ok(trainer.into_params())
}
