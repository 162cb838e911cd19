//! Empirical bias and variance of lambda-returns under frozen parameters.
//!
//! Evaluation pairs `(S_t, A_t)` are the distinct state-action pairs seen in
//! the first few plies of on-policy episodes. For each pair the true action
//! value is replaced by the mean of many Monte Carlo returns, and every
//! lambda is scored on the same set of fresh rollouts, so differences across
//! the grid are not swamped by rollout noise.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::Parameters;
use crate::error::{Error, Result};
use crate::games::{self, GameSpec, GameState};
use crate::regopt::RegWeights;
use crate::returns::{lambda_returns, monte_carlo_returns, StepSignal};
use crate::rng;
use crate::selfplay::rollout;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceConfig {
    pub lambdas: Vec<f64>,
    pub gamma: f64,
    /// Pairs are drawn from plies `0..eval_plies` of each episode.
    pub eval_plies: usize,
    pub eval_episodes: usize,
    pub rollouts: usize,
    pub oracle_rollouts: usize,
    pub seed: u64,
}

impl Default for BiasVarianceConfig {
    fn default() -> Self {
        BiasVarianceConfig {
            lambdas: vec![0.0, 0.5, crate::config::DEFAULT_LAMBDA, 1.0],
            gamma: 1.0,
            eval_plies: 3,
            eval_episodes: 32,
            rollouts: 1000,
            oracle_rollouts: 1000,
            seed: 0,
        }
    }
}

/// Grid row, averaged over evaluation pairs. `*_se` are standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceRow {
    pub lambda: f64,
    pub bias_sq: f64,
    pub bias_sq_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub mse: f64,
    pub mse_se: f64,
}

impl BiasVarianceRow {
    /// Root of the mean squared bias.
    pub fn bias_abs(&self) -> f64 {
        self.bias_sq.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceReport {
    pub rows: Vec<BiasVarianceRow>,
    pub pairs: usize,
    pub rollouts: usize,
    pub oracle_rollouts: usize,
    pub eval_states: String,
}

impl BiasVarianceReport {
    pub const CSV_HEADER: &'static str = "lambda,bias_sq,bias_sq_se,variance,variance_se,mse,mse_se";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.lambda, r.bias_sq, r.bias_sq_se, r.variance, r.variance_se, r.mse, r.mse_se
            );
        }
        out
    }
}

/// Per-pair sample statistics of one estimator against an oracle mean.
struct PairStats {
    bias: f64,
    bias_var: f64,
    var: f64,
    var_var: f64,
    mse: f64,
    mse_var: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn pair_stats(samples: &[f64], oracle: f64, oracle_var: f64, oracle_n: usize) -> PairStats {
    let n = samples.len() as f64;
    let m = mean(samples);
    let var = sample_var(samples, m);
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let var_var = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0);
    let sq: Vec<f64> = samples.iter().map(|x| (x - oracle).powi(2)).collect();
    let mse = mean(&sq);
    PairStats {
        bias: m - oracle,
        bias_var: var / n + oracle_var / oracle_n as f64,
        var,
        var_var,
        mse,
        mse_var: sample_var(&sq, mse) / n,
    }
}

/// Distinct `(state, action)` pairs from the opening plies of on-policy play.
fn evaluation_pairs(
    spec: GameSpec,
    params: &Parameters,
    w: RegWeights,
    cfg: &BiasVarianceConfig,
) -> Result<Vec<(GameState, usize)>> {
    let start = games::reset(spec)?;
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for e in 0..cfg.eval_episodes as u64 {
        let mut r = rng::stream(cfg.seed, &[0, e]);
        let plies = rollout(&start, params, w, &mut r, spec.max_plies(), None)?;
        let mut state = start.clone();
        for p in plies.iter().take(cfg.eval_plies) {
            if seen.insert((state.clone(), p.action)) {
                pairs.push((state.clone(), p.action));
            }
            state = games::step(&state, p.action)?.0;
        }
    }
    Ok(pairs)
}

pub fn bias_variance(
    spec: GameSpec,
    params: &Parameters,
    w: RegWeights,
    cfg: &BiasVarianceConfig,
) -> Result<BiasVarianceReport> {
    for n in [cfg.rollouts, cfg.oracle_rollouts] {
        if n < 2 {
            return Err(Error::InsufficientRollouts(n));
        }
    }
    if cfg.lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let pairs = evaluation_pairs(spec, params, w, cfg)?;
    let per_pair: Vec<Vec<PairStats>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (state, action))| {
            let i = i as u64;
            let signals = |tag: u64, n: usize| -> Result<Vec<Vec<StepSignal>>> {
                let mut r = rng::stream(cfg.seed, &[1, i, tag]);
                (0..n)
                    .map(|_| {
                        let plies = rollout(state, params, w, &mut r, spec.max_plies(), Some(*action))?;
                        Ok(plies.into_iter().map(|p| p.signal).collect())
                    })
                    .collect()
            };
            let oracle: Vec<f64> = signals(0, cfg.oracle_rollouts)?
                .iter()
                .map(|s| monte_carlo_returns(s, cfg.gamma).map(|g| g[0]))
                .collect::<Result<_>>()?;
            let oracle_mean = mean(&oracle);
            let oracle_var = sample_var(&oracle, oracle_mean);
            let fresh = signals(1, cfg.rollouts)?;
            cfg.lambdas
                .iter()
                .map(|&lambda| {
                    let g: Vec<f64> = fresh
                        .iter()
                        .map(|s| lambda_returns(s, lambda, cfg.gamma).map(|t| t.g_lambda[0]))
                        .collect::<Result<_>>()?;
                    Ok(pair_stats(&g, oracle_mean, oracle_var, cfg.oracle_rollouts))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let p = pairs.len() as f64;
    let rows = cfg
        .lambdas
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let cells = per_pair.iter().map(|v| &v[j]);
            let (mut bsq, mut bsq_v, mut var, mut var_v, mut mse, mut mse_v) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for c in cells {
                bsq += c.bias * c.bias;
                bsq_v += 4.0 * c.bias * c.bias * c.bias_var + 2.0 * c.bias_var * c.bias_var;
                var += c.var;
                var_v += c.var_var;
                mse += c.mse;
                mse_v += c.mse_var;
            }
            BiasVarianceRow {
                lambda,
                bias_sq: bsq / p,
                bias_sq_se: bsq_v.sqrt() / p,
                variance: var / p,
                variance_se: var_v.sqrt() / p,
                mse: mse / p,
                mse_se: mse_v.sqrt() / p,
            }
        })
        .collect();
    Ok(BiasVarianceReport {
        rows,
        pairs: pairs.len(),
        rollouts: cfg.rollouts,
        oracle_rollouts: cfg.oracle_rollouts,
        eval_states: format!(
            "{} distinct state-action pairs from plies 0..{} of {} on-policy episodes of {spec}",
            pairs.len(),
            cfg.eval_plies,
            cfg.eval_episodes
        ),
    })
}
