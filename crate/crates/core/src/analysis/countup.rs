//! Exact solutions of the count-up game by backward induction.
//!
//! States `0..target` form a DAG ordered by the counter, so both the minimax
//! solution and the quantal response equilibrium are computed in one sweep
//! from `target - 1` down to `0`. Values are in the mover's frame.

use crate::error::{Error, Result};

/// Exact minimax solution. `q[s][i]` is the value of adding `i + 1` at `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountUpSolution {
    pub target: u32,
    pub max_increment: u32,
    pub values: Vec<i8>,
    pub q: Vec<Vec<i8>>,
    pub optimal: Vec<Vec<usize>>,
}

impl CountUpSolution {
    pub fn is_winning(&self, state: u32) -> bool {
        self.values[state as usize] > 0
    }

    /// Lowest-index optimal action.
    pub fn best_action(&self, state: u32) -> usize {
        self.optimal[state as usize][0]
    }

    /// Strategy text for one state, e.g. `Win with A_t = +1 or +2.`
    pub fn describe(&self, state: u32) -> String {
        if !self.is_winning(state) {
            return "Lose anyway.".to_string();
        }
        let moves: Vec<String> = self.optimal[state as usize]
            .iter()
            .map(|a| format!("+{}", a + 1))
            .collect();
        format!("Win with A_t = {}.", moves.join(" or "))
    }

    /// One `(state, strategy)` row per state, highest state first.
    pub fn table(&self) -> Vec<(u32, String)> {
        (0..self.target).rev().map(|s| (s, self.describe(s))).collect()
    }
}

pub fn solve_countup_optimal(target: u32, max_increment: u32) -> Result<CountUpSolution> {
    if target == 0 || max_increment == 0 {
        return Err(Error::InvalidSpec(format!(
            "count-up needs positive target and max increment (got {target}, {max_increment})"
        )));
    }
    let n = target as usize;
    let k = max_increment as usize;
    let mut values = vec![0i8; n];
    let mut q = vec![vec![0i8; k]; n];
    let mut optimal = vec![Vec::new(); n];
    for s in (0..n).rev() {
        q[s] = (s + 1..=s + k)
            .map(|next| if next >= n { 1 } else { -values[next] })
            .collect();
        let best = *q[s].iter().max().unwrap();
        values[s] = best;
        optimal[s] = (0..k).filter(|&i| q[s][i] == best).collect();
    }
    Ok(CountUpSolution {
        target,
        max_increment,
        values,
        q,
        optimal,
    })
}

/// Quantal response equilibrium at temperature `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct QrePolicy {
    pub target: u32,
    pub max_increment: u32,
    pub alpha: f64,
    pub policy: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

fn softmax_scaled(q: &[f64], alpha: f64) -> Vec<f64> {
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = q.iter().map(|&x| ((x - m) / alpha).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

impl QrePolicy {
    /// `max |pi(a|s) - softmax(Q(s, .)/alpha)(a)|` over all states and actions.
    pub fn residual(&self) -> f64 {
        self.policy
            .iter()
            .zip(&self.q)
            .flat_map(|(p, q)| {
                let fixed = softmax_scaled(q, self.alpha);
                p.iter().zip(fixed).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// `max |Q(s,a) - (r + (-E_{a'~pi}[Q(s',a')]))|`: the negamax Bellman error.
    pub fn bellman_residual(&self) -> f64 {
        let n = self.target as usize;
        let mut worst: f64 = 0.0;
        for s in 0..n {
            for (i, &qa) in self.q[s].iter().enumerate() {
                let next = s + i + 1;
                let backup = if next >= n {
                    1.0
                } else {
                    -self.policy[next]
                        .iter()
                        .zip(&self.q[next])
                        .map(|(p, q)| p * q)
                        .sum::<f64>()
                };
                worst = worst.max((qa - backup).abs());
            }
        }
        worst
    }
}

pub fn solve_countup_qre(target: u32, max_increment: u32, alpha: f64) -> Result<QrePolicy> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
        });
    }
    if target == 0 || max_increment == 0 {
        return Err(Error::InvalidSpec(format!(
            "count-up needs positive target and max increment (got {target}, {max_increment})"
        )));
    }
    let n = target as usize;
    let k = max_increment as usize;
    let mut policy = vec![Vec::new(); n];
    let mut q = vec![Vec::new(); n];
    let mut value = vec![0.0; n];
    for s in (0..n).rev() {
        let qs: Vec<f64> = (0..k)
            .map(|i| {
                let next = s + i + 1;
                if next >= n {
                    1.0
                } else {
                    -value[next]
                }
            })
            .collect();
        let ps = softmax_scaled(&qs, alpha);
        value[s] = ps.iter().zip(&qs).map(|(p, q)| p * q).sum();
        policy[s] = ps;
        q[s] = qs;
    }
    Ok(QrePolicy {
        target,
        max_increment,
        alpha,
        policy,
        q,
    })
}
