//! Return targets for two-player self-play.
//!
//! Everything stored per step is in the frame of that step's mover. When a
//! return crosses from step `t` to a later step `u`, contributions are negated
//! whenever the two movers differ (the negamax convention). The bootstrap
//! value of the terminal state is 0, so `lambda = 1` recovers the signed game
//! outcome.

use crate::error::{Error, Result};
use crate::games::Player;
use crate::regopt::{ActionDistribution, QValues};

/// The parts of a ply that enter the return computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSignal {
    /// Mover-frame reward received for this ply.
    pub reward: f64,
    /// Bootstrap state value of the state this ply was taken from, mover frame.
    pub vhat: f64,
    pub mover: Player,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnTargets {
    pub g_lambda: Vec<f64>,
}

/// `sum_a policy(a) q(a)` over legal actions.
pub fn state_value_estimate(policy: &ActionDistribution, q: &QValues) -> Result<f64> {
    if policy.mask() != q.mask() {
        return Err(Error::MaskMismatch);
    }
    Ok(policy.mask().legal().iter().map(|&a| policy.prob(a) * q.get(a)).sum())
}

fn validate(steps: &[StepSignal], gamma: f64) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
        });
    }
    for (i, s) in steps.iter().enumerate() {
        if !s.vhat.is_finite() || !s.reward.is_finite() {
            return Err(Error::NonFinite {
                what: "trajectory value",
                index: i,
            });
        }
    }
    Ok(())
}

#[inline]
fn relative_sign(from: Player, to: Player) -> f64 {
    if from == to {
        1.0
    } else {
        -1.0
    }
}

/// Lambda-returns for a complete episode via the backward recursion
/// `G_t = R_t + gamma * s * ((1 - lambda) * vhat_{t+1} + lambda * G_{t+1})`,
/// where `s` is the sign between the movers at `t` and `t + 1`.
pub fn lambda_returns(steps: &[StepSignal], lambda: f64, gamma: f64) -> Result<ReturnTargets> {
    validate(steps, gamma)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
        });
    }
    let n = steps.len();
    let mut g = vec![0.0; n];
    g[n - 1] = steps[n - 1].reward;
    for t in (0..n - 1).rev() {
        let next = &steps[t + 1];
        let sign = relative_sign(steps[t].mover, next.mover);
        let blended = (1.0 - lambda) * next.vhat + lambda * g[t + 1];
        g[t] = steps[t].reward + gamma * sign * blended;
    }
    Ok(ReturnTargets { g_lambda: g })
}

/// One-step targets `R_t + gamma * s * vhat_{t+1}`; the last step gets its reward.
pub fn one_step_returns(steps: &[StepSignal], gamma: f64) -> Result<Vec<f64>> {
    validate(steps, gamma)?;
    let n = steps.len();
    Ok((0..n)
        .map(|t| {
            if t + 1 == n {
                steps[t].reward
            } else {
                let next = &steps[t + 1];
                steps[t].reward + gamma * relative_sign(steps[t].mover, next.mover) * next.vhat
            }
        })
        .collect())
}

/// Discounted, sign-corrected sum of all rewards from `t` to the end.
pub fn monte_carlo_returns(steps: &[StepSignal], gamma: f64) -> Result<Vec<f64>> {
    validate(steps, gamma)?;
    Ok((0..steps.len())
        .map(|t| {
            let mut discount = 1.0;
            let mut total = 0.0;
            for s in &steps[t..] {
                total += discount * relative_sign(steps[t].mover, s.mover) * s.reward;
                discount *= gamma;
            }
            total
        })
        .collect())
}
