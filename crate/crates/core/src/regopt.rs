//! KL- and entropy-regularized policy improvement.
//!
//! The improved policy maximizes `E_p[q] - beta * KL(p || prior) + alpha * H(p)`
//! over the legal simplex and has the closed form
//! `p(a) ∝ exp((q(a) + beta * ln prior(a)) / (alpha + beta))`.
//! Illegal actions are outside the optimization domain and always get zero
//! mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::LegalMask;

/// Legal-action probabilities are clamped to at least this before taking logs.
pub const PRIOR_FLOOR: f64 = 1e-12;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probs: Vec<f64>,
    mask: LegalMask,
}

impl ActionDistribution {
    /// Validates non-negativity, zero mass off the mask, and unit sum.
    pub fn new(probs: Vec<f64>, mask: LegalMask) -> Result<Self> {
        if probs.len() != mask.len() {
            return Err(Error::ShapeMismatch {
                expected: mask.len(),
                got: probs.len(),
            });
        }
        let mut sum = 0.0;
        for (a, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("entry {a} is {p}")));
            }
            if !mask.is_legal(a) && p != 0.0 {
                return Err(Error::InvalidDistribution(format!("illegal action {a} has mass {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(ActionDistribution { probs, mask })
    }

    pub fn uniform(mask: &LegalMask) -> Self {
        let m = mask.count() as f64;
        let probs = mask.bits().iter().map(|&b| if b { 1.0 / m } else { 0.0 }).collect();
        ActionDistribution {
            probs,
            mask: mask.clone(),
        }
    }

    pub fn one_hot(mask: &LegalMask, action: usize) -> Result<Self> {
        if !mask.is_legal(action) {
            return Err(Error::InvalidDistribution(format!(
                "one-hot on illegal action {action}"
            )));
        }
        let mut probs = vec![0.0; mask.len()];
        probs[action] = 1.0;
        Ok(ActionDistribution {
            probs,
            mask: mask.clone(),
        })
    }

    /// Softmax of `logits` restricted to legal actions.
    pub fn from_logits(logits: &[f64], mask: &LegalMask) -> Self {
        let probs = masked_softmax(logits, mask);
        ActionDistribution {
            probs,
            mask: mask.clone(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mask(&self) -> &LegalMask {
        &self.mask
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    /// `(action, probability)` pairs over legal actions only.
    pub fn sparse(&self) -> Vec<(usize, f64)> {
        self.mask.legal().iter().map(|&a| (a, self.probs[a])).collect()
    }

    /// Highest-probability legal action, ties to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = self.mask.legal()[0];
        for &a in self.mask.legal() {
            if self.probs[a] > self.probs[best] {
                best = a;
            }
        }
        best
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let legal = self.mask.legal();
        let mut acc = 0.0;
        for &a in legal {
            acc += self.probs[a];
            if u < acc {
                return a;
            }
        }
        // Rounding left `acc` just under 1; fall back to the last positive slot.
        *legal
            .iter()
            .rev()
            .find(|&&a| self.probs[a] > 0.0)
            .unwrap_or(&legal[legal.len() - 1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QValues {
    q: Vec<f64>,
    mask: LegalMask,
}

impl QValues {
    pub fn new(q: Vec<f64>, mask: LegalMask) -> Result<Self> {
        if q.len() != mask.len() {
            return Err(Error::ShapeMismatch {
                expected: mask.len(),
                got: q.len(),
            });
        }
        Ok(QValues { q, mask })
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn get(&self, action: usize) -> f64 {
        self.q[action]
    }

    pub fn mask(&self) -> &LegalMask {
        &self.mask
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegWeights {
    alpha: f64,
    beta: f64,
}

impl RegWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0;
        if !ok || alpha + beta <= 0.0 {
            return Err(Error::InvalidWeights { alpha, beta });
        }
        Ok(RegWeights { alpha, beta })
    }

    /// Entropy weight.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// KL weight.
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

pub(crate) fn masked_softmax(logits: &[f64], mask: &LegalMask) -> Vec<f64> {
    let max = mask
        .legal()
        .iter()
        .map(|&a| logits[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; logits.len()];
    let mut z = 0.0;
    for &a in mask.legal() {
        let e = (logits[a] - max).exp();
        out[a] = e;
        z += e;
    }
    for &a in mask.legal() {
        out[a] /= z;
    }
    out
}

/// Closed-form maximizer of the regularized objective, evaluated in log space.
pub fn improved_policy(q: &QValues, prior: &ActionDistribution, w: RegWeights) -> Result<ActionDistribution> {
    if q.mask != prior.mask {
        return Err(Error::MaskMismatch);
    }
    let mask = &prior.mask;
    let floored: f64 = mask.legal().iter().map(|&a| prior.probs[a].max(PRIOR_FLOOR)).sum();
    let temperature = w.alpha + w.beta;
    let mut logits = vec![0.0; mask.len()];
    for &a in mask.legal() {
        let log_prior = (prior.probs[a].max(PRIOR_FLOOR) / floored).ln();
        logits[a] = (q.q[a] + w.beta * log_prior) / temperature;
    }
    Ok(ActionDistribution::from_logits(&logits, mask))
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy(p: &ActionDistribution) -> f64 {
    -p.mask
        .legal()
        .iter()
        .map(|&a| p.probs[a])
        .filter(|&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

pub fn kl_divergence(p: &ActionDistribution, q: &ActionDistribution) -> Result<f64> {
    if p.mask != q.mask {
        return Err(Error::MaskMismatch);
    }
    let mut kl = 0.0;
    for &a in p.mask.legal() {
        let (pa, qa) = (p.probs[a], q.probs[a]);
        if pa == 0.0 {
            continue;
        }
        if qa <= 0.0 {
            return Err(Error::ZeroReference { action: a });
        }
        kl += pa * (pa / qa).ln();
    }
    Ok(kl)
}

/// `E_candidate[q] - beta * KL(candidate || prior) + alpha * H(candidate)`.
pub fn objective(
    candidate: &ActionDistribution,
    q: &QValues,
    prior: &ActionDistribution,
    w: RegWeights,
) -> Result<f64> {
    if candidate.mask != q.mask || candidate.mask != prior.mask {
        return Err(Error::MaskMismatch);
    }
    let expected: f64 = candidate
        .mask
        .legal()
        .iter()
        .map(|&a| candidate.probs[a] * q.q[a])
        .sum();
    let kl = if w.beta > 0.0 {
        kl_divergence(candidate, prior)?
    } else {
        0.0
    };
    Ok(expected - w.beta * kl + w.alpha * entropy(candidate))
}
