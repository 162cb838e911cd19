//! Policy/action-value approximators, the joint training loss, and Adam.
//!
//! The loss for one record `(S, A, target, G)` is
//! `-sum_a target(a) ln softmax(logits)(a) + (q(A) - G)^2`, with the softmax
//! and the sum restricted to legal actions; batches average it.

mod adam;
mod checkpoint;
mod mlp;
mod tabular;

pub use adam::{optimizer_step, AdamConfig, OptimizerState};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{Mlp, MlpLayout};
pub use tabular::Tabular;

use crate::error::{Error, Result};
use crate::games::{GameSpec, LegalMask, Observation};
use crate::regopt::{masked_softmax, ActionDistribution, QValues};

#[derive(Clone, Debug, PartialEq)]
pub struct NetOutput {
    pub policy_logits: Vec<f64>,
    pub q: QValues,
}

impl NetOutput {
    /// Masked softmax of the policy logits.
    pub fn policy(&self) -> ActionDistribution {
        ActionDistribution::from_logits(&self.policy_logits, self.q.mask())
    }
}

/// One buffer entry: the state, the action taken, the full improved policy at
/// that state, and the lambda-return target.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub obs: Observation,
    pub action: usize,
    pub target: ActionDistribution,
    pub g_lambda: f64,
    /// Parameter version that generated this record.
    pub version: u64,
}

impl SampleRecord {
    pub fn mask(&self) -> &LegalMask {
        self.target.mask()
    }
}

#[derive(Clone, Debug)]
pub struct TrainBatch<'a> {
    records: Vec<&'a SampleRecord>,
}

impl<'a> TrainBatch<'a> {
    pub fn new(records: Vec<&'a SampleRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::ShapeMismatch { expected: 1, got: 0 });
        }
        Ok(TrainBatch { records })
    }

    pub fn from_slice(records: &'a [SampleRecord]) -> Result<Self> {
        Self::new(records.iter().collect())
    }

    pub fn records(&self) -> &[&'a SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Tabular,
    Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Parameters {
    Tabular(Tabular),
    Mlp(Mlp),
}

impl Parameters {
    pub fn tabular(num_actions: usize) -> Self {
        Parameters::Tabular(Tabular::new(num_actions))
    }

    pub fn mlp(layout: MlpLayout, seed: u64) -> Self {
        Parameters::Mlp(Mlp::new(layout, seed))
    }

    /// Default-initialized parameters for `spec`.
    pub fn for_game(spec: GameSpec, backend: Backend, hidden: &[usize], seed: u64) -> Self {
        match backend {
            Backend::Tabular => Self::tabular(spec.num_actions()),
            Backend::Mlp => Self::mlp(
                MlpLayout {
                    input: spec.feature_len(),
                    hidden: hidden.to_vec(),
                    actions: spec.num_actions(),
                },
                seed,
            ),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Parameters::Tabular(_) => Backend::Tabular,
            Parameters::Mlp(_) => Backend::Mlp,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Parameters::Tabular(t) => t.num_actions(),
            Parameters::Mlp(m) => m.layout().actions,
        }
    }

    pub fn theta(&self) -> &[f64] {
        match self {
            Parameters::Tabular(t) => t.theta(),
            Parameters::Mlp(m) => m.theta(),
        }
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        match self {
            Parameters::Tabular(t) => t.theta_mut(),
            Parameters::Mlp(m) => m.theta_mut(),
        }
    }

    /// Allocates tabular rows for every state in `batch`; no-op for the MLP.
    pub fn register(&mut self, batch: &TrainBatch<'_>) {
        if let Parameters::Tabular(t) = self {
            for r in batch.records() {
                t.register(r.obs.key);
            }
        }
    }

    pub fn forward(&self, obs: &Observation, mask: &LegalMask) -> Result<NetOutput> {
        if mask.len() != self.num_actions() {
            return Err(Error::ShapeMismatch {
                expected: self.num_actions(),
                got: mask.len(),
            });
        }
        let (policy_logits, q) = match self {
            Parameters::Tabular(t) => t.forward(obs.key),
            Parameters::Mlp(m) => m.forward(&obs.features)?,
        };
        Ok(NetOutput {
            policy_logits,
            q: QValues::new(q, mask.clone())?,
        })
    }

    pub fn loss(&self, batch: &TrainBatch<'_>) -> Result<f64> {
        let mut total = 0.0;
        for (i, r) in batch.records().iter().enumerate() {
            let out = self.forward(&r.obs, r.mask())?;
            let (l, _, _) = sample_loss(&out.policy_logits, out.q.values(), r);
            if !l.is_finite() {
                return Err(Error::NonFinite { what: "loss", index: i });
            }
            total += l;
        }
        Ok(total / batch.len() as f64)
    }

    pub fn gradient(&self, batch: &TrainBatch<'_>) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(batch)?.1)
    }

    /// Mean loss and its exact gradient with respect to `theta`.
    pub fn loss_and_gradient(&self, batch: &TrainBatch<'_>) -> Result<(f64, Vec<f64>)> {
        for r in batch.records() {
            if r.mask().len() != self.num_actions() {
                return Err(Error::ShapeMismatch {
                    expected: self.num_actions(),
                    got: r.mask().len(),
                });
            }
        }
        let (loss, grad) = match self {
            Parameters::Tabular(t) => t.loss_and_gradient(batch)?,
            Parameters::Mlp(m) => m.loss_and_gradient(batch)?,
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "loss", index: 0 });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                index: i,
            });
        }
        Ok((loss, grad))
    }
}

/// Per-record loss plus its gradient with respect to logits and q.
pub(crate) fn sample_loss(logits: &[f64], q: &[f64], record: &SampleRecord) -> (f64, Vec<f64>, Vec<f64>) {
    let mask = record.mask();
    let probs = masked_softmax(logits, mask);
    let max = mask
        .legal()
        .iter()
        .map(|&a| logits[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + mask.legal().iter().map(|&a| (logits[a] - max).exp()).sum::<f64>().ln();
    let mut ce = 0.0;
    let mut dlogits = vec![0.0; logits.len()];
    for &a in mask.legal() {
        let t = record.target.prob(a);
        if t > 0.0 {
            ce -= t * (logits[a] - log_z);
        }
        dlogits[a] = probs[a] - t;
    }
    let err = q[record.action] - record.g_lambda;
    let mut dq = vec![0.0; q.len()];
    dq[record.action] = 2.0 * err;
    (ce + err * err, dlogits, dq)
}
