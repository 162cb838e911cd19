use std::collections::HashMap;

use super::{sample_loss, TrainBatch};
use crate::error::{Error, Result};
use crate::games::StateKey;

/// One row of `[logits; q]` per registered state, in registration order.
/// Unregistered states read as all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabular {
    num_actions: usize,
    index: HashMap<StateKey, usize>,
    keys: Vec<StateKey>,
    theta: Vec<f64>,
}

impl Tabular {
    pub fn new(num_actions: usize) -> Self {
        Tabular {
            num_actions,
            index: HashMap::new(),
            keys: Vec::new(),
            theta: Vec::new(),
        }
    }

    pub(crate) fn from_parts(num_actions: usize, keys: Vec<StateKey>, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != keys.len() * 2 * num_actions {
            return Err(Error::ShapeMismatch {
                expected: keys.len() * 2 * num_actions,
                got: theta.len(),
            });
        }
        let index: HashMap<_, _> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        if index.len() != keys.len() {
            return Err(Error::Checkpoint("duplicate tabular key".into()));
        }
        Ok(Tabular {
            num_actions,
            index,
            keys,
            theta,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn keys(&self) -> &[StateKey] {
        &self.keys
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn width(&self) -> usize {
        2 * self.num_actions
    }

    pub fn register(&mut self, key: StateKey) -> usize {
        if let Some(&row) = self.index.get(&key) {
            return row;
        }
        let row = self.keys.len();
        self.index.insert(key, row);
        self.keys.push(key);
        self.theta.resize(self.theta.len() + self.width(), 0.0);
        row
    }

    pub fn row(&self, key: StateKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub(super) fn forward(&self, key: StateKey) -> (Vec<f64>, Vec<f64>) {
        let a = self.num_actions;
        match self.row(key) {
            Some(r) => {
                let row = &self.theta[r * 2 * a..(r + 1) * 2 * a];
                (row[..a].to_vec(), row[a..].to_vec())
            }
            None => (vec![0.0; a], vec![0.0; a]),
        }
    }

    pub(super) fn loss_and_gradient(&self, batch: &TrainBatch<'_>) -> Result<(f64, Vec<f64>)> {
        let a = self.num_actions;
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.theta.len()];
        let mut total = 0.0;
        for r in batch.records() {
            let row = self.row(r.obs.key).ok_or(Error::UnknownState)?;
            let (logits, q) = self.forward(r.obs.key);
            let (l, dlogits, dq) = sample_loss(&logits, &q, r);
            total += l;
            let g = &mut grad[row * 2 * a..(row + 1) * 2 * a];
            for i in 0..a {
                g[i] += scale * dlogits[i];
                g[a + i] += scale * dq[i];
            }
        }
        Ok((total * scale, grad))
    }
}
