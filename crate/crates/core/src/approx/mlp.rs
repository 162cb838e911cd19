use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_loss, TrainBatch};
use crate::error::{Error, Result};

/// Records per parallel work unit. Chunk partial sums are added in chunk
/// order, so results do not depend on the thread count.
const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpLayout {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl Dense {
    fn bias(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }

    fn end(&self) -> usize {
        self.bias() + self.outputs
    }

    fn apply(&self, theta: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &theta[self.offset..self.bias()];
        let b = &theta[self.bias()..self.end()];
        for o in 0..self.outputs {
            let row = &w[o * self.inputs..(o + 1) * self.inputs];
            let dot: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum();
            out.push(b[o] + dot);
        }
    }

    /// Accumulates parameter gradients and adds `W^T dz` into `dx`.
    fn backward(&self, theta: &[f64], x: &[f64], dz: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>) {
        let w = &theta[self.offset..self.bias()];
        let bias = self.bias();
        for o in 0..self.outputs {
            let d = dz[o];
            if d == 0.0 {
                continue;
            }
            grad[bias + o] += d;
            let g = &mut grad[self.offset + o * self.inputs..self.offset + (o + 1) * self.inputs];
            for (gi, &xi) in g.iter_mut().zip(x) {
                *gi += d * xi;
            }
        }
        if let Some(dx) = dx {
            for o in 0..self.outputs {
                let d = dz[o];
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                for (dxi, &wi) in dx.iter_mut().zip(row) {
                    *dxi += d * wi;
                }
            }
        }
    }
}

impl MlpLayout {
    /// Trunk layers followed by the policy head and the action-value head.
    fn dense(&self) -> Vec<Dense> {
        let mut layers = Vec::with_capacity(self.hidden.len() + 2);
        let mut offset = 0;
        let mut width = self.input;
        for &h in &self.hidden {
            let d = Dense {
                inputs: width,
                outputs: h,
                offset,
            };
            offset = d.end();
            width = h;
            layers.push(d);
        }
        for _ in 0..2 {
            let d = Dense {
                inputs: width,
                outputs: self.actions,
                offset,
            };
            offset = d.end();
            layers.push(d);
        }
        layers
    }

    pub fn num_params(&self) -> usize {
        self.dense().last().map_or(0, Dense::end)
    }
}

/// ReLU trunk with linear policy and action-value heads.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layout: MlpLayout,
    theta: Vec<f64>,
}

impl Mlp {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(layout: MlpLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; layout.num_params()];
        for d in layout.dense() {
            let bound = 1.0 / (d.inputs.max(1) as f64).sqrt();
            for w in &mut theta[d.offset..d.bias()] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Mlp { layout, theta }
    }

    pub fn zeros(layout: MlpLayout) -> Self {
        let theta = vec![0.0; layout.num_params()];
        Mlp { layout, theta }
    }

    pub(crate) fn from_parts(layout: MlpLayout, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != layout.num_params() {
            return Err(Error::ShapeMismatch {
                expected: layout.num_params(),
                got: theta.len(),
            });
        }
        Ok(Mlp { layout, theta })
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Post-activation trunk values, input first.
    fn trunk(&self, layers: &[Dense], x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(layers.len() - 1);
        acts.push(x.to_vec());
        for d in &layers[..layers.len() - 2] {
            let mut z = Vec::with_capacity(d.outputs);
            d.apply(&self.theta, acts.last().unwrap(), &mut z);
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push(z);
        }
        acts
    }

    pub(super) fn forward(&self, features: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if features.len() != self.layout.input {
            return Err(Error::ShapeMismatch {
                expected: self.layout.input,
                got: features.len(),
            });
        }
        let layers = self.layout.dense();
        let acts = self.trunk(&layers, features);
        let h = acts.last().unwrap();
        let n = layers.len();
        let (mut logits, mut q) = (Vec::new(), Vec::new());
        layers[n - 2].apply(&self.theta, h, &mut logits);
        layers[n - 1].apply(&self.theta, h, &mut q);
        Ok((logits, q))
    }

    pub(super) fn loss_and_gradient(&self, batch: &TrainBatch<'_>) -> Result<(f64, Vec<f64>)> {
        for r in batch.records() {
            if r.obs.features.len() != self.layout.input {
                return Err(Error::ShapeMismatch {
                    expected: self.layout.input,
                    got: r.obs.features.len(),
                });
            }
        }
        let layers = self.layout.dense();
        let partials: Vec<(f64, Vec<f64>)> = batch
            .records()
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; self.theta.len()];
                let mut loss = 0.0;
                for r in chunk {
                    loss += self.accumulate(&layers, r, &mut grad);
                }
                (loss, grad)
            })
            .collect();
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        let mut grad = vec![0.0; self.theta.len()];
        for (l, g) in partials {
            total += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((total * scale, grad))
    }

    /// Adds one record's unscaled gradient into `grad` and returns its loss.
    fn accumulate(&self, layers: &[Dense], record: &super::SampleRecord, grad: &mut [f64]) -> f64 {
        let acts = self.trunk(layers, &record.obs.features);
        let n = layers.len();
        let h = acts.last().unwrap();
        let (mut logits, mut q) = (Vec::new(), Vec::new());
        layers[n - 2].apply(&self.theta, h, &mut logits);
        layers[n - 1].apply(&self.theta, h, &mut q);
        let (loss, dlogits, dq) = sample_loss(&logits, &q, record);

        let mut dh = vec![0.0; h.len()];
        let need_dx = n > 2;
        layers[n - 2].backward(&self.theta, h, &dlogits, grad, need_dx.then_some(&mut dh[..]));
        layers[n - 1].backward(&self.theta, h, &dq, grad, need_dx.then_some(&mut dh[..]));

        let mut upstream = dh;
        for i in (0..n - 2).rev() {
            let out = &acts[i + 1];
            for (u, &o) in upstream.iter_mut().zip(out) {
                if o <= 0.0 {
                    *u = 0.0;
                }
            }
            let input = &acts[i];
            if i > 0 {
                let mut dx = vec![0.0; input.len()];
                layers[i].backward(&self.theta, input, &upstream, grad, Some(&mut dx));
                upstream = dx;
            } else {
                layers[i].backward(&self.theta, input, &upstream, grad, None);
            }
        }
        loss
    }
}
