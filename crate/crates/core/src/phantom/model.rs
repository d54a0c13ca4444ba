//! Two-layer ReLU network trained by mini-batch gradient descent on softmax
//! cross-entropy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PhantomError;
use crate::interchange::LabeledLogits;
use crate::rng::Seed;

pub const NUM_OUTPUTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub seed: Seed,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 300,
            learning_rate: 0.1,
            batch_size: 32,
            hidden: 64,
            seed: Seed(0),
        }
    }
}

/// Weights are row-major: `w1` is `hidden × input`, `w2` is `2 × hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefModel {
    pub layer_sizes: [usize; 3],
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub params: TrainParams,
}

/// Parameter gradients, laid out like [`RefModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl RefModel {
    /// Glorot-uniform weights from stream 0 of the seed, zero biases.
    pub fn init(input: usize, params: TrainParams) -> Self {
        let hidden = params.hidden;
        let mut rng = params.seed.rng(0);
        let mut glorot = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| rng.random_range(-a..a))
                .collect()
        };
        let w1 = glorot(input, hidden);
        let w2 = glorot(hidden, NUM_OUTPUTS);
        RefModel {
            layer_sizes: [input, hidden, NUM_OUTPUTS],
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; NUM_OUTPUTS],
            params,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.layer_sizes[1]
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let d = self.input_dim();
        (0..self.hidden_dim())
            .map(|j| {
                let row = &self.w1[j * d..(j + 1) * d];
                let pre = self.b1[j] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                pre.max(0.0)
            })
            .collect()
    }

    fn output(&self, h: &[f64]) -> [f64; NUM_OUTPUTS] {
        let hd = self.hidden_dim();
        let mut out = [0.0; NUM_OUTPUTS];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.w2[k * hd..(k + 1) * hd];
            *o = self.b2[k] + row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>();
        }
        out
    }

    pub fn logits(&self, x: &[f64]) -> [f64; NUM_OUTPUTS] {
        self.output(&self.hidden_activations(x))
    }

    /// Mean cross-entropy over the batch and its parameter gradients.
    pub fn loss_and_gradients(&self, xs: &[&[f64]], ys: &[usize]) -> (f64, Gradients) {
        let (d, hd) = (self.input_dim(), self.hidden_dim());
        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; hd],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; NUM_OUTPUTS],
        };
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let h = self.hidden_activations(x);
            let z = self.output(&h);
            let m = z[0].max(z[1]);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - z[y];

            // dL/dz = softmax - onehot
            let mut dz = [0.0; NUM_OUTPUTS];
            for k in 0..NUM_OUTPUTS {
                dz[k] = ((z[k] - lse).exp() - f64::from(u8::from(k == y))) * scale;
                g.b2[k] += dz[k];
                for (gw, hj) in g.w2[k * hd..(k + 1) * hd].iter_mut().zip(&h) {
                    *gw += dz[k] * hj;
                }
            }
            for (j, &hj) in h.iter().enumerate() {
                if hj <= 0.0 {
                    continue;
                }
                let dh: f64 = (0..NUM_OUTPUTS).map(|k| dz[k] * self.w2[k * hd + j]).sum();
                g.b1[j] += dh;
                for (gw, xi) in g.w1[j * d..(j + 1) * d].iter_mut().zip(x.iter()) {
                    *gw += dh * xi;
                }
            }
        }
        (loss * scale, g)
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        let pairs = [
            (&mut self.w1, &g.w1),
            (&mut self.b1, &g.b1),
            (&mut self.w2, &g.w2),
            (&mut self.b2, &g.b2),
        ];
        for (p, d) in pairs {
            for (p, d) in p.iter_mut().zip(d) {
                *p -= lr * d;
            }
        }
    }
}

fn check_features(features: &[Vec<f64>], dim: usize) -> Result<(), PhantomError> {
    for f in features {
        if f.len() != dim {
            return Err(PhantomError::Dimension {
                expected: dim,
                found: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(PhantomError::Data("non-finite feature".into()));
        }
    }
    Ok(())
}

/// Trains from the seeded initialization. Batches are drawn from a per-epoch
/// shuffle on stream 1 of the seed.
pub fn train_ref_model(
    features: &[Vec<f64>],
    labels: &[usize],
    params: TrainParams,
) -> Result<RefModel, PhantomError> {
    if features.len() != labels.len() {
        return Err(PhantomError::Dimension {
            expected: features.len(),
            found: labels.len(),
        });
    }
    if features.len() < 2 {
        return Err(PhantomError::Data("need at least 2 examples".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_OUTPUTS) {
        return Err(PhantomError::Data(format!("label {bad} out of range")));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(PhantomError::Data("both classes must be present".into()));
    }
    if params.batch_size == 0 || params.hidden == 0 {
        return Err(PhantomError::Data(
            "batch_size and hidden must be positive".into(),
        ));
    }
    let dim = features[0].len();
    check_features(features, dim)?;

    let mut model = RefModel::init(dim, params);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut shuffle_rng = params.seed.rng(1);
    for _ in 0..params.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(params.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| features[i].as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (_, g) = model.loss_and_gradients(&xs, &ys);
            model.step(&g, params.learning_rate);
        }
    }
    if !model.is_finite() {
        return Err(PhantomError::Data("training diverged".into()));
    }
    Ok(model)
}

/// Raw network outputs paired with labels; no softmax applied.
pub fn model_logits(
    model: &RefModel,
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<LabeledLogits, PhantomError> {
    check_features(features, model.input_dim())?;
    let rows = features.iter().map(|x| model.logits(x).to_vec()).collect();
    LabeledLogits::from_rows(NUM_OUTPUTS, labels, rows)
        .map_err(|e| PhantomError::Data(e.to_string()))
}
