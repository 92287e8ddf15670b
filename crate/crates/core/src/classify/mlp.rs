use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, ClassifyError, Distribution};
use crate::genre::{Genre, N_GENRES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Training stops once the epoch-mean loss falls below this.
    pub target_loss: f64,
    /// Initial weights are uniform in `(-init_scale, init_scale)`.
    pub init_scale: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 32,
            learning_rate: 0.01,
            batch_size: 16,
            max_epochs: 300,
            target_loss: 0.05,
            init_scale: 0.1,
        }
    }
}

/// One ReLU hidden layer feeding an 11-way softmax. Weight matrices are
/// row-major, one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub epochs_run: usize,
    /// Epoch-mean training loss after the last epoch.
    pub final_loss: Option<f64>,
}

/// Gradient of the mean cross-entropy loss, same shapes as [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct Forward {
    hidden: Vec<f64>,
    probs: [f64; N_GENRES],
    loss_for: [f64; N_GENRES],
}

impl Mlp {
    pub fn zeros(n_inputs: usize, n_hidden: usize) -> Self {
        Self {
            n_inputs,
            n_hidden,
            w1: vec![0.0; n_hidden * n_inputs],
            b1: vec![0.0; n_hidden],
            w2: vec![0.0; N_GENRES * n_hidden],
            b2: vec![0.0; N_GENRES],
            epochs_run: 0,
            final_loss: None,
        }
    }

    fn random<R: Rng>(n_inputs: usize, n_hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(n_inputs, n_hidden);
        for w in m.w1.iter_mut().chain(m.w2.iter_mut()) {
            *w = rng.random_range(-scale..scale);
        }
        m
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let hidden: Vec<f64> = (0..self.n_hidden)
            .map(|h| {
                let row = &self.w1[h * self.n_inputs..(h + 1) * self.n_inputs];
                let z = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                z.max(0.0)
            })
            .collect();
        let mut logits = [0.0; N_GENRES];
        for (o, l) in logits.iter_mut().enumerate() {
            let row = &self.w2[o * self.n_hidden..(o + 1) * self.n_hidden];
            *l = self.b2[o] + row.iter().zip(&hidden).map(|(w, a)| w * a).sum::<f64>();
        }
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = top + logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        // -log softmax, computed without underflow
        let loss_for = logits.map(|l| log_norm - l);
        let probs = loss_for.map(|nl| (-nl).exp());
        Forward { hidden, probs, loss_for }
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, rows: &[Vec<f64>], labels: &[Genre]) -> f64 {
        let total: f64 = rows
            .iter()
            .zip(labels)
            .map(|(x, y)| self.forward(x).loss_for[y.code()])
            .sum();
        total / rows.len() as f64
    }

    /// Backpropagated gradient of [`Mlp::loss`].
    pub fn gradients(&self, rows: &[Vec<f64>], labels: &[Genre]) -> Gradients {
        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        };
        let scale = 1.0 / rows.len() as f64;
        let mut delta_hidden = vec![0.0; self.n_hidden];
        for (x, y) in rows.iter().zip(labels) {
            let f = self.forward(x);
            let mut delta_out = f.probs;
            delta_out[y.code()] -= 1.0;
            delta_hidden.fill(0.0);
            for (o, d) in delta_out.iter().enumerate() {
                let d = d * scale;
                g.b2[o] += d;
                let base = o * self.n_hidden;
                for (h, a) in f.hidden.iter().enumerate() {
                    g.w2[base + h] += d * a;
                    delta_hidden[h] += d * self.w2[base + h];
                }
            }
            for (h, a) in f.hidden.iter().enumerate() {
                if *a <= 0.0 {
                    continue;
                }
                let d = delta_hidden[h];
                g.b1[h] += d;
                let base = h * self.n_inputs;
                for (j, v) in x.iter().enumerate() {
                    g.w1[base + j] += d * v;
                }
            }
        }
        g
    }

    /// Flattened parameters in the order w1, b1, w2, b2.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        let grads = g.w1.iter().chain(&g.b1).chain(&g.w2).chain(&g.b2);
        for (p, d) in self.params_mut().zip(grads) {
            *p -= lr * d;
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let (i, h) = (self.n_inputs, self.n_hidden);
        if i == 0 || h == 0 {
            return Err("mlp has an empty layer".into());
        }
        if self.w1.len() != h * i || self.b1.len() != h || self.w2.len() != N_GENRES * h || self.b2.len() != N_GENRES {
            return Err("mlp weight shapes do not match its layer sizes".into());
        }
        let all = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2);
        if all.clone().any(|w| !w.is_finite()) {
            return Err("mlp weight is not finite".into());
        }
        Ok(())
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied().collect()
    }
}

/// Mini-batch SGD on cross-entropy. The seed drives both the weight
/// initialization and the per-epoch shuffle.
pub fn train_mlp(
    rows: &[Vec<f64>],
    labels: &[Genre],
    seed: u64,
    params: MlpParams,
) -> Result<Mlp, ClassifyError> {
    let dim = check_training_set(rows, labels)?;
    if params.hidden == 0 || params.batch_size == 0 {
        return Err(ClassifyError::InsufficientData("hidden layer and batch must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Mlp::random(dim, params.hidden, params.init_scale, &mut rng);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut batch_rows = Vec::with_capacity(params.batch_size);
    let mut batch_labels = Vec::with_capacity(params.batch_size);
    for epoch in 0..params.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch_size) {
            batch_rows.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_rows.push(rows[i].clone());
                batch_labels.push(labels[i]);
            }
            let g = model.gradients(&batch_rows, &batch_labels);
            model.step(&g, params.learning_rate);
        }
        model.epochs_run = epoch + 1;
        let loss = model.loss(rows, labels);
        model.final_loss = Some(loss);
        if loss < params.target_loss {
            break;
        }
    }
    Ok(model)
}

impl Classifier for Mlp {
    fn n_features(&self) -> usize {
        self.n_inputs
    }

    fn predict_proba_unchecked(&self, x: &[f64]) -> Distribution {
        Distribution::from_probs(self.forward(x).probs)
    }
}
