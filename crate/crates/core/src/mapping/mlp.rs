//! One-hidden-layer ReLU regressor trained with Adam on squared error.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RowMatrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Minimum loss improvement that resets the patience counter.
    pub tol: f64,
    pub patience: usize,
    /// L2 penalty on the weight matrices.
    pub alpha: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 200,
            max_epochs: 200,
            tol: 1e-4,
            patience: 10,
            alpha: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// input × hidden
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// hidden × output
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// Serialized form of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: RowMatrix,
    pub b1: Vec<f64>,
    pub w2: RowMatrix,
    pub b2: Vec<f64>,
}

fn add_row_bias(m: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut row in m.row_iter_mut() {
        row += b.transpose();
    }
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> (DMatrix<f64>, DVector<f64>) {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut draw = || (rng.random::<f64>() * 2.0 - 1.0) * bound;
    let w = DMatrix::from_fn(rows, cols, |_, _| draw());
    let b = DVector::from_fn(cols, |_, _| draw());
    (w, b)
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let (w1, b1) = glorot(input, hidden, rng);
        let (w2, b2) = glorot(hidden, output, rng);
        Self { w1, b1, w2, b2 }
    }

    fn forward(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut z1 = x * &self.w1;
        add_row_bias(&mut z1, &self.b1);
        let a1 = z1.map(|v| v.max(0.0));
        let mut out = &a1 * &self.w2;
        add_row_bias(&mut out, &self.b2);
        (a1, out)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward(x).1
    }

    /// Loss `(1/2n)·Σ‖ŷ-y‖² + (alpha/2n)·(‖W1‖² + ‖W2‖²)` and its exact
    /// gradients.
    pub fn loss_and_grads(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        alpha: f64,
    ) -> (f64, MlpGrads) {
        let n = x.nrows() as f64;
        let (a1, out) = self.forward(x);
        let err = &out - y;
        let penalty = self.w1.norm_squared() + self.w2.norm_squared();
        let loss = err.norm_squared() / (2.0 * n) + alpha * penalty / (2.0 * n);

        let delta2 = &err / n;
        let gw2 = a1.transpose() * &delta2 + &self.w2 * (alpha / n);
        let gb2 = delta2.row_sum().transpose();
        let mut delta1 = &delta2 * self.w2.transpose();
        delta1.zip_apply(&a1, |d, a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });
        let gw1 = x.transpose() * &delta1 + &self.w1 * (alpha / n);
        let gb1 = delta1.row_sum().transpose();
        (
            loss,
            MlpGrads {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        )
    }

    pub fn to_params(&self) -> MlpParams {
        MlpParams {
            w1: RowMatrix::from(&self.w1),
            b1: self.b1.iter().copied().collect(),
            w2: RowMatrix::from(&self.w2),
            b2: self.b2.iter().copied().collect(),
        }
    }

    pub fn from_params(p: &MlpParams) -> Self {
        Self {
            w1: p.w1.to_dmatrix(),
            b1: DVector::from_column_slice(&p.b1),
            w2: p.w2.to_dmatrix(),
            b2: DVector::from_column_slice(&p.b2),
        }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

fn params_mut(net: &mut Mlp) -> [&mut [f64]; 4] {
    [
        net.w1.as_mut_slice(),
        net.b1.as_mut_slice(),
        net.w2.as_mut_slice(),
        net.b2.as_mut_slice(),
    ]
}

fn grads_ref(g: &MlpGrads) -> [&[f64]; 4] {
    [
        g.w1.as_slice(),
        g.b1.as_slice(),
        g.w2.as_slice(),
        g.b2.as_slice(),
    ]
}

impl AdamState {
    fn new(size: usize) -> Self {
        Self {
            m: vec![0.0; size],
            v: vec![0.0; size],
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Mlp, grads: &MlpGrads, cfg: &MlpConfig) {
        self.t += 1;
        let lr = cfg.learning_rate * (1.0 - cfg.beta2.powi(self.t)).sqrt()
            / (1.0 - cfg.beta1.powi(self.t));
        let mut offset = 0;
        for (param, grad) in params_mut(net).into_iter().zip(grads_ref(grads)) {
            for (i, (p, g)) in param.iter_mut().zip(grad).enumerate() {
                let k = offset + i;
                self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g;
                self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g;
                *p -= lr * self.m[k] / (self.v[k].sqrt() + cfg.epsilon);
            }
            offset += param.len();
        }
    }
}

fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Trains a network with minibatch Adam, stopping early once the epoch
/// loss has failed to improve by `tol` for more than `patience` epochs.
pub fn fit_mlp(x: &DMatrix<f64>, y: &DMatrix<f64>, cfg: &MlpConfig, seed_value: u64) -> Mlp {
    let mut rng = seed::rng(seed_value);
    let mut net = Mlp::init(x.ncols(), cfg.hidden, y.ncols(), &mut rng);
    let size = net.w1.len() + net.b1.len() + net.w2.len() + net.b2.len();
    let mut adam = AdamState::new(size);
    let n = x.nrows();
    let batch = cfg.batch_size.clamp(1, n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xb = select_rows(x, chunk);
            let yb = select_rows(y, chunk);
            let (loss, grads) = net.loss_and_grads(&xb, &yb, cfg.alpha);
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut net, &grads, cfg);
        }
        epoch_loss /= n as f64;
        if epoch_loss > best - cfg.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        if epoch_loss < best {
            best = epoch_loss;
        }
        if stale > cfg.patience {
            break;
        }
    }
    net
}
