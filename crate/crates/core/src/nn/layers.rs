use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::matrix::{add_row_bias, matmul, matmul_nt, matmul_tn, row_sums, Matrix};
use super::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::ReLU => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` with output `a`. ReLU uses 0 at 0.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::ReLU => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "relu" => Activation::ReLU,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            _ => return None,
        })
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer `a = f(W·x + b)` with `W` of shape out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Xavier-uniform layer: weights from `U[−1/√fan_in, 1/√fan_in]`, zero
/// biases, identity activation.
pub fn xavier_init(fan_in: usize, fan_out: usize, seed: u64) -> DenseLayer {
    xavier_init_with(fan_in, fan_out, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn xavier_init_with(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> DenseLayer {
    assert!(fan_in >= 1 && fan_out >= 1, "layer dimensions must be positive");
    DenseLayer {
        weights: xavier_matrix(fan_out, fan_in, fan_in, rng),
        bias: vec![0.0; fan_out],
        activation: Activation::Identity,
    }
}

pub(crate) fn xavier_matrix(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

impl DenseLayer {
    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    /// Returns `(z, a)`: pre-activation and output.
    pub fn forward(&self, x: &Matrix) -> (Matrix, Matrix) {
        let mut z = matmul(&self.weights, x);
        add_row_bias(&mut z, &self.bias);
        let a = if self.activation == Activation::Identity {
            z.clone()
        } else {
            z.map(|v| self.activation.apply(v))
        };
        (z, a)
    }

    /// Returns `(dW, db, dx)` given the upstream gradient `da`.
    pub fn backward(&self, x: &Matrix, z: &Matrix, a: &Matrix, da: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
        let dz = if self.activation == Activation::Identity {
            da.clone()
        } else {
            let mut dz = da.clone();
            for ((g, &zv), &av) in dz.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                *g *= self.activation.derivative(zv, av);
            }
            dz
        };
        let dw = matmul_nt(&dz, x);
        let db = row_sums(&dz);
        let dx = matmul_tn(&self.weights, &dz);
        (dw, db, dx)
    }
}

/// Batch normalization over the batch dimension of a features×batch input.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Weight kept on the old running statistic at each update.
    pub momentum: f64,
    pub epsilon: f64,
}

/// Intermediates of a batch-norm forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Matrix,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: 0.9,
            epsilon: 1e-5,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes with batch statistics (`Train`) or running statistics
    /// (`Infer`). Running statistics are not touched here; see
    /// [`BatchNormLayer::update_running`].
    pub fn forward(&self, x: &Matrix, mode: Mode) -> Result<(Matrix, BatchNormCache)> {
        let n = x.cols();
        let dim = x.rows();
        if dim != self.dim() {
            return Err(Error::Contract(format!("batch norm expects {} features, got {dim}", self.dim())));
        }
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::Contract(format!(
                        "batch norm needs a batch of at least 2 in training, got {n}"
                    )));
                }
                let mut mean = Vec::with_capacity(dim);
                let mut var = Vec::with_capacity(dim);
                for i in 0..dim {
                    let row = x.row(i);
                    let m = row.iter().sum::<f64>() / n as f64;
                    let v = row.iter().map(|&u| (u - m) * (u - m)).sum::<f64>() / n as f64;
                    mean.push(m);
                    var.push(v);
                }
                (mean, var)
            }
            Mode::Infer => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut xhat = x.clone();
        let mut y = Matrix::zeros(dim, n);
        for i in 0..dim {
            let (m, s, g, b) = (mean[i], inv_std[i], self.gamma[i], self.beta[i]);
            for (h, o) in xhat.row_mut(i).iter_mut().zip(y.row_mut(i)) {
                *h = (*h - m) * s;
                *o = g * *h + b;
            }
        }
        Ok((
            y,
            BatchNormCache {
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        ))
    }

    /// `running ← momentum·running + (1 − momentum)·batch`.
    pub fn update_running(&mut self, cache: &BatchNormCache) {
        let keep = self.momentum;
        for i in 0..self.dim() {
            self.running_mean[i] = keep * self.running_mean[i] + (1.0 - keep) * cache.batch_mean[i];
            self.running_var[i] = keep * self.running_var[i] + (1.0 - keep) * cache.batch_var[i];
        }
    }

    /// Train-mode forward that also folds the batch statistics into the
    /// running estimates.
    pub fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        let (y, cache) = self.forward(x, Mode::Train)?;
        self.update_running(&cache);
        Ok(y)
    }

    /// Returns `(dgamma, dbeta, dx)` for a Train-mode cache.
    pub fn backward(&self, cache: &BatchNormCache, dy: &Matrix) -> (Vec<f64>, Vec<f64>, Matrix) {
        let n = dy.cols() as f64;
        let dim = dy.rows();
        let mut dgamma = vec![0.0; dim];
        let mut dbeta = vec![0.0; dim];
        let mut dx = Matrix::zeros(dim, dy.cols());
        for i in 0..dim {
            let g = dy.row(i);
            let h = cache.xhat.row(i);
            let sum_g: f64 = g.iter().sum();
            let sum_gh: f64 = g.iter().zip(h).map(|(a, b)| a * b).sum();
            dbeta[i] = sum_g;
            dgamma[i] = sum_gh;
            let scale = self.gamma[i] * cache.inv_std[i] / n;
            for ((o, &gv), &hv) in dx.row_mut(i).iter_mut().zip(g).zip(h) {
                *o = scale * (n * gv - sum_g - hv * sum_gh);
            }
        }
        (dgamma, dbeta, dx)
    }
}
