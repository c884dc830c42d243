use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::layers::{xavier_init_with, Activation, BatchNormCache, BatchNormLayer, DenseLayer};
use super::matrix::Matrix;
use super::{Gradients, Mode, Parameterized};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    BatchNorm(BatchNormLayer),
    Activation(Activation),
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense { z: Matrix, a: Matrix },
    BatchNorm(BatchNormCache),
    Activation { z: Matrix, a: Matrix },
}

/// Intermediates kept by [`Network::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    mode: Mode,
    inputs: Vec<Matrix>,
    layers: Vec<LayerCache>,
}

/// A stack of layers applied in order to a features×batch input.
///
/// Equality compares layers only, not the cache version.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    /// Bumped whenever parameters change; caches from older versions are stale.
    version: u64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers, version: 0 }
    }

    /// Multi-layer perceptron with Xavier init. Each hidden block is
    /// `Dense → BatchNorm → ReLU` (or `Dense(ReLU)` without batch norm);
    /// the output layer is linear.
    pub fn mlp(input_dim: usize, hidden: &[usize], output_dim: usize, batch_norm: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut fan_in = input_dim;
        for &width in hidden {
            let dense = xavier_init_with(fan_in, width, &mut rng);
            if batch_norm {
                layers.push(Layer::Dense(dense));
                layers.push(Layer::BatchNorm(BatchNormLayer::new(width)));
                layers.push(Layer::Activation(Activation::ReLU));
            } else {
                layers.push(Layer::Dense(dense.with_activation(Activation::ReLU)));
            }
            fan_in = width;
        }
        layers.push(Layer::Dense(xavier_init_with(fan_in, output_dim, &mut rng)));
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the layers; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::Dense(d) => Some(d.fan_in()),
            Layer::BatchNorm(b) => Some(b.dim()),
            Layer::Activation(_) => None,
        })
    }

    /// Runs every layer in order. Batch-norm layers use batch statistics
    /// in `Train` mode and running statistics in `Infer` mode; running
    /// statistics are only changed by [`Network::commit_batch_stats`].
    pub fn forward(&self, input: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let (out, cache) = match layer {
                Layer::Dense(d) => {
                    if x.rows() != d.fan_in() {
                        return Err(Error::Shape {
                            layer: idx,
                            message: format!("dense layer expects {} inputs, got {}", d.fan_in(), x.rows()),
                        });
                    }
                    let (z, a) = d.forward(&x);
                    (a.clone(), LayerCache::Dense { z, a })
                }
                Layer::BatchNorm(bn) => {
                    if x.rows() != bn.dim() {
                        return Err(Error::Shape {
                            layer: idx,
                            message: format!("batch norm expects {} features, got {}", bn.dim(), x.rows()),
                        });
                    }
                    let (y, c) = bn.forward(&x, mode)?;
                    (y, LayerCache::BatchNorm(c))
                }
                Layer::Activation(f) => {
                    let a = x.map(|v| f.apply(v));
                    (a.clone(), LayerCache::Activation { z: x.clone(), a })
                }
            };
            inputs.push(x);
            caches.push(cache);
            x = out;
        }
        Ok((
            x,
            ForwardCache {
                version: self.version,
                mode,
                inputs,
                layers: caches,
            },
        ))
    }

    /// Smallest distance of any ReLU input in `cache` from the kink at 0.
    pub fn relu_margin(&self, cache: &ForwardCache) -> f64 {
        self.layers
            .iter()
            .zip(&cache.layers)
            .filter_map(|(layer, c)| match (layer, c) {
                (Layer::Activation(Activation::ReLU), LayerCache::Activation { z, .. }) => {
                    Some(z.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())))
                }
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Convenience inference pass without a cache.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        self.forward(input, Mode::Infer).map(|(y, _)| y)
    }

    /// Folds the batch statistics of a Train-mode pass into the running
    /// estimates of every batch-norm layer.
    pub fn commit_batch_stats(&mut self, cache: &ForwardCache) {
        if cache.mode != Mode::Train {
            return;
        }
        for (layer, c) in self.layers.iter_mut().zip(&cache.layers) {
            if let (Layer::BatchNorm(bn), LayerCache::BatchNorm(bc)) = (layer, c) {
                bn.update_running(bc);
            }
        }
    }

    /// Reverse-mode pass. Returns parameter gradients (in
    /// [`Parameterized`] order) and the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        if cache.version != self.version || cache.layers.len() != self.layers.len() {
            return Err(Error::Contract("stale forward cache: parameters changed since the forward pass".into()));
        }
        if cache.mode != Mode::Train {
            return Err(Error::Contract("backward requires a Train-mode forward cache".into()));
        }
        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        let mut grad = loss_grad.clone();
        for idx in (0..self.layers.len()).rev() {
            let x = &cache.inputs[idx];
            match (&self.layers[idx], &cache.layers[idx]) {
                (Layer::Dense(d), LayerCache::Dense { z, a }) => {
                    if grad.rows() != d.fan_out() || grad.cols() != x.cols() {
                        return Err(Error::Shape {
                            layer: idx,
                            message: format!(
                                "gradient {}x{} does not match output {}x{}",
                                grad.rows(),
                                grad.cols(),
                                d.fan_out(),
                                x.cols()
                            ),
                        });
                    }
                    let (dw, db, dx) = d.backward(x, z, a, &grad);
                    per_layer[idx] = vec![dw.into_vec(), db];
                    grad = dx;
                }
                (Layer::BatchNorm(bn), LayerCache::BatchNorm(c)) => {
                    let (dg, dbeta, dx) = bn.backward(c, &grad);
                    per_layer[idx] = vec![dg, dbeta];
                    grad = dx;
                }
                (Layer::Activation(f), LayerCache::Activation { z, a }) => {
                    for ((g, &zv), &av) in grad.data_mut().iter_mut().zip(z.data()).zip(a.data()) {
                        *g *= f.derivative(zv, av);
                    }
                }
                _ => return Err(Error::Contract(format!("cache does not match layer {idx}"))),
            }
        }
        Ok((Gradients::new(per_layer.into_iter().flatten().collect()), grad))
    }
}

impl Parameterized for Network {
    fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(d.weights.data());
                    out.push(d.bias.as_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_slice());
                    out.push(bn.beta.as_slice());
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(d.weights.data_mut());
                    out.push(d.bias.as_mut_slice());
                }
                Layer::BatchNorm(bn) => {
                    out.push(bn.gamma.as_mut_slice());
                    out.push(bn.beta.as_mut_slice());
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }
}
