//! Small deterministic neural-network engine.
//!
//! Everything runs on `f64` with features×batch matrices. Randomness only
//! enters through explicit seeds.

mod gradcheck;
mod gru;
mod layers;
mod matrix;
mod network;
mod optim;

pub use gradcheck::{check_gradients, relative_error, relative_error_with_floor, GradCheck, GradCheckReport};
pub use gru::{GruCache, GruCell, GruGradients};
pub use layers::{sigmoid, xavier_init, Activation, BatchNormCache, BatchNormLayer, DenseLayer};
pub use matrix::{add_row_bias, matmul, matmul_acc, matmul_nt, matmul_nt_acc, matmul_tn, matmul_tn_acc, row_sums, Matrix};
pub use network::{ForwardCache, Layer, Network};
pub use optim::{clip_gradients, AdamState};

pub(crate) use layers::xavier_init_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Gradient tensors, one per parameter tensor, in the owner's
/// [`Parameterized`] order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn new(tensors: Vec<Vec<f64>>) -> Self {
        Self { tensors }
    }

    pub fn zeros_like(params: &[&[f64]]) -> Self {
        Self {
            tensors: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn tensors(&self) -> &[Vec<f64>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.tensors
    }

    pub fn into_tensors(self) -> Vec<Vec<f64>> {
        self.tensors
    }

    /// Appends another gradient set after this one.
    pub fn extend(&mut self, other: Gradients) {
        self.tensors.extend(other.tensors);
    }

    /// Global L2 norm over all tensors.
    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.tensors.iter_mut().flatten() {
            *g *= factor;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_finite())
    }
}

/// Anything exposing its trainable tensors in a fixed order.
pub trait Parameterized {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
