//! Hedge-ratio models: feedforward variants, the GRU model, the Hull-White
//! regression and the Black-Scholes baseline.

mod checkpoint;
mod fnn;
mod gru;
mod hw;
mod variant;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION};
pub use fnn::{fnn_predict, FnnConfig, FnnHedgeModel};
pub use gru::{gru_cell_step, gru_predict, GruConfig, GruHedgeModel};
pub use hw::{fit_hw, fit_hw_observations, HwModel, HwObservation};
pub use variant::ModelVariant;

use crate::data::HedgeSample;
use crate::error::{Error, Result};
use crate::market_math::OptionKind;
use crate::nn::{sigmoid, Gradients, Parameterized};

/// Sign constraint on the network output: `max(raw, 0)` for calls,
/// `min(raw, 0)` for puts.
pub fn output_clamp(raw: f64, kind: OptionKind) -> f64 {
    match kind {
        OptionKind::Call => raw.max(0.0),
        OptionKind::Put => raw.min(0.0),
    }
}

/// How the final linear output becomes a hedge ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputActivation {
    /// Sign clamp; the default.
    #[default]
    Clamp,
    /// `σ(raw)` for calls, `σ(raw) − 1` for puts.
    Sigmoid,
}

impl OutputActivation {
    pub fn apply(self, raw: f64, kind: OptionKind) -> f64 {
        match self {
            OutputActivation::Clamp => output_clamp(raw, kind),
            OutputActivation::Sigmoid => match kind {
                OptionKind::Call => sigmoid(raw),
                OptionKind::Put => sigmoid(raw) - 1.0,
            },
        }
    }

    /// Derivative of [`OutputActivation::apply`]; the clamp uses 0 at the
    /// boundary.
    pub fn derivative(self, raw: f64, kind: OptionKind) -> f64 {
        match self {
            OutputActivation::Clamp => {
                let inside = match kind {
                    OptionKind::Call => raw > 0.0,
                    OptionKind::Put => raw < 0.0,
                };
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            OutputActivation::Sigmoid => {
                let s = sigmoid(raw);
                s * (1.0 - s)
            }
        }
    }

    /// Distance of `raw` from the nearest non-differentiable point.
    pub fn kink_distance(self, raw: f64) -> f64 {
        match self {
            OutputActivation::Clamp => raw.abs(),
            OutputActivation::Sigmoid => f64::INFINITY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputActivation::Clamp => "clamp",
            OutputActivation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "clamp" => Some(OutputActivation::Clamp),
            "sigmoid" => Some(OutputActivation::Sigmoid),
            _ => None,
        }
    }
}

/// A fitted hedge-ratio function for one option kind.
pub trait HedgeRatioModel {
    fn kind(&self) -> OptionKind;
    fn variant(&self) -> ModelVariant;
    fn predict(&self, samples: &[HedgeSample]) -> Result<Vec<f64>>;
}

/// A model trained by minimizing the mean squared hedging error with
/// mini-batch gradient descent.
pub trait Trainable: HedgeRatioModel + Parameterized + Clone {
    /// State produced by a training forward pass that must be folded back
    /// into the model after the parameter update (batch-norm statistics).
    type Aux;

    /// Train-mode loss on `batch` without touching any state.
    fn batch_loss(&self, batch: &[&HedgeSample]) -> Result<f64>;

    /// Train-mode loss, gradients for every parameter, and the auxiliary state.
    fn forward_backward(&self, batch: &[&HedgeSample]) -> Result<(f64, Gradients, Self::Aux)>;

    fn commit(&mut self, aux: Self::Aux);

    fn loss_and_gradients(&self, batch: &[&HedgeSample]) -> Result<(f64, Gradients)> {
        self.forward_backward(batch).map(|(l, g, _)| (l, g))
    }

    /// Smallest distance of any pre-activation on `batch` from a kink of a
    /// piecewise-linear activation; finite-difference checks skip batches
    /// where this is tiny.
    fn kink_margin(&self, _batch: &[&HedgeSample]) -> Result<f64> {
        Ok(f64::INFINITY)
    }
}

/// The Black-Scholes delta used as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BsBaseline {
    pub kind: OptionKind,
}

impl HedgeRatioModel for BsBaseline {
    fn kind(&self) -> OptionKind {
        self.kind
    }

    fn variant(&self) -> ModelVariant {
        ModelVariant::BsBaseline
    }

    fn predict(&self, samples: &[HedgeSample]) -> Result<Vec<f64>> {
        check_kinds(self.kind, samples)?;
        Ok(samples.iter().map(|s| s.bs_delta).collect())
    }
}

/// Any model that can live in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum HedgeModel {
    Fnn(Box<FnnHedgeModel>),
    Gru(Box<GruHedgeModel>),
    Hw(HwModel),
    Bs(BsBaseline),
}

impl HedgeRatioModel for HedgeModel {
    fn kind(&self) -> OptionKind {
        match self {
            HedgeModel::Fnn(m) => m.kind(),
            HedgeModel::Gru(m) => m.kind(),
            HedgeModel::Hw(m) => m.kind(),
            HedgeModel::Bs(m) => m.kind(),
        }
    }

    fn variant(&self) -> ModelVariant {
        match self {
            HedgeModel::Fnn(m) => m.variant(),
            HedgeModel::Gru(m) => m.variant(),
            HedgeModel::Hw(m) => m.variant(),
            HedgeModel::Bs(m) => m.variant(),
        }
    }

    fn predict(&self, samples: &[HedgeSample]) -> Result<Vec<f64>> {
        match self {
            HedgeModel::Fnn(m) => m.predict(samples),
            HedgeModel::Gru(m) => m.predict(samples),
            HedgeModel::Hw(m) => m.predict(samples),
            HedgeModel::Bs(m) => m.predict(samples),
        }
    }
}

pub(crate) fn check_kinds(kind: OptionKind, samples: &[HedgeSample]) -> Result<()> {
    match samples.iter().find(|s| s.kind != kind) {
        Some(s) => Err(Error::KindMismatch {
            expected: s.kind,
            found: kind,
        }),
        None => Ok(()),
    }
}

/// `dL/dδ_i` of the mean squared hedging error over `batch`.
pub(crate) fn hedge_loss_grad(deltas: &[f64], batch: &[&HedgeSample]) -> (f64, Vec<f64>) {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(batch.len());
    for (d, s) in deltas.iter().zip(batch) {
        let e = s.hedge_error(*d);
        loss += e * e;
        grad.push(-2.0 * e * s.delta_s / n);
    }
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_examples() {
        assert_eq!(output_clamp(-0.3, OptionKind::Call), 0.0);
        assert_eq!(output_clamp(0.42, OptionKind::Call), 0.42);
        assert_eq!(output_clamp(0.2, OptionKind::Put), 0.0);
        assert_eq!(output_clamp(-0.2, OptionKind::Put), -0.2);
    }

    #[test]
    fn clamp_subgradient() {
        let c = OutputActivation::Clamp;
        assert_eq!(c.derivative(0.0, OptionKind::Call), 0.0);
        assert_eq!(c.derivative(0.0, OptionKind::Put), 0.0);
        assert_eq!(c.derivative(0.1, OptionKind::Call), 1.0);
        assert_eq!(c.derivative(-0.1, OptionKind::Put), 1.0);
    }

    #[test]
    fn sigmoid_output_ranges() {
        let s = OutputActivation::Sigmoid;
        assert_eq!(s.apply(0.0, OptionKind::Call), 0.5);
        assert_eq!(s.apply(0.0, OptionKind::Put), -0.5);
        assert!(s.apply(40.0, OptionKind::Put) <= 0.0);
    }
}
