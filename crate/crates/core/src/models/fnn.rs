use crate::data::{feature_names, FeatureStats, HedgeSample};
use crate::error::{Error, Result};
use crate::market_math::OptionKind;
use crate::nn::{ForwardCache, Gradients, Matrix, Mode, Network, Parameterized};

use super::{check_kinds, hedge_loss_grad, HedgeRatioModel, ModelVariant, OutputActivation, Trainable};

const PREDICT_CHUNK: usize = 8192;

/// Architecture of a feedforward hedge model.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnConfig {
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub batch_norm: bool,
    pub output: OutputActivation,
    pub seed: u64,
}

impl Default for FnnConfig {
    fn default() -> Self {
        Self {
            hidden_width: 128,
            hidden_depth: 3,
            batch_norm: true,
            output: OutputActivation::Clamp,
            seed: 0,
        }
    }
}

/// Feedforward network from standardized features to a hedge ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnHedgeModel {
    kind: OptionKind,
    variant: ModelVariant,
    output: OutputActivation,
    net: Network,
    stats: FeatureStats,
}

impl FnnHedgeModel {
    /// Freshly initialized model with identity standardization.
    pub fn new(kind: OptionKind, variant: ModelVariant, cfg: &FnnConfig) -> Result<Self> {
        if !variant.is_feedforward() {
            return Err(Error::Config(format!("{variant} is not a feedforward variant")));
        }
        let dim = feature_names(variant, kind).len();
        let hidden = vec![cfg.hidden_width; cfg.hidden_depth];
        let net = Network::mlp(dim, &hidden, 1, cfg.batch_norm, cfg.seed);
        Ok(Self {
            kind,
            variant,
            output: cfg.output,
            net,
            stats: FeatureStats::identity(dim),
        })
    }

    /// Initialized model whose standardization is fitted on `train`.
    pub fn fit_new(kind: OptionKind, variant: ModelVariant, cfg: &FnnConfig, train: &[HedgeSample]) -> Result<Self> {
        let mut model = Self::new(kind, variant, cfg)?;
        check_kinds(kind, train)?;
        let dim = model.stats.dim();
        if let Some(bad) = train.iter().find(|s| s.features.len() != dim) {
            return Err(layout_error(dim, bad.features.len()));
        }
        model.stats = FeatureStats::fit(dim, train.iter().map(|s| s.features.as_slice()));
        Ok(model)
    }

    /// Assembles a model from its parts, checking that they agree.
    pub fn from_parts(
        kind: OptionKind,
        variant: ModelVariant,
        output: OutputActivation,
        net: Network,
        stats: FeatureStats,
    ) -> Result<Self> {
        let dim = feature_names(variant, kind).len();
        if stats.dim() != dim || net.input_dim() != Some(dim) {
            return Err(Error::Contract(format!(
                "{variant} expects {dim} features; stats have {}, network takes {:?}",
                stats.dim(),
                net.input_dim()
            )));
        }
        Ok(Self {
            kind,
            variant,
            output,
            net,
            stats,
        })
    }

    pub fn output(&self) -> OutputActivation {
        self.output
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: FeatureStats) -> Result<()> {
        if stats.dim() != self.stats.dim() {
            return Err(layout_error(self.stats.dim(), stats.dim()));
        }
        self.stats = stats;
        Ok(())
    }

    /// Standardized features×batch input matrix.
    fn input_matrix(&self, samples: &[&HedgeSample]) -> Result<Matrix> {
        let dim = self.stats.dim();
        let n = samples.len();
        let mut m = Matrix::zeros(dim, n);
        for (j, s) in samples.iter().enumerate() {
            if s.kind != self.kind {
                return Err(Error::KindMismatch {
                    expected: s.kind,
                    found: self.kind,
                });
            }
            if s.features.len() != dim {
                return Err(layout_error(dim, s.features.len()));
            }
            for (i, &v) in s.features.iter().enumerate() {
                m[(i, j)] = self.stats.apply(i, v);
            }
        }
        Ok(m)
    }

    /// Hedge ratios for raw feature rows (already in the variant's layout).
    pub fn predict_features(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let dim = self.stats.dim();
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(PREDICT_CHUNK) {
            let mut m = Matrix::zeros(dim, chunk.len());
            for (j, r) in chunk.iter().enumerate() {
                if r.len() != dim {
                    return Err(layout_error(dim, r.len()));
                }
                for (i, &v) in r.iter().enumerate() {
                    m[(i, j)] = self.stats.apply(i, v);
                }
            }
            let y = self.net.infer(&m)?;
            out.extend(y.row(0).iter().map(|&raw| self.output.apply(raw, self.kind)));
        }
        Ok(out)
    }

    fn train_forward(&self, batch: &[&HedgeSample]) -> Result<(Matrix, ForwardCache)> {
        if batch.len() < 2 {
            return Err(Error::Contract("training batches need at least 2 samples".into()));
        }
        let x = self.input_matrix(batch)?;
        self.net.forward(&x, Mode::Train)
    }
}

fn layout_error(expected: usize, found: usize) -> Error {
    Error::Contract(format!("feature layout mismatch: model expects {expected} features, sample has {found}"))
}

/// Standardize, run the network in inference mode and apply the output map.
pub fn fnn_predict(model: &FnnHedgeModel, samples: &[HedgeSample]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(PREDICT_CHUNK) {
        let refs: Vec<&HedgeSample> = chunk.iter().collect();
        let x = model.input_matrix(&refs)?;
        let y = model.net.infer(&x)?;
        out.extend(y.row(0).iter().map(|&raw| model.output.apply(raw, model.kind)));
    }
    Ok(out)
}

impl HedgeRatioModel for FnnHedgeModel {
    fn kind(&self) -> OptionKind {
        self.kind
    }

    fn variant(&self) -> ModelVariant {
        self.variant
    }

    fn predict(&self, samples: &[HedgeSample]) -> Result<Vec<f64>> {
        fnn_predict(self, samples)
    }
}

impl Parameterized for FnnHedgeModel {
    fn params(&self) -> Vec<&[f64]> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.params_mut()
    }
}

impl Trainable for FnnHedgeModel {
    type Aux = ForwardCache;

    fn batch_loss(&self, batch: &[&HedgeSample]) -> Result<f64> {
        let (y, _) = self.train_forward(batch)?;
        let deltas: Vec<f64> = y.row(0).iter().map(|&r| self.output.apply(r, self.kind)).collect();
        Ok(hedge_loss_grad(&deltas, batch).0)
    }

    fn forward_backward(&self, batch: &[&HedgeSample]) -> Result<(f64, Gradients, ForwardCache)> {
        let (y, cache) = self.train_forward(batch)?;
        let raw = y.row(0);
        let deltas: Vec<f64> = raw.iter().map(|&r| self.output.apply(r, self.kind)).collect();
        let (loss, dd) = hedge_loss_grad(&deltas, batch);
        let draw: Vec<f64> = raw
            .iter()
            .zip(&dd)
            .map(|(&r, &g)| g * self.output.derivative(r, self.kind))
            .collect();
        let dy = Matrix::from_vec(1, batch.len(), draw)?;
        let (grads, _) = self.net.backward(&cache, &dy)?;
        Ok((loss, grads, cache))
    }

    fn commit(&mut self, aux: ForwardCache) {
        self.net.commit_batch_stats(&aux);
    }

    fn kink_margin(&self, batch: &[&HedgeSample]) -> Result<f64> {
        let (y, cache) = self.train_forward(batch)?;
        let out = y.row(0).iter().fold(f64::INFINITY, |m, &r| m.min(self.output.kink_distance(r)));
        Ok(out.min(self.net.relu_margin(&cache)))
    }
}
