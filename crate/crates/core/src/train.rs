//! Mini-batch training with Adam, gradient clipping and early stopping.

use std::io::Write;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetSplit, HedgeSample};
use crate::error::{Error, Result};
use crate::market_math::OptionKind;
use crate::models::{fit_hw, BsBaseline, FnnConfig, FnnHedgeModel, GruConfig, GruHedgeModel, HedgeModel, ModelVariant, Trainable};
use crate::nn::{clip_gradients, AdamState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Validation checks without improvement before stopping.
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
    /// Validate every this many epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            learning_rate: 0.0005,
            max_epochs: 200,
            patience: 5,
            clip_norm: 5.0,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch_size must be at least 2, got {}", self.batch_size)));
        }
        if self.patience < 1 || self.eval_every < 1 {
            return Err(Error::Config("patience and eval_every must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.clip_norm > 0.0) {
            return Err(Error::Config("learning_rate and clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Mean squared local hedging error `(1/N)Σ(ΔV − δΔS)²`.
pub fn hedge_loss(predictions: &[f64], samples: &[HedgeSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("hedge loss of an empty sample set".into()));
    }
    if predictions.len() != samples.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} samples",
            predictions.len(),
            samples.len()
        )));
    }
    let sse: f64 = predictions
        .iter()
        .zip(samples)
        .map(|(d, s)| {
            let e = s.hedge_error(*d);
            e * e
        })
        .sum();
    Ok(sse / samples.len() as f64)
}

/// Outcome of feeding one validation loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience-based stopping rule on validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    bad_checks: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            bad_checks: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> CheckOutcome {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.bad_checks = 0;
            return CheckOutcome::Improved;
        }
        self.bad_checks += 1;
        if self.bad_checks >= self.patience {
            CheckOutcome::Stop
        } else {
            CheckOutcome::NoImprovement
        }
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub stopped: bool,
}

/// Per-epoch training history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with columns `epoch,train_loss,val_loss,stopped`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Contract(format!("writing training log: {e}"));
        w.write_record(["epoch", "train_loss", "val_loss", "stopped"]).map_err(err)?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
                r.stopped.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Contract(format!("writing training log: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub log: TrainLog,
    /// Epoch whose parameters were restored, if any check ran.
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
}

/// Shuffled mini-batches of indices; a trailing batch of one sample is
/// merged into the previous batch so batch norm always sees two rows.
fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

/// Fits `model` on `split.train`, validating on `split.validation`, and
/// returns the best validated snapshot.
pub fn train<M: Trainable>(model: M, split: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainOutcome<M>> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    if cfg.max_epochs == 0 {
        return Ok(TrainOutcome {
            model,
            log,
            best_epoch: None,
            best_val_loss: None,
        });
    }
    if split.train.len() < 2 || split.validation.is_empty() {
        return Err(Error::Config(format!(
            "training needs at least 2 train and 1 validation samples, got {} and {}",
            split.train.len(),
            split.validation.len()
        )));
    }

    let mut model = model;
    let mut adam = AdamState::for_model(&model, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best: Option<M> = None;

    for epoch in 1..=cfg.max_epochs {
        let mut sum = 0.0;
        for (b, idx) in batches(split.train.len(), cfg.batch_size, &mut rng).into_iter().enumerate() {
            let batch: Vec<&HedgeSample> = idx.iter().map(|&i| &split.train[i]).collect();
            let (loss, grads, aux) = model.forward_backward(&batch)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sum += loss * batch.len() as f64;
            let grads = clip_gradients(grads, cfg.clip_norm);
            adam.step(model.params_mut(), &grads);
            model.commit(aux);
        }
        let train_loss = sum / split.train.len() as f64;

        let mut record = EpochRecord {
            epoch,
            train_loss,
            val_loss: None,
            stopped: false,
        };
        if epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs {
            let val = hedge_loss(&model.predict(&split.validation)?, &split.validation)?;
            if !val.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0 });
            }
            record.val_loss = Some(val);
            match stopper.observe(epoch, val) {
                CheckOutcome::Improved => best = Some(model.clone()),
                CheckOutcome::NoImprovement => {}
                CheckOutcome::Stop => record.stopped = true,
            }
        }
        debug!("epoch {epoch}: train {train_loss:.6e} val {:?}", record.val_loss);
        let stop = record.stopped;
        log.records.push(record);
        if stop {
            break;
        }
    }
    if let Some(last) = log.records.last_mut() {
        last.stopped = true;
    }
    info!(
        "training finished after {} epochs; best validation loss {:.6e} at epoch {:?}",
        log.records.len(),
        stopper.best_loss(),
        stopper.best_epoch()
    );
    Ok(TrainOutcome {
        model: best.unwrap_or(model),
        log,
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best_epoch().map(|_| stopper.best_loss()),
    })
}

/// Architecture settings for the trainable variants.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelSpec {
    pub fnn: FnnConfig,
    pub gru: GruConfig,
}

/// Fits any variant on `split`: gradient training for the networks, least
/// squares on train plus validation for Hull-White, nothing for the BS
/// baseline. Standardization statistics come from the training part.
pub fn fit_variant(
    variant: ModelVariant,
    kind: OptionKind,
    split: &DatasetSplit,
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<(HedgeModel, TrainLog)> {
    match variant {
        ModelVariant::BsBaseline => Ok((HedgeModel::Bs(BsBaseline { kind }), TrainLog::default())),
        ModelVariant::Hw => {
            let all: Vec<HedgeSample> = split.train.iter().chain(&split.validation).cloned().collect();
            Ok((HedgeModel::Hw(fit_hw(kind, &all)?), TrainLog::default()))
        }
        ModelVariant::DnnGru => {
            let model = GruHedgeModel::fit_new(kind, &spec.gru, &split.train)?;
            let out = train(model, split, cfg)?;
            Ok((HedgeModel::Gru(Box::new(out.model)), out.log))
        }
        _ => {
            let model = FnnHedgeModel::fit_new(kind, variant, &spec.fnn, &split.train)?;
            let out = train(model, split, cfg)?;
            Ok((HedgeModel::Fnn(Box::new(out.model)), out.log))
        }
    }
}
