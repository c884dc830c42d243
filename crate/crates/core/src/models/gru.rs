use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{feature_names, FeatureStats, HedgeSample, SequenceWindow, SEQUENCE_LEN};
use crate::error::{Error, Result};
use crate::market_math::OptionKind;
use crate::nn::{xavier_init_with, DenseLayer, Gradients, GruCell, Matrix, Parameterized};

use super::{check_kinds, hedge_loss_grad, HedgeRatioModel, ModelVariant, OutputActivation, Trainable};

/// Shape of the recurrent hedge model.
#[derive(Debug, Clone, PartialEq)]
pub struct GruConfig {
    pub hidden: usize,
    pub seq_len: usize,
    pub output: OutputActivation,
    pub seed: u64,
}

impl Default for GruConfig {
    fn default() -> Self {
        Self {
            hidden: 8,
            seq_len: SEQUENCE_LEN,
            output: OutputActivation::Clamp,
            seed: 0,
        }
    }
}

/// GRU over the scalar sentiment history, followed by a single linear head
/// over `h_T ++ standardized (ttm, bs_delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruHedgeModel {
    kind: OptionKind,
    output: OutputActivation,
    seq_len: usize,
    cell: GruCell,
    head: DenseLayer,
    seq_stats: FeatureStats,
    contract_stats: FeatureStats,
}

impl GruHedgeModel {
    pub fn new(kind: OptionKind, cfg: &GruConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let cell = GruCell::new_with(1, cfg.hidden, &mut rng);
        let n_contract = feature_names(ModelVariant::DnnGru, kind).len();
        let head = xavier_init_with(cfg.hidden + n_contract, 1, &mut rng);
        Self {
            kind,
            output: cfg.output,
            seq_len: cfg.seq_len,
            cell,
            head,
            seq_stats: FeatureStats::identity(1),
            contract_stats: FeatureStats::identity(n_contract),
        }
    }

    /// Initialized model with standardization fitted on `train`.
    pub fn fit_new(kind: OptionKind, cfg: &GruConfig, train: &[HedgeSample]) -> Result<Self> {
        check_kinds(kind, train)?;
        let mut model = Self::new(kind, cfg);
        for s in train {
            model.check_window(&s.history, &s.features)?;
        }
        model.seq_stats = FeatureStats::fit(1, train.iter().flat_map(|s| s.history.chunks(1)));
        model.contract_stats = FeatureStats::fit(
            model.contract_stats.dim(),
            train.iter().map(|s| s.features.as_slice()),
        );
        Ok(model)
    }

    pub fn from_parts(
        kind: OptionKind,
        output: OutputActivation,
        seq_len: usize,
        cell: GruCell,
        head: DenseLayer,
        seq_stats: FeatureStats,
        contract_stats: FeatureStats,
    ) -> Result<Self> {
        let n_contract = feature_names(ModelVariant::DnnGru, kind).len();
        if cell.input_dim() != 1
            || head.fan_out() != 1
            || head.fan_in() != cell.hidden() + n_contract
            || seq_stats.dim() != 1
            || contract_stats.dim() != n_contract
        {
            return Err(Error::Contract("inconsistent gru model parts".into()));
        }
        Ok(Self {
            kind,
            output,
            seq_len,
            cell,
            head,
            seq_stats,
            contract_stats,
        })
    }

    pub fn output(&self) -> OutputActivation {
        self.output
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn cell(&self) -> &GruCell {
        &self.cell
    }

    pub fn head(&self) -> &DenseLayer {
        &self.head
    }

    pub fn seq_stats(&self) -> &FeatureStats {
        &self.seq_stats
    }

    pub fn contract_stats(&self) -> &FeatureStats {
        &self.contract_stats
    }

    /// Mutable access to the cell and the head; used to hand-set weights.
    pub fn parts_mut(&mut self) -> (&mut GruCell, &mut DenseLayer) {
        (&mut self.cell, &mut self.head)
    }

    fn check_window(&self, history: &[f64], contract: &[f64]) -> Result<()> {
        if history.len() != self.seq_len {
            return Err(Error::Contract(format!(
                "history has {} steps, model expects {}",
                history.len(),
                self.seq_len
            )));
        }
        if contract.len() != self.contract_stats.dim() {
            return Err(Error::Contract(format!(
                "contract features have {} values, model expects {}",
                contract.len(),
                self.contract_stats.dim()
            )));
        }
        Ok(())
    }

    /// Standardized step inputs (one 1×batch matrix per step) and the
    /// standardized contract features (features×batch).
    fn inputs<'a>(&self, windows: impl ExactSizeIterator<Item = (&'a [f64], &'a [f64])>) -> Result<(Vec<Matrix>, Matrix)> {
        let n = windows.len();
        let nc = self.contract_stats.dim();
        let mut steps = vec![Matrix::zeros(1, n); self.seq_len];
        let mut contract = Matrix::zeros(nc, n);
        for (j, (history, feats)) in windows.enumerate() {
            self.check_window(history, feats)?;
            for (t, &v) in history.iter().enumerate() {
                steps[t][(0, j)] = self.seq_stats.apply(0, v);
            }
            for (i, &v) in feats.iter().enumerate() {
                contract[(i, j)] = self.contract_stats.apply(i, v);
            }
        }
        Ok((steps, contract))
    }

    fn head_input(&self, h: &Matrix, contract: &Matrix) -> Matrix {
        let n = h.cols();
        let mut data = Vec::with_capacity((h.rows() + contract.rows()) * n);
        data.extend_from_slice(h.data());
        data.extend_from_slice(contract.data());
        Matrix::from_vec(h.rows() + contract.rows(), n, data).expect("stacked rows")
    }

    fn raw_outputs(&self, steps: &[Matrix], contract: &Matrix) -> Result<Vec<f64>> {
        let (h, _) = self.cell.forward_sequence(steps)?;
        let (z, _) = self.head.forward(&self.head_input(&h, contract));
        Ok(z.into_vec())
    }

    fn predict_windows<'a>(&self, windows: impl ExactSizeIterator<Item = (&'a [f64], &'a [f64])>) -> Result<Vec<f64>> {
        let (steps, contract) = self.inputs(windows)?;
        if contract.cols() == 0 {
            return Ok(Vec::new());
        }
        Ok(self
            .raw_outputs(&steps, &contract)?
            .into_iter()
            .map(|r| self.output.apply(r, self.kind))
            .collect())
    }

    fn batch_windows<'a>(batch: &'a [&'a HedgeSample]) -> impl ExactSizeIterator<Item = (&'a [f64], &'a [f64])> + 'a {
        batch.iter().map(|s| (s.history.as_slice(), s.features.as_slice()))
    }
}

/// One GRU step of the model's cell on raw (already standardized) input.
pub fn gru_cell_step(model: &GruHedgeModel, x_t: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    model.cell.step(x_t, h_prev)
}

/// Hedge ratios for recurrent-model windows.
pub fn gru_predict(model: &GruHedgeModel, windows: &[SequenceWindow]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(4096) {
        out.extend(model.predict_windows(chunk.iter().map(|w| (w.history.as_slice(), w.contract_features.as_slice())))?);
    }
    Ok(out)
}

impl HedgeRatioModel for GruHedgeModel {
    fn kind(&self) -> OptionKind {
        self.kind
    }

    fn variant(&self) -> ModelVariant {
        ModelVariant::DnnGru
    }

    fn predict(&self, samples: &[HedgeSample]) -> Result<Vec<f64>> {
        check_kinds(self.kind, samples)?;
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(4096) {
            out.extend(self.predict_windows(chunk.iter().map(|s| (s.history.as_slice(), s.features.as_slice())))?);
        }
        Ok(out)
    }
}

impl Parameterized for GruHedgeModel {
    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.cell.params();
        p.push(self.head.weights.data());
        p.push(&self.head.bias);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.cell.params_mut();
        p.push(self.head.weights.data_mut());
        p.push(&mut self.head.bias);
        p
    }
}

impl Trainable for GruHedgeModel {
    type Aux = ();

    fn batch_loss(&self, batch: &[&HedgeSample]) -> Result<f64> {
        check_kinds_ref(self.kind, batch)?;
        let (steps, contract) = self.inputs(Self::batch_windows(batch))?;
        let deltas: Vec<f64> = self
            .raw_outputs(&steps, &contract)?
            .into_iter()
            .map(|r| self.output.apply(r, self.kind))
            .collect();
        Ok(hedge_loss_grad(&deltas, batch).0)
    }

    fn forward_backward(&self, batch: &[&HedgeSample]) -> Result<(f64, Gradients, ())> {
        check_kinds_ref(self.kind, batch)?;
        let (steps, contract) = self.inputs(Self::batch_windows(batch))?;
        let (h, cache) = self.cell.forward_sequence(&steps)?;
        let x = self.head_input(&h, &contract);
        let (z, a) = self.head.forward(&x);
        let raw = z.row(0);
        let deltas: Vec<f64> = raw.iter().map(|&r| self.output.apply(r, self.kind)).collect();
        let (loss, dd) = hedge_loss_grad(&deltas, batch);
        let draw: Vec<f64> = raw
            .iter()
            .zip(&dd)
            .map(|(&r, &g)| g * self.output.derivative(r, self.kind))
            .collect();
        let dz = Matrix::from_vec(1, batch.len(), draw)?;
        let (dw, db, dx) = self.head.backward(&x, &z, &a, &dz);
        let hid = self.cell.hidden();
        let dh = Matrix::from_vec(hid, batch.len(), dx.data()[..hid * batch.len()].to_vec())?;
        let mut grads = self.cell.backward(&cache, &dh)?;
        grads.extend(Gradients::new(vec![dw.into_vec(), db]));
        Ok((loss, grads, ()))
    }

    fn commit(&mut self, _aux: ()) {}

    fn kink_margin(&self, batch: &[&HedgeSample]) -> Result<f64> {
        check_kinds_ref(self.kind, batch)?;
        let (steps, contract) = self.inputs(Self::batch_windows(batch))?;
        Ok(self
            .raw_outputs(&steps, &contract)?
            .into_iter()
            .fold(f64::INFINITY, |m, r| m.min(self.output.kink_distance(r))))
    }
}

fn check_kinds_ref(kind: OptionKind, batch: &[&HedgeSample]) -> Result<()> {
    match batch.iter().find(|s| s.kind != kind) {
        Some(s) => Err(Error::KindMismatch {
            expected: s.kind,
            found: kind,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{assign_bucket, DeltaBucket};
    use crate::nn::{check_gradients, GradCheck};
    use chrono::NaiveDate;
    use rand::Rng;

    fn sample(kind: OptionKind, history: Vec<f64>, features: Vec<f64>, ds: f64, dv: f64) -> HedgeSample {
        HedgeSample {
            bucket: assign_bucket(features[1]).unwrap_or(DeltaBucket::from_tenths(5).unwrap()),
            bs_delta: features[1],
            features,
            history,
            delta_s: ds,
            delta_v: dv,
            bs_vega: 100.0,
            spot: 2000.0,
            ttm: 0.1,
            quote_date: NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(),
            kind,
            expiry_date: NaiveDate::from_ymd_opt(2015, 2, 5).unwrap(),
            strike: 2000.0,
        }
    }

    fn zeroed(kind: OptionKind, cfg: &GruConfig) -> GruHedgeModel {
        let mut m = GruHedgeModel::new(kind, cfg);
        for p in m.params_mut() {
            p.fill(0.0);
        }
        m
    }

    #[test]
    fn zero_model_predicts_zero() {
        let m = zeroed(OptionKind::Call, &GruConfig::default());
        let w = SequenceWindow {
            history: vec![0.2; SEQUENCE_LEN],
            contract_features: vec![0.1, 0.5],
        };
        assert_eq!(gru_predict(&m, &[w.clone(), w]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_cell_step_halves_state() {
        let m = zeroed(OptionKind::Call, &GruConfig::default());
        let h: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let out = gru_cell_step(&m, &[0.7], &h).unwrap();
        for (o, v) in out.iter().zip(&h) {
            assert_eq!(*o, 0.5 * v);
        }
    }

    #[test]
    fn identical_windows_identical_predictions() {
        let m = GruHedgeModel::new(OptionKind::Put, &GruConfig::default());
        let hist: Vec<f64> = (0..SEQUENCE_LEN).map(|t| 0.01 * (t as f64).sin()).collect();
        let w = SequenceWindow {
            history: hist,
            contract_features: vec![0.1, -0.4],
        };
        let p = gru_predict(&m, &[w.clone(), w]).unwrap();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn wrong_history_length_rejected() {
        let m = GruHedgeModel::new(OptionKind::Call, &GruConfig::default());
        let w = SequenceWindow {
            history: vec![0.2; 5],
            contract_features: vec![0.1, 0.5],
        };
        assert!(matches!(gru_predict(&m, &[w]), Err(Error::Contract(_))));
    }

    #[test]
    fn scalar_two_step_matches_hand_recurrence() {
        let cfg = GruConfig {
            hidden: 1,
            seq_len: 2,
            ..GruConfig::default()
        };
        let mut m = zeroed(OptionKind::Call, &cfg);
        {
            let (cell, head) = m.parts_mut();
            cell.wz = Matrix::from_vec(1, 1, vec![0.3]).unwrap();
            cell.uz = Matrix::from_vec(1, 1, vec![-0.2]).unwrap();
            cell.bz = vec![0.1];
            cell.wr = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
            cell.ur = Matrix::from_vec(1, 1, vec![0.4]).unwrap();
            cell.br = vec![-0.1];
            cell.wh = Matrix::from_vec(1, 1, vec![1.2]).unwrap();
            cell.uh = Matrix::from_vec(1, 1, vec![0.7]).unwrap();
            cell.bh = vec![0.05];
            head.weights = Matrix::from_vec(1, 3, vec![2.0, 0.1, 0.5]).unwrap();
            head.bias = vec![0.2];
        }
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let step = |x: f64, h: f64| {
            let z = sig(0.3 * x - 0.2 * h + 0.1);
            let r = sig(0.5 * x + 0.4 * h - 0.1);
            let c = (1.2 * x + 0.7 * r * h + 0.05).tanh();
            (1.0 - z) * h + z * c
        };
        let h2 = step(-0.4, step(0.8, 0.0));
        let expected = (2.0 * h2 + 0.1 * 0.25 + 0.5 * 0.6 + 0.2).max(0.0);
        let w = SequenceWindow {
            history: vec![0.8, -0.4],
            contract_features: vec![0.25, 0.6],
        };
        let got = gru_predict(&m, &[w]).unwrap()[0];
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut m = GruHedgeModel::new(OptionKind::Call, &GruConfig { seed: 4, ..GruConfig::default() });
        m.head.bias[0] = 1.0;
        let batch: Vec<HedgeSample> = (0..12)
            .map(|_| {
                let hist = (0..SEQUENCE_LEN).map(|_| rng.random_range(-1.5..1.5)).collect();
                let ds = rng.random_range(-20.0..20.0);
                sample(
                    OptionKind::Call,
                    hist,
                    vec![rng.random_range(-1.0..1.0), rng.random_range(0.1..0.9)],
                    ds,
                    0.4 * ds + rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let refs: Vec<&HedgeSample> = batch.iter().collect();
        let (_, grads) = m.loss_and_gradients(&refs).unwrap();
        let picks = GradCheck::all_indices(&grads);
        let report = check_gradients(&mut m, &grads, &picks, 1e-5, |mm| mm.batch_loss(&refs).unwrap());
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }
}
