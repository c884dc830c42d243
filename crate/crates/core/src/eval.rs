//! Gain evaluation per delta bucket and hedge-ratio curve extraction.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use log::warn;

use crate::data::{assign_bucket, DeltaBucket, HedgeSample, MarketContext, SEQUENCE_LEN};
use crate::error::{Error, Result};
use crate::market_math::{bs_vega, norm_inv_cdf, OptionKind, PricingInputs};
use crate::models::{HedgeRatioModel, ModelVariant};

/// Hedging performance of a model against the BS delta on a set of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketStats {
    pub n: usize,
    pub mse_model: f64,
    pub mse_bs: f64,
    /// `1 − mse_model/mse_bs`; `None` when `mse_bs = 0`.
    pub gain: Option<f64>,
}

impl BucketStats {
    fn from_sums(n: usize, sse_model: f64, sse_bs: f64) -> Self {
        let mse_model = sse_model / n as f64;
        let mse_bs = sse_bs / n as f64;
        Self {
            n,
            mse_model,
            mse_bs,
            gain: gain(mse_model, mse_bs),
        }
    }
}

/// `1 − mse_model/mse_bs`, undefined when the baseline error is zero.
pub fn gain(mse_model: f64, mse_bs: f64) -> Option<f64> {
    (mse_bs > 0.0).then(|| 1.0 - mse_model / mse_bs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_bucket: BTreeMap<DeltaBucket, BucketStats>,
    pub overall: BucketStats,
}

impl EvalReport {
    /// Report CSV: `bucket,n,mse_model,mse_bs,gain`, one row per non-empty
    /// bucket then an `overall` row. Undefined gains are written as `NA`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Contract(format!("writing report: {e}"));
        w.write_record(["bucket", "n", "mse_model", "mse_bs", "gain"]).map_err(err)?;
        let rows = self
            .per_bucket
            .iter()
            .map(|(b, s)| (b.to_string(), s))
            .chain(std::iter::once(("overall".to_string(), &self.overall)));
        for (name, s) in rows {
            w.write_record([
                name,
                s.n.to_string(),
                s.mse_model.to_string(),
                s.mse_bs.to_string(),
                s.gain.map_or_else(|| "NA".to_string(), |g| g.to_string()),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Contract(format!("writing report: {e}")))
    }
}

/// Evaluates `model` on `samples` against the BS-delta baseline.
pub fn evaluate(model: &dyn HedgeRatioModel, samples: &[HedgeSample]) -> Result<EvalReport> {
    let predictions = model.predict(samples)?;
    evaluate_predictions(&predictions, samples)
}

/// Per-bucket and overall MSEs for precomputed hedge ratios.
pub fn evaluate_predictions(predictions: &[f64], samples: &[HedgeSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Domain("evaluation on an empty sample set".into()));
    }
    if predictions.len() != samples.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} samples",
            predictions.len(),
            samples.len()
        )));
    }
    let mut sums: BTreeMap<DeltaBucket, (usize, f64, f64)> = BTreeMap::new();
    for (d, s) in predictions.iter().zip(samples) {
        let em = s.hedge_error(*d);
        let eb = s.hedge_error(s.bs_delta);
        let e = sums.entry(s.bucket).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += em * em;
        e.2 += eb * eb;
    }
    let (mut n, mut sm, mut sb) = (0, 0.0, 0.0);
    let per_bucket = sums
        .into_iter()
        .map(|(b, (k, m, bs))| {
            n += k;
            sm += m;
            sb += bs;
            (b, BucketStats::from_sums(k, m, bs))
        })
        .collect();
    Ok(EvalReport {
        per_bucket,
        overall: BucketStats::from_sums(n, sm, sb),
    })
}

/// Market state at which a hedge-ratio curve is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveContext {
    /// Time to maturity in years.
    pub ttm: f64,
    /// VIX level in index points; also the volatility used to map deltas
    /// back to moneyness.
    pub vix: f64,
    pub log_return: f64,
    pub rate: f64,
    pub div_yield: f64,
}

/// Documented sentiment presets for curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentimentPreset {
    /// Median VIX and median daily return.
    Median,
    /// 95th-percentile VIX and 5th-percentile daily return.
    Stress,
}

impl std::str::FromStr for SentimentPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(SentimentPreset::Median),
            "stress" => Ok(SentimentPreset::Stress),
            other => Err(Error::Config(format!("unknown sentiment preset `{other}` (median, stress)"))),
        }
    }
}

fn quantile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(values[lo] + (pos - lo as f64) * (values[hi] - values[lo]))
}

impl CurveContext {
    /// One-month curve at a preset sentiment level taken from the data;
    /// falls back to VIX 20 / return 0 (median) or VIX 40 / return −3%
    /// (stress) when the context is empty.
    pub fn from_preset(ctx: &MarketContext, preset: SentimentPreset, rate: f64, div_yield: f64) -> Self {
        let mut vix: Vec<f64> = (0..ctx.len()).filter_map(|d| ctx.day(d).vix).collect();
        let mut ret: Vec<f64> = (0..ctx.len()).filter_map(|d| ctx.log_return(d)).collect();
        let (qv, qr, fv, fr) = match preset {
            SentimentPreset::Median => (0.5, 0.5, 20.0, 0.0),
            SentimentPreset::Stress => (0.95, 0.05, 40.0, -0.03),
        };
        Self {
            ttm: 30.0 / 365.0,
            vix: quantile(&mut vix, qv).unwrap_or(fv),
            log_return: quantile(&mut ret, qr).unwrap_or(fr),
            rate,
            div_yield,
        }
    }
}

/// `bs_delta` grid from `start` to `end` inclusive in steps of `step`.
pub fn delta_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((start + step * i as f64) * 1e10).round() / 1e10).collect()
}

/// A synthetic sample whose BS delta is `delta` at the curve's state,
/// with features laid out for `variant`.
pub fn curve_sample(variant: ModelVariant, kind: OptionKind, delta: f64, at: &CurveContext) -> Result<HedgeSample> {
    let bucket = assign_bucket(delta)?;
    let vol = at.vix / 100.0;
    let call_delta = match kind {
        OptionKind::Call => delta,
        OptionKind::Put => delta + 1.0,
    };
    let d = norm_inv_cdf(call_delta)?;
    let spot = 100.0;
    let ln_moneyness = d * vol * at.ttm.sqrt() - (at.rate - at.div_yield + 0.5 * vol * vol) * at.ttm;
    let moneyness = ln_moneyness.exp();
    let strike = spot / moneyness;
    let vega = bs_vega(&PricingInputs::new(spot, strike, at.rate, at.div_yield, vol, at.ttm)?);
    let sentiment = match kind {
        OptionKind::Call => at.vix / 100.0,
        OptionKind::Put => at.log_return,
    };
    let features = crate::data::feature_names(variant, kind)
        .into_iter()
        .map(|name| match name {
            "ttm" => at.ttm,
            "bs_delta" => delta,
            "moneyness" => moneyness,
            "vix" => at.vix / 100.0,
            "log_return" => at.log_return,
            _ => unreachable!("unknown feature {name}"),
        })
        .collect();
    let history = if variant == ModelVariant::DnnGru {
        vec![sentiment; SEQUENCE_LEN]
    } else {
        Vec::new()
    };
    let date = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    Ok(HedgeSample {
        features,
        history,
        delta_s: 0.0,
        delta_v: 0.0,
        bs_delta: delta,
        bs_vega: vega,
        spot,
        ttm: at.ttm,
        bucket,
        quote_date: date,
        kind,
        expiry_date: date + chrono::Days::new((at.ttm * 365.0).round() as u64),
        strike,
    })
}

/// `(δ_BS, predicted δ)` for every grid point inside the filtered delta
/// range; points outside it are skipped with a warning.
pub fn hedge_ratio_curve(model: &dyn HedgeRatioModel, at: &CurveContext, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let kind = model.kind();
    let mut points = Vec::with_capacity(grid.len());
    let mut samples = Vec::with_capacity(grid.len());
    for &delta in grid {
        let in_range = match kind {
            OptionKind::Call => (0.05..=0.95).contains(&delta),
            OptionKind::Put => (-0.95..=-0.05).contains(&delta),
        };
        if !in_range {
            warn!("curve point {delta} outside the {kind} delta range; skipped");
            continue;
        }
        samples.push(curve_sample(model.variant(), kind, delta, at)?);
        points.push(delta);
    }
    let predicted = model.predict(&samples)?;
    Ok(points.into_iter().zip(predicted).collect())
}

/// Curve CSV with columns `bs_delta,predicted_delta`.
pub fn write_curve_csv(writer: impl Write, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Contract(format!("writing curve: {e}"));
    w.write_record(["bs_delta", "predicted_delta"]).map_err(err)?;
    for (x, y) in curve {
        w.write_record([x.to_string(), y.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Contract(format!("writing curve: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_math::bs_delta;
    use crate::models::BsBaseline;

    fn sample(delta: f64, ds: f64, dv: f64) -> HedgeSample {
        let at = CurveContext {
            ttm: 0.1,
            vix: 20.0,
            log_return: 0.0,
            rate: 0.0,
            div_yield: 0.0,
        };
        let mut s = curve_sample(ModelVariant::Dnn2, OptionKind::Call, delta, &at).unwrap();
        s.delta_s = ds;
        s.delta_v = dv;
        s
    }

    fn panel() -> Vec<HedgeSample> {
        (0..200)
            .map(|i| {
                let d = 0.06 + 0.88 * (i as f64 / 199.0);
                let ds = ((i * 7) % 13) as f64 - 6.0;
                sample(d, ds, 0.9 * d * ds + 0.1 * ((i % 5) as f64 - 2.0))
            })
            .collect()
    }

    #[test]
    fn bs_model_has_zero_gain() {
        let p = panel();
        let r = evaluate(&BsBaseline { kind: OptionKind::Call }, &p).unwrap();
        assert_eq!(r.overall.gain, Some(0.0));
        for s in r.per_bucket.values() {
            assert_eq!(s.gain, Some(0.0));
        }
    }

    #[test]
    fn perfect_model_has_unit_gain() {
        let p = panel();
        let preds: Vec<f64> = p.iter().map(|s| if s.delta_s != 0.0 { s.delta_v / s.delta_s } else { 0.0 }).collect();
        let mut q = p.clone();
        q.retain(|s| s.delta_s != 0.0);
        let preds: Vec<f64> = preds.into_iter().zip(&p).filter(|(_, s)| s.delta_s != 0.0).map(|(d, _)| d).collect();
        let r = evaluate_predictions(&preds, &q).unwrap();
        assert!((r.overall.gain.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identities_hold() {
        let p = panel();
        let preds: Vec<f64> = p.iter().map(|s| 0.9 * s.bs_delta).collect();
        let r = evaluate_predictions(&preds, &p).unwrap();
        let total: usize = r.per_bucket.values().map(|s| s.n).sum();
        assert_eq!(total, r.overall.n);
        let weighted: f64 = r.per_bucket.values().map(|s| s.n as f64 * s.mse_model).sum::<f64>() / total as f64;
        assert!((weighted - r.overall.mse_model).abs() <= 1e-12 * r.overall.mse_model.max(1.0));
        for s in r.per_bucket.values() {
            assert!((s.gain.unwrap() - (1.0 - s.mse_model / s.mse_bs)).abs() <= 1e-12);
        }
    }

    #[test]
    fn gain_from_mse_ratio() {
        assert!((gain(0.6923, 1.0).unwrap() - 0.3077).abs() < 1e-12);
    }

    #[test]
    fn zero_baseline_error_is_undefined() {
        let p = vec![sample(0.5, 0.0, 0.0), sample(0.52, 0.0, 0.0)];
        let r = evaluate_predictions(&[0.5, 0.5], &p).unwrap();
        assert_eq!(r.overall.gain, None);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().last().unwrap().ends_with(",NA"));
        assert_eq!(text.lines().count(), 1 + r.per_bucket.len() + 1);
    }

    #[test]
    fn empty_is_error() {
        assert!(evaluate_predictions(&[], &[]).is_err());
    }

    #[test]
    fn curve_sample_inverts_delta() {
        let at = CurveContext {
            ttm: 30.0 / 365.0,
            vix: 25.0,
            log_return: -0.01,
            rate: 0.02,
            div_yield: 0.015,
        };
        for kind in [OptionKind::Call, OptionKind::Put] {
            for d in [0.1, 0.35, 0.5, 0.8] {
                let d = if kind == OptionKind::Put { -d } else { d };
                let s = curve_sample(ModelVariant::Dnn3Star, kind, d, &at).unwrap();
                let p = PricingInputs::new(s.spot, s.strike, at.rate, at.div_yield, 0.25, at.ttm).unwrap();
                assert!((bs_delta(&p, kind) - d).abs() < 1e-10);
                assert_eq!(s.features.len(), 5);
            }
        }
    }

    #[test]
    fn bs_curve_is_diagonal() {
        let at = CurveContext {
            ttm: 30.0 / 365.0,
            vix: 20.0,
            log_return: 0.0,
            rate: 0.0,
            div_yield: 0.0,
        };
        let grid = delta_grid(0.05, 0.95, 0.05);
        assert_eq!(grid.len(), 19);
        let c = hedge_ratio_curve(&BsBaseline { kind: OptionKind::Call }, &at, &grid).unwrap();
        assert_eq!(c.len(), 19);
        for ((x, y), g) in c.iter().zip(&grid) {
            assert_eq!(x, g);
            assert_eq!(x, y);
        }
        let c = hedge_ratio_curve(&BsBaseline { kind: OptionKind::Call }, &at, &[0.5, 1.2, -0.3]).unwrap();
        assert_eq!(c, vec![(0.5, 0.5)]);
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&mut [3.0, 1.0, 2.0], 0.5), Some(2.0));
        assert_eq!(quantile(&mut [], 0.5), None);
    }
}
