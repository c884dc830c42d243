use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{HedgeSample, MarketContext, OptionQuote};

/// Train/validation/test partition of hedge samples.
#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub train: Vec<HedgeSample>,
    pub validation: Vec<HedgeSample>,
    pub test: Vec<HedgeSample>,
}

/// Trading date `frac` of the way through the calendar of `quotes`.
pub fn calendar_cut(quotes: &[OptionQuote], frac: f64) -> Option<NaiveDate> {
    let ctx = MarketContext::from_quotes(quotes);
    let cal = ctx.calendar();
    (!cal.is_empty()).then(|| cal[((cal.len() as f64 * frac) as usize).min(cal.len() - 1)])
}

/// Samples dated on or after `test_start` form the test set; the rest are
/// shuffled with `seed` and cut into train and validation parts.
///
/// Each part keeps the input order of its members.
pub fn split_dataset(
    samples: Vec<HedgeSample>,
    test_start: NaiveDate,
    val_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!("val_fraction must be in (0,1), got {val_fraction}")));
    }
    let (test, fit): (Vec<_>, Vec<_>) = samples.into_iter().partition(|s| s.quote_date >= test_start);

    let n_val = (fit.len() as f64 * val_fraction).round() as usize;
    let mut order: Vec<usize> = (0..fit.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; fit.len()];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }

    let mut train = Vec::with_capacity(fit.len() - n_val);
    let mut validation = Vec::with_capacity(n_val);
    for (s, v) in fit.into_iter().zip(is_val) {
        if v {
            validation.push(s);
        } else {
            train.push(s);
        }
    }
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Config(format!(
            "split leaves an empty side: {} train, {} validation samples before {test_start}",
            train.len(),
            validation.len()
        )));
    }
    Ok(DatasetSplit {
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::assign_bucket;
    use crate::market_math::OptionKind;
    use chrono::Days;

    fn sample(day: u64) -> HedgeSample {
        let d = NaiveDate::from_ymd_opt(2012, 1, 2).unwrap() + Days::new(day);
        HedgeSample {
            features: vec![day as f64],
            history: vec![],
            delta_s: 1.0,
            delta_v: 0.5,
            bs_delta: 0.5,
            bs_vega: 1.0,
            spot: 100.0,
            ttm: 0.1,
            bucket: assign_bucket(0.5).unwrap(),
            quote_date: d,
            kind: OptionKind::Call,
            expiry_date: d + Days::new(60),
            strike: 100.0,
        }
    }

    #[test]
    fn proportions() {
        let samples: Vec<_> = (0..10).map(sample).collect();
        let split = split_dataset(samples, NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 0.2, 7).unwrap();
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (8, 2, 0));
    }

    #[test]
    fn deterministic_and_partitioning() {
        let samples: Vec<_> = (0..200).map(sample).collect();
        let start = NaiveDate::from_ymd_opt(2012, 1, 2).unwrap() + Days::new(150);
        let a = split_dataset(samples.clone(), start, 0.2, 11).unwrap();
        let b = split_dataset(samples.clone(), start, 0.2, 11).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test.len(), 50);
        assert!(a.test.iter().all(|s| s.quote_date >= start));
        assert!(a.train.iter().chain(&a.validation).all(|s| s.quote_date < start));

        let mut all: Vec<f64> = a.train.iter().chain(&a.validation).chain(&a.test).map(|s| s.features[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..200).map(|d| d as f64).collect::<Vec<_>>());

        let c = split_dataset(samples, start, 0.2, 12).unwrap();
        assert_ne!(a.validation, c.validation);
    }

    #[test]
    fn empty_side_is_error() {
        let samples: Vec<_> = (0..2).map(sample).collect();
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        assert!(matches!(split_dataset(samples.clone(), start, 0.2, 1), Err(Error::Config(_))));
        assert!(split_dataset(samples, start, 1.0, 1).is_err());
    }
}
