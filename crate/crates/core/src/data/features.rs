use std::collections::HashMap;

use chrono::NaiveDate;

use crate::market_math::OptionKind;
use crate::models::ModelVariant;

use super::{OptionQuote, DAYS_PER_YEAR};

/// Per-day market state shared by all contracts quoted that day.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DayContext {
    /// VIX close in index points.
    pub vix: Option<f64>,
    /// `ln(S_t/S_{t−1})` over the previous trading day.
    pub log_return: Option<f64>,
}

impl DayContext {
    /// The sentiment input for `kind`: VIX/100 for calls, log-return for puts.
    pub fn sentiment(&self, kind: OptionKind) -> Option<f64> {
        match kind {
            OptionKind::Call => self.vix.map(|v| v / 100.0),
            OptionKind::Put => self.log_return,
        }
    }
}

/// Trading calendar with the index level and VIX per day.
///
/// The calendar is the sorted set of distinct quote dates.
#[derive(Debug, Clone, Default)]
pub struct MarketContext {
    calendar: Vec<NaiveDate>,
    index: HashMap<NaiveDate, usize>,
    spots: Vec<Option<f64>>,
    vix: Vec<Option<f64>>,
}

impl MarketContext {
    pub fn from_quotes(quotes: &[OptionQuote]) -> Self {
        let mut calendar: Vec<NaiveDate> = quotes.iter().map(|q| q.quote_date).collect();
        calendar.sort_unstable();
        calendar.dedup();
        let index: HashMap<_, _> = calendar.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let mut spots = vec![None; calendar.len()];
        let mut vix = vec![None; calendar.len()];
        for q in quotes {
            let i = index[&q.quote_date];
            if spots[i].is_none() {
                spots[i] = q.underlying.filter(|s| *s > 0.0);
            }
            if vix[i].is_none() {
                vix[i] = q.vix;
            }
        }
        Self {
            calendar,
            index,
            spots,
            vix,
        }
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn len(&self) -> usize {
        self.calendar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calendar.is_empty()
    }

    /// Position of `date` in the trading calendar.
    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.index.get(&date).copied()
    }

    pub fn spot(&self, day: usize) -> Option<f64> {
        self.spots.get(day).copied().flatten()
    }

    pub fn log_return(&self, day: usize) -> Option<f64> {
        if day == 0 {
            return None;
        }
        Some((self.spot(day)? / self.spot(day - 1)?).ln())
    }

    pub fn day(&self, day: usize) -> DayContext {
        DayContext {
            vix: self.vix.get(day).copied().flatten(),
            log_return: self.log_return(day),
        }
    }

    /// Sentiment series value for `kind` on trading day `day`.
    pub fn sentiment(&self, day: usize, kind: OptionKind) -> Option<f64> {
        self.day(day).sentiment(kind)
    }
}

/// Names of the raw features for a variant, in layout order.
pub fn feature_names(variant: ModelVariant, kind: OptionKind) -> Vec<&'static str> {
    let sentiment = match kind {
        OptionKind::Call => "vix",
        OptionKind::Put => "log_return",
    };
    match variant {
        ModelVariant::Dnn2 | ModelVariant::DnnGru | ModelVariant::Hw | ModelVariant::BsBaseline => {
            vec!["ttm", "bs_delta"]
        }
        ModelVariant::Dnn3 => vec!["ttm", "bs_delta", sentiment],
        ModelVariant::Dnn2Plus => vec!["ttm", "bs_delta", "moneyness"],
        ModelVariant::Dnn3Plus => vec!["ttm", "bs_delta", "moneyness", sentiment],
        ModelVariant::Dnn3Star => vec!["ttm", "bs_delta", "moneyness", "vix", "log_return"],
    }
}

/// Raw (unstandardized) feature vector of `quote` for `variant`.
///
/// Returns `None` when an input is unavailable, e.g. the index return on
/// the first day of the calendar; such samples are skipped.
pub fn build_features(quote: &OptionQuote, variant: ModelVariant, day: &DayContext) -> Option<Vec<f64>> {
    let ttm = quote.ttm_days() as f64 / DAYS_PER_YEAR;
    let delta = quote.delta?;
    let names = feature_names(variant, quote.kind);
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let value = match name {
            "ttm" => ttm,
            "bs_delta" => delta,
            "moneyness" => quote.underlying? / quote.strike?,
            "vix" => day.vix? / 100.0,
            "log_return" => day.log_return?,
            _ => unreachable!("unknown feature {name}"),
        };
        if !value.is_finite() {
            return None;
        }
        out.push(value);
    }
    Some(out)
}

/// Per-feature z-score standardization fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Identity transform for `dim` features.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fits mean and population standard deviation. A feature with
    /// (near) zero spread gets std 1 so it is only centered.
    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            n += 1;
            for j in 0..dim {
                let d = row[j] - mean[j];
                mean[j] += d / n as f64;
                m2[j] += d * (row[j] - mean[j]);
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let std = m2
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, j: usize, value: f64) -> f64 {
        (value - self.mean[j]) / self.std[j]
    }
}
