use std::collections::HashMap;

use chrono::NaiveDate;

use crate::market_math::{bs_vega, OptionKind, PricingInputs};
use crate::models::ModelVariant;

use super::{assign_bucket, build_features, DeltaBucket, MarketContext, OptionQuote, DAYS_PER_YEAR};

/// One hedging observation: inputs known at `t` and the realized changes
/// over `(t, t+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeSample {
    /// Raw feature vector, layout fixed by the model variant.
    pub features: Vec<f64>,
    /// Sentiment history for the recurrent model (empty otherwise).
    pub history: Vec<f64>,
    /// `S_{t+1} − S_t`.
    pub delta_s: f64,
    /// `V_{t+1} − V_t` on mid quotes.
    pub delta_v: f64,
    /// Practitioner BS delta at `t`.
    pub bs_delta: f64,
    /// Practitioner BS vega at `t`, per unit volatility.
    pub bs_vega: f64,
    pub spot: f64,
    /// Time to maturity in years at `t`.
    pub ttm: f64,
    pub bucket: DeltaBucket,
    pub quote_date: NaiveDate,
    pub kind: OptionKind,
    pub expiry_date: NaiveDate,
    pub strike: f64,
}

impl HedgeSample {
    /// One-period hedging error for hedge ratio `delta`.
    pub fn hedge_error(&self, delta: f64) -> f64 {
        self.delta_v - delta * self.delta_s
    }
}

#[derive(Hash, PartialEq, Eq)]
struct ContractDay {
    day: usize,
    expiry: NaiveDate,
    strike_bits: u64,
    kind: OptionKind,
}

/// Pairs each contract quoted on consecutive trading days into a sample,
/// using the calendar implied by `quotes` themselves.
pub fn pair_consecutive(quotes: &[OptionQuote], variant: ModelVariant) -> Vec<HedgeSample> {
    pair_with_context(quotes, variant, &MarketContext::from_quotes(quotes))
}

/// As [`pair_consecutive`] with an explicit market context, typically built
/// from the unfiltered panel so the calendar and index returns are complete.
pub fn pair_with_context(quotes: &[OptionQuote], variant: ModelVariant, ctx: &MarketContext) -> Vec<HedgeSample> {
    let mut by_key: HashMap<ContractDay, usize> = HashMap::with_capacity(quotes.len());
    let mut firsts = Vec::with_capacity(quotes.len());
    for (i, q) in quotes.iter().enumerate() {
        let (Some(day), Some(strike)) = (ctx.position(q.quote_date), q.strike) else {
            continue;
        };
        let key = ContractDay {
            day,
            expiry: q.expiry_date,
            strike_bits: strike.to_bits(),
            kind: q.kind,
        };
        if let std::collections::hash_map::Entry::Vacant(e) = by_key.entry(key) {
            e.insert(i);
            firsts.push((i, day, strike));
        }
    }

    let mut samples = Vec::new();
    for (i, day, strike) in firsts {
        let q = &quotes[i];
        let next_key = ContractDay {
            day: day + 1,
            expiry: q.expiry_date,
            strike_bits: strike.to_bits(),
            kind: q.kind,
        };
        let Some(&j) = by_key.get(&next_key) else {
            continue;
        };
        if let Some(s) = make_sample(q, &quotes[j], variant, ctx, day) {
            samples.push(s);
        }
    }
    sort_samples(&mut samples);
    samples
}

pub(crate) fn sort_samples(samples: &mut [HedgeSample]) {
    samples.sort_by(|a, b| {
        (a.quote_date, a.expiry_date, a.kind)
            .cmp(&(b.quote_date, b.expiry_date, b.kind))
            .then(a.strike.total_cmp(&b.strike))
    });
}

fn make_sample(
    now: &OptionQuote,
    next: &OptionQuote,
    variant: ModelVariant,
    ctx: &MarketContext,
    day: usize,
) -> Option<HedgeSample> {
    let mut s = unpaired_sample(now, variant, ctx, day)?;
    s.delta_s = next.underlying? - s.spot;
    s.delta_v = next.mid()? - now.mid()?;
    Some(s)
}

fn unpaired_sample(now: &OptionQuote, variant: ModelVariant, ctx: &MarketContext, day: usize) -> Option<HedgeSample> {
    let spot = now.underlying?;
    let strike = now.strike?;
    let bs_delta = now.delta?;
    let bucket = assign_bucket(bs_delta).ok()?;
    let ttm = now.ttm_days() as f64 / DAYS_PER_YEAR;
    let inputs = PricingInputs::new(
        spot,
        strike,
        now.rate.unwrap_or(0.0),
        now.div_yield.unwrap_or(0.0),
        now.implied_vol?,
        ttm,
    )
    .ok()?;
    let features = build_features(now, variant, &ctx.day(day))?;
    Some(HedgeSample {
        features,
        history: Vec::new(),
        delta_s: 0.0,
        delta_v: 0.0,
        bs_delta,
        bs_vega: bs_vega(&inputs),
        spot,
        ttm,
        bucket,
        quote_date: now.quote_date,
        kind: now.kind,
        expiry_date: now.expiry_date,
        strike,
    })
}

/// Samples for prediction only: inputs at the quote date with zero
/// realized changes, tagged with the index of their source quote. Quotes
/// lacking an input (or, for the recurrent model, a full history) are
/// skipped.
pub fn quote_samples(quotes: &[OptionQuote], variant: ModelVariant, ctx: &MarketContext) -> Vec<(usize, HedgeSample)> {
    quotes
        .iter()
        .enumerate()
        .filter_map(|(i, q)| {
            let day = ctx.position(q.quote_date)?;
            let mut s = unpaired_sample(q, variant, ctx, day)?;
            if variant == ModelVariant::DnnGru {
                s.history = super::history_at(ctx, day, q.kind)?;
            }
            Some((i, s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::quotes::tests::quote;
    use chrono::Days;

    fn on(q: &OptionQuote, days: u64, mid: f64, spot: f64) -> OptionQuote {
        let mut q = q.clone();
        q.quote_date = q.quote_date + Days::new(days);
        q.bid = Some(mid);
        q.ask = Some(mid);
        q.underlying = Some(spot);
        q
    }

    #[test]
    fn single_day_gives_nothing() {
        let q = quote(OptionKind::Call, 0.5);
        assert!(pair_consecutive(&[q], ModelVariant::Dnn2).is_empty());
    }

    #[test]
    fn consecutive_pair_arithmetic() {
        let base = quote(OptionKind::Call, 0.5);
        let quotes = [on(&base, 0, 10.0, 3000.0), on(&base, 1, 10.4, 3012.0)];
        let s = pair_consecutive(&quotes, ModelVariant::Dnn2);
        assert_eq!(s.len(), 1);
        assert!((s[0].delta_v - 0.4).abs() < 1e-12);
        assert_eq!(s[0].delta_s, 12.0);
        assert_eq!(s[0].bucket.tenths(), 5);
        assert_eq!(s[0].quote_date, quotes[0].quote_date);
    }

    #[test]
    fn calendar_gap_breaks_pair() {
        let base = quote(OptionKind::Call, 0.5);
        let other = {
            let mut o = quote(OptionKind::Put, -0.5);
            o.quote_date = base.quote_date + Days::new(1);
            o
        };
        // the contract is quoted on days 0 and 2 of a three-day calendar
        let quotes = [on(&base, 0, 10.0, 3000.0), other, on(&base, 2, 10.4, 3012.0)];
        assert!(pair_consecutive(&quotes, ModelVariant::Dnn2).is_empty());
    }

    #[test]
    fn weekend_is_consecutive_in_calendar() {
        let base = quote(OptionKind::Call, 0.5);
        let quotes = [on(&base, 0, 10.0, 3000.0), on(&base, 3, 10.4, 3012.0)];
        assert_eq!(pair_consecutive(&quotes, ModelVariant::Dnn2).len(), 1);
    }

    #[test]
    fn return_feature_needs_previous_day() {
        let base = quote(OptionKind::Put, -0.5);
        let quotes = [
            on(&base, 0, 10.0, 3000.0),
            on(&base, 1, 10.4, 2970.0),
            on(&base, 2, 10.1, 2980.0),
        ];
        let s = pair_consecutive(&quotes, ModelVariant::Dnn3);
        assert_eq!(s.len(), 1);
        assert!((s[0].features[2] - 0.99f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn duplicate_rows_pair_once() {
        let base = quote(OptionKind::Call, 0.5);
        let quotes = [
            on(&base, 0, 10.0, 3000.0),
            on(&base, 0, 11.0, 3000.0),
            on(&base, 1, 10.4, 3012.0),
        ];
        let s = pair_consecutive(&quotes, ModelVariant::Dnn2);
        assert_eq!(s.len(), 1);
        assert!((s[0].delta_v - 0.4).abs() < 1e-12);
    }
}
