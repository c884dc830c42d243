use crate::market_math::OptionKind;
use crate::models::ModelVariant;

use super::{pair_with_context, HedgeSample, MarketContext, OptionQuote};

/// Number of trading days fed to the recurrent model.
pub const SEQUENCE_LEN: usize = 22;

/// Recurrent-model input: the sentiment history ending at `t` plus the
/// contract features joining at the head.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow {
    /// Oldest first; VIX/100 for calls, daily log-returns for puts.
    pub history: Vec<f64>,
    /// `(ttm, bs_delta)` at `t`.
    pub contract_features: Vec<f64>,
}

impl SequenceWindow {
    pub fn from_sample(sample: &HedgeSample) -> Self {
        Self {
            history: sample.history.clone(),
            contract_features: sample.features.clone(),
        }
    }
}

/// Builds recurrent-model samples of one option kind.
///
/// Samples dated within the first 22 trading days of the calendar are
/// dropped; windows are never padded.
pub fn build_sequences(quotes: &[OptionQuote], kind: OptionKind) -> Vec<(SequenceWindow, HedgeSample)> {
    let ctx = MarketContext::from_quotes(quotes);
    build_sequences_with_context(quotes, kind, &ctx)
}

pub fn build_sequences_with_context(
    quotes: &[OptionQuote],
    kind: OptionKind,
    ctx: &MarketContext,
) -> Vec<(SequenceWindow, HedgeSample)> {
    let of_kind: Vec<OptionQuote> = quotes.iter().filter(|q| q.kind == kind).cloned().collect();
    pair_with_context(&of_kind, ModelVariant::DnnGru, ctx)
        .into_iter()
        .filter_map(|mut sample| {
            sample.history = history_at(ctx, ctx.position(sample.quote_date)?, kind)?;
            Some((SequenceWindow::from_sample(&sample), sample))
        })
        .collect()
}

/// The `SEQUENCE_LEN` sentiment values ending at trading day `day`.
pub fn history_at(ctx: &MarketContext, day: usize, kind: OptionKind) -> Option<Vec<f64>> {
    if day < SEQUENCE_LEN {
        return None;
    }
    (day + 1 - SEQUENCE_LEN..=day)
        .map(|d| ctx.sentiment(d, kind).filter(|v| v.is_finite()))
        .collect()
}
