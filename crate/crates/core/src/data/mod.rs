//! Quote ingestion and the sample-building pipeline.
//!
//! Flow: [`load_quotes`] → [`filter_quotes`] → [`pair_consecutive`] (or
//! [`build_sequences`] for the recurrent model) → [`split_dataset`].

mod bucket;
mod features;
mod pairing;
mod quotes;
mod sequences;
mod split;

pub use bucket::{assign_bucket, DeltaBucket};
pub use features::{build_features, feature_names, DayContext, FeatureStats, MarketContext};
pub use pairing::{pair_consecutive, pair_with_context, quote_samples, HedgeSample};
pub use quotes::{filter_quotes, filter_rejections, load_quotes, read_quotes, write_quotes, OptionQuote, QUOTE_HEADER};
pub use sequences::{build_sequences, build_sequences_with_context, history_at, SequenceWindow, SEQUENCE_LEN};
pub use split::{calendar_cut, split_dataset, DatasetSplit};

/// Calendar days per year used to turn days-to-maturity into τ.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// Minimum days to maturity kept by the filter.
pub const MIN_TTM_DAYS: i64 = 14;

/// Full sample pipeline for one option kind: the market context is built
/// from the unfiltered panel, then quotes are filtered, restricted to
/// `kind` and paired on consecutive trading days (with sentiment windows
/// for the recurrent model).
pub fn prepare_samples(
    quotes: &[OptionQuote],
    variant: crate::models::ModelVariant,
    kind: crate::market_math::OptionKind,
) -> Vec<HedgeSample> {
    let ctx = MarketContext::from_quotes(quotes);
    let kept: Vec<OptionQuote> = filter_quotes(quotes).into_iter().filter(|q| q.kind == kind).collect();
    if variant == crate::models::ModelVariant::DnnGru {
        build_sequences_with_context(&kept, kind, &ctx)
            .into_iter()
            .map(|(_, s)| s)
            .collect()
    } else {
        pair_with_context(&kept, variant, &ctx)
    }
}
