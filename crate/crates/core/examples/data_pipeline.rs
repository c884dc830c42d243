//! Quote filtering, feature construction and day-over-day pairing on a
//! small synthetic panel, followed by the date-based split.

use std::collections::BTreeMap;

use mvhedge::data::{
    calendar_cut, feature_names, filter_quotes, filter_rejections, prepare_samples, split_dataset, FeatureStats,
};
use mvhedge::market_math::OptionKind;
use mvhedge::models::ModelVariant;
use mvhedge::synth::{generate_quote_panel, GeneratorConfig};

fn main() -> mvhedge::Result<()> {
    let cfg = GeneratorConfig {
        n_days: 126,
        ..GeneratorConfig::default()
    };
    let quotes = generate_quote_panel(&cfg)?;
    let kept = filter_quotes(&quotes);
    println!("{} quotes, {} kept by the filter", quotes.len(), kept.len());
    for (rule, n) in filter_rejections(&quotes) {
        println!("  rejected by {rule}: {n}");
    }

    for variant in [ModelVariant::Dnn2, ModelVariant::Dnn3Plus, ModelVariant::DnnGru] {
        let samples = prepare_samples(&quotes, variant, OptionKind::Call);
        println!(
            "{variant}: {} call samples, features {:?}",
            samples.len(),
            feature_names(variant, OptionKind::Call)
        );
        if let Some(s) = samples.first() {
            println!("  first: {:?} history len {}", s.features, s.history.len());
        }
    }

    let samples = prepare_samples(&quotes, ModelVariant::Dnn3, OptionKind::Put);
    let mut per_bucket: BTreeMap<String, usize> = BTreeMap::new();
    for s in &samples {
        *per_bucket.entry(s.bucket.to_string()).or_default() += 1;
    }
    println!("put samples per bucket: {per_bucket:?}");

    let test_start = calendar_cut(&quotes, 0.8).expect("non-empty panel");
    let split = split_dataset(samples, test_start, 0.2, 1)?;
    let dim = split.train[0].features.len();
    let stats = FeatureStats::fit(dim, split.train.iter().map(|s| s.features.as_slice()));
    println!(
        "split at {test_start}: train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    println!("train feature means {:?}", stats.mean);
    Ok(())
}
