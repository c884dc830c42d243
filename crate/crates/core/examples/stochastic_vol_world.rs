//! Synthetic stochastic-volatility market: Hull-White and DNN3 call models
//! against the BS delta, with per-bucket gains.
//!
//! `cargo run --release --example stochastic_vol_world -- [n_days] [max_epochs]`

use std::time::Instant;

use mvhedge::data::{calendar_cut, prepare_samples, split_dataset};
use mvhedge::eval::evaluate;
use mvhedge::market_math::OptionKind;
use mvhedge::models::ModelVariant;
use mvhedge::synth::{generate_quote_panel, GeneratorConfig};
use mvhedge::train::{fit_variant, ModelSpec, TrainConfig};

fn main() -> mvhedge::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_days: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2520);
    let max_epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);

    let t0 = Instant::now();
    let cfg = GeneratorConfig {
        n_days,
        ..GeneratorConfig::default()
    };
    let quotes = generate_quote_panel(&cfg)?;
    let test_start = calendar_cut(&quotes, 0.8).expect("non-empty panel");
    println!("{} quotes, test from {test_start} ({:.1?})", quotes.len(), t0.elapsed());

    let train_cfg = TrainConfig {
        max_epochs,
        ..TrainConfig::default()
    };
    for variant in [ModelVariant::Hw, ModelVariant::Dnn3] {
        let t = Instant::now();
        let samples = prepare_samples(&quotes, variant, OptionKind::Call);
        let split = split_dataset(samples, test_start, 0.2, 7)?;
        let (model, log) = fit_variant(variant, OptionKind::Call, &split, &ModelSpec::default(), &train_cfg)?;
        let report = evaluate(&model, &split.test)?;
        println!(
            "{variant}: train {} / val {} / test {}, {} epochs, {:.1?}",
            split.train.len(),
            split.validation.len(),
            split.test.len(),
            log.records.len(),
            t.elapsed()
        );
        for (bucket, stats) in &report.per_bucket {
            println!("  {bucket}: n={:>6} gain={:?}", stats.n, stats.gain);
        }
        println!("  overall: n={} gain={:?}", report.overall.n, report.overall.gain);
    }
    Ok(())
}
