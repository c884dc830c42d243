//! Trains a small DNN3 call model and prints its hedge ratio against the
//! BS delta under median and stressed market sentiment.

use mvhedge::data::{calendar_cut, prepare_samples, split_dataset, MarketContext};
use mvhedge::eval::{delta_grid, hedge_ratio_curve, CurveContext, SentimentPreset};
use mvhedge::market_math::OptionKind;
use mvhedge::models::{FnnConfig, ModelVariant};
use mvhedge::synth::{generate_quote_panel, GeneratorConfig};
use mvhedge::train::{fit_variant, ModelSpec, TrainConfig};

fn main() -> mvhedge::Result<()> {
    let cfg = GeneratorConfig {
        n_days: 504,
        ..GeneratorConfig::default()
    };
    let quotes = generate_quote_panel(&cfg)?;
    let samples = prepare_samples(&quotes, ModelVariant::Dnn3, OptionKind::Call);
    let split = split_dataset(samples, calendar_cut(&quotes, 0.8).expect("non-empty"), 0.2, 2)?;
    let spec = ModelSpec {
        fnn: FnnConfig {
            hidden_width: 32,
            ..FnnConfig::default()
        },
        ..ModelSpec::default()
    };
    let train_cfg = TrainConfig {
        max_epochs: 20,
        batch_size: 256,
        ..TrainConfig::default()
    };
    let (model, _) = fit_variant(ModelVariant::Dnn3, OptionKind::Call, &split, &spec, &train_cfg)?;

    let ctx = MarketContext::from_quotes(&quotes);
    let grid = delta_grid(0.1, 0.9, 0.1);
    for preset in [SentimentPreset::Median, SentimentPreset::Stress] {
        let mut at = CurveContext::from_preset(&ctx, preset, cfg.rate, cfg.div_yield);
        at.ttm = 60.0 / 365.0;
        println!("{preset:?}: vix {:.1}, log return {:+.4}", at.vix, at.log_return);
        for (d, h) in hedge_ratio_curve(&model, &at, &grid)? {
            println!("  bs {d:.2} -> model {h:.4} ({:+.4})", h - d);
        }
    }
    Ok(())
}
