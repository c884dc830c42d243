//! Trains the recurrent hedge model on the VIX history of synthetic call
//! quotes and steps the cell by hand on one window.

use mvhedge::data::{calendar_cut, prepare_samples, split_dataset, SequenceWindow};
use mvhedge::eval::evaluate;
use mvhedge::market_math::OptionKind;
use mvhedge::models::{gru_cell_step, gru_predict, GruConfig, GruHedgeModel, HedgeRatioModel, ModelVariant};
use mvhedge::synth::{generate_quote_panel, GeneratorConfig};
use mvhedge::train::{train, TrainConfig};

fn main() -> mvhedge::Result<()> {
    let cfg = GeneratorConfig {
        n_days: 252,
        ..GeneratorConfig::default()
    };
    let quotes = generate_quote_panel(&cfg)?;
    let samples = prepare_samples(&quotes, ModelVariant::DnnGru, OptionKind::Call);
    let split = split_dataset(samples, calendar_cut(&quotes, 0.8).expect("non-empty"), 0.2, 5)?;

    let model = GruHedgeModel::fit_new(OptionKind::Call, &GruConfig::default(), &split.train)?;
    let out = train(
        model,
        &split,
        &TrainConfig {
            max_epochs: 15,
            batch_size: 256,
            ..TrainConfig::default()
        },
    )?;
    println!("best epoch {:?}, validation loss {:?}", out.best_epoch, out.best_val_loss);
    let report = evaluate(&out.model, &split.test)?;
    println!("test gain {:?} on {} samples", report.overall.gain, report.overall.n);

    let model = &out.model;
    let sample = &split.test[0];
    let window = SequenceWindow::from_sample(sample);
    let mut h = vec![0.0; model.cell().hidden()];
    for &v in &window.history {
        let x = (v - model.seq_stats().mean[0]) / model.seq_stats().std[0];
        h = gru_cell_step(model, &[x], &h)?;
    }
    println!("final hidden state {:?}", h.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    let via_windows = gru_predict(model, &[window])?[0];
    let via_samples = model.predict(std::slice::from_ref(sample))?[0];
    println!("bs delta {:.4}, model {via_windows:.4} (sample path {via_samples:.4})", sample.bs_delta);
    Ok(())
}
