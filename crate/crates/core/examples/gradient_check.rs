//! Verifies backpropagation of a DNN3 model and the GRU model against
//! central finite differences on random batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvhedge::data::{prepare_samples, HedgeSample};
use mvhedge::market_math::OptionKind;
use mvhedge::models::{FnnConfig, FnnHedgeModel, GruConfig, GruHedgeModel, ModelVariant, Trainable};
use mvhedge::nn::{check_gradients, GradCheck};
use mvhedge::synth::{generate_quote_panel, GeneratorConfig};

fn report<M: Trainable>(name: &str, mut model: M, samples: &[HedgeSample], rng: &mut ChaCha8Rng) -> mvhedge::Result<()> {
    let start = rng.random_range(0..samples.len() - 32);
    let batch: Vec<&HedgeSample> = samples[start..start + 32].iter().collect();
    let (loss, grads) = model.loss_and_gradients(&batch)?;
    let picks = GradCheck::sample_indices(&grads, 8, rng);
    let r = check_gradients(&mut model, &grads, &picks, 1e-5, |m| m.batch_loss(&batch).expect("valid batch"));
    println!("{name}: loss {loss:.5}, {} entries, max relative error {:.2e}", r.checked, r.max_rel_error);
    Ok(())
}

fn main() -> mvhedge::Result<()> {
    let cfg = GeneratorConfig {
        n_days: 80,
        ..GeneratorConfig::default()
    };
    let quotes = generate_quote_panel(&cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let dnn = prepare_samples(&quotes, ModelVariant::Dnn3, OptionKind::Call);
    let fnn_cfg = FnnConfig {
        hidden_width: 32,
        ..FnnConfig::default()
    };
    let model = FnnHedgeModel::fit_new(OptionKind::Call, ModelVariant::Dnn3, &fnn_cfg, &dnn)?;
    report("DNN3 call", model, &dnn, &mut rng)?;

    let seq = prepare_samples(&quotes, ModelVariant::DnnGru, OptionKind::Put);
    let model = GruHedgeModel::fit_new(OptionKind::Put, &GruConfig::default(), &seq)?;
    report("DNN-GRU put", model, &seq, &mut rng)?;
    Ok(())
}
