//! Saves every model family to the binary checkpoint format, reloads it and
//! checks predictions are bit-identical; then shows a corrupted file being
//! rejected.

use mvhedge::data::prepare_samples;
use mvhedge::market_math::{HwCoefficients, OptionKind};
use mvhedge::models::{
    load_checkpoint, load_checkpoint_for, save_checkpoint, BsBaseline, FnnConfig, FnnHedgeModel, GruConfig,
    GruHedgeModel, HedgeModel, HedgeRatioModel, HwModel, ModelVariant,
};
use mvhedge::synth::{generate_quote_panel, GeneratorConfig};

fn main() -> mvhedge::Result<()> {
    let dir = std::env::temp_dir().join("mvhedge_checkpoint_example");
    std::fs::create_dir_all(&dir).map_err(|e| mvhedge::Error::io(&dir, e))?;
    let quotes = generate_quote_panel(&GeneratorConfig {
        n_days: 60,
        ..GeneratorConfig::default()
    })?;
    let dnn = prepare_samples(&quotes, ModelVariant::Dnn2Plus, OptionKind::Call);
    let gru = prepare_samples(&quotes, ModelVariant::DnnGru, OptionKind::Call);

    let models = [
        (
            HedgeModel::Fnn(Box::new(FnnHedgeModel::fit_new(
                OptionKind::Call,
                ModelVariant::Dnn2Plus,
                &FnnConfig::default(),
                &dnn,
            )?)),
            &dnn,
        ),
        (
            HedgeModel::Gru(Box::new(GruHedgeModel::fit_new(OptionKind::Call, &GruConfig::default(), &gru)?)),
            &gru,
        ),
        (HedgeModel::Hw(HwModel::new(OptionKind::Call, HwCoefficients::new(0.01, -0.02, 0.03)?)), &dnn),
        (HedgeModel::Bs(BsBaseline { kind: OptionKind::Call }), &dnn),
    ];
    for (model, samples) in &models {
        let path = dir.join(format!("{}.ckpt", model.variant()));
        save_checkpoint(model, &path)?;
        let back = load_checkpoint(&path)?;
        let same = model
            .predict(samples)?
            .iter()
            .zip(back.predict(samples)?)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        println!("{}: {size} bytes, identical predictions: {same}", model.variant());
    }

    let path = dir.join(format!("{}.ckpt", ModelVariant::Hw));
    if let Err(e) = load_checkpoint_for(&path, OptionKind::Put) {
        println!("loading a call checkpoint as a put model: {e}");
    }
    let mut bytes = std::fs::read(&path).map_err(|e| mvhedge::Error::io(&path, e))?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&path, &bytes).map_err(|e| mvhedge::Error::io(&path, e))?;
    match load_checkpoint(&path) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted file rejected: {e}"),
    }
    Ok(())
}
