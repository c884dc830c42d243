use mvhedge::data::{calendar_cut, prepare_samples, read_quotes, split_dataset, write_quotes, HedgeSample};
use mvhedge::eval::evaluate;
use mvhedge::market_math::OptionKind;
use mvhedge::models::{
    fit_hw, read_checkpoint, write_checkpoint, BsBaseline, FnnConfig, HedgeModel, HedgeRatioModel, ModelVariant,
};
use mvhedge::synth::{generate_quote_panel, GeneratorConfig};
use mvhedge::train::{fit_variant, ModelSpec, TrainConfig};

fn small_panel(n_days: usize) -> GeneratorConfig {
    GeneratorConfig {
        n_days,
        strike_grid: vec![0.9, 0.95, 1.0, 1.05, 1.1],
        maturity_grid: vec![30, 91],
        ..GeneratorConfig::default()
    }
}

fn same_samples(a: &[HedgeSample], b: &[HedgeSample]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.quote_date, y.quote_date);
        assert_eq!(x.strike, y.strike);
        assert_eq!(x.bucket, y.bucket);
        assert!((x.delta_v - y.delta_v).abs() < 1e-9);
        assert!((x.bs_delta - y.bs_delta).abs() < 1e-12);
        for (f, g) in x.features.iter().zip(&y.features) {
            assert!((f - g).abs() < 1e-12);
        }
    }
}

#[test]
fn csv_roundtrip_preserves_samples() {
    let quotes = generate_quote_panel(&small_panel(90)).unwrap();
    let mut buf = Vec::new();
    write_quotes(&mut buf, &quotes).unwrap();
    let back = read_quotes(buf.as_slice()).unwrap();
    assert_eq!(back.len(), quotes.len());
    for variant in [ModelVariant::Dnn3Star, ModelVariant::DnnGru] {
        for kind in [OptionKind::Call, OptionKind::Put] {
            same_samples(&prepare_samples(&quotes, variant, kind), &prepare_samples(&back, variant, kind));
        }
    }
}

#[test]
fn hull_white_beats_bs_under_stochastic_vol() {
    let quotes = generate_quote_panel(&small_panel(504)).unwrap();
    let samples = prepare_samples(&quotes, ModelVariant::Hw, OptionKind::Put);
    let split = split_dataset(samples, calendar_cut(&quotes, 0.8).unwrap(), 0.2, 0).unwrap();
    let hw = fit_hw(OptionKind::Put, &split.train).unwrap();
    let report = evaluate(&hw, &split.test).unwrap();
    assert!(report.overall.gain.unwrap() > 0.05, "{:?}", report.overall);
    let bs = evaluate(&BsBaseline { kind: OptionKind::Put }, &split.test).unwrap();
    assert_eq!(bs.overall.gain, Some(0.0));
}

#[test]
fn trained_model_survives_checkpoint() {
    let quotes = generate_quote_panel(&small_panel(120)).unwrap();
    let samples = prepare_samples(&quotes, ModelVariant::Dnn2Plus, OptionKind::Call);
    let split = split_dataset(samples, calendar_cut(&quotes, 0.8).unwrap(), 0.2, 3).unwrap();
    let spec = ModelSpec {
        fnn: FnnConfig {
            hidden_width: 16,
            ..FnnConfig::default()
        },
        ..ModelSpec::default()
    };
    let cfg = TrainConfig {
        max_epochs: 4,
        batch_size: 128,
        ..TrainConfig::default()
    };
    let (model, log) = fit_variant(ModelVariant::Dnn2Plus, OptionKind::Call, &split, &spec, &cfg).unwrap();
    assert!(!log.is_empty());
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &model).unwrap();
    let back = read_checkpoint(&bytes).unwrap();
    assert!(matches!(back, HedgeModel::Fnn(_)));
    let a = model.predict(&split.test).unwrap();
    let b = back.predict(&split.test).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn seeds_control_training() {
    let quotes = generate_quote_panel(&small_panel(100)).unwrap();
    let samples = prepare_samples(&quotes, ModelVariant::Dnn2, OptionKind::Put);
    let spec = ModelSpec {
        fnn: FnnConfig {
            hidden_width: 8,
            ..FnnConfig::default()
        },
        ..ModelSpec::default()
    };
    let run = |seed: u64| {
        let split = split_dataset(samples.clone(), calendar_cut(&quotes, 0.8).unwrap(), 0.2, seed).unwrap();
        let cfg = TrainConfig {
            max_epochs: 2,
            batch_size: 64,
            seed,
            ..TrainConfig::default()
        };
        let (model, _) = fit_variant(ModelVariant::Dnn2, OptionKind::Put, &split, &spec, &cfg).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &model).unwrap();
        bytes
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}
