use fairlog::bias::{BiasKind, BiasModel, BiasSpec, FlipParams, InputLayout};
use fairlog::data::{generate, GenConfig, Role, Scenario};
use fairlog::loss::LossSpec;
use fairlog::net::{train, LabelledRows, TrainConfig};
use proptest::prelude::*;

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 16],
        epochs,
        seed: 21,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_bias_label_program_trains_like_plain_bce() {
    let ds = generate(&GenConfig { n_rows: 1500, seed: 5, ..GenConfig::standard(3) }.with_label_bias(0.3)).unwrap();
    let rows: Vec<usize> = (0..ds.len()).collect();
    let view = ds.view(Scenario::Label, Role::TrainBiased, &rows).unwrap();
    let cfg = small_config(8);

    let spec = BiasSpec::label(vec![("a".into(), FlipParams::default())]);
    let model = BiasModel::from_spec(&spec, InputLayout::single(4, false)).unwrap();
    let sup = model.supervision(&view.inputs(), &view.labels).unwrap();
    let mut through_program = cfg.init_network(4);
    let a = train(&mut through_program, &sup, &cfg).unwrap();

    let plain_data = LabelledRows::new(view.matrix(false), view.labels.clone());
    let mut plain = cfg.init_network(4);
    let b = train(&mut plain, &plain_data, &cfg).unwrap();

    for (e, ((ta, tb), (va, vb))) in a
        .history
        .train_loss
        .iter()
        .zip(&b.history.train_loss)
        .zip(a.history.val_loss.iter().zip(&b.history.val_loss))
        .enumerate()
    {
        assert!((ta - tb).abs() <= 1e-6, "epoch {e} train {ta} vs {tb}");
        assert!((va - vb).abs() <= 1e-6, "epoch {e} val {va} vs {vb}");
    }
}

#[test]
fn zero_bias_measurement_program_trains_like_plain_bce() {
    let ds = generate(&GenConfig { n_rows: 800, seed: 6, ..GenConfig::standard(3) }).unwrap();
    let rows: Vec<usize> = (0..ds.len()).collect();
    let view = ds.view(Scenario::Measurement, Role::TrainBiased, &rows).unwrap();
    let cfg = small_config(4);
    let spec = BiasSpec::features(BiasKind::Measurement, vec![FlipParams::default(); 4]);
    let model = BiasModel::from_spec(&spec, InputLayout::single(4, false)).unwrap();
    let sup = model.supervision(&view.inputs(), &view.labels).unwrap();
    let mut m1 = cfg.init_network(4);
    let a = train(&mut m1, &sup, &cfg).unwrap();
    let mut m2 = cfg.init_network(4);
    let b = train(&mut m2, &LabelledRows::new(view.matrix(false), view.labels.clone()), &cfg).unwrap();
    for (x, y) in a.history.train_loss.iter().zip(&b.history.train_loss) {
        assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }
}

#[test]
fn focal_without_focusing_is_half_bce() {
    let focal = LossSpec::Focal { gamma: 0.0, alpha: 0.5 };
    for &p in &[1e-4, 0.1, 0.37, 0.5, 0.8, 0.999] {
        for y in [false, true] {
            assert!((focal.value(p, y) - 0.5 * LossSpec::Bce.value(p, y)).abs() < 1e-12);
            assert!((focal.derivative(p, y) - 0.5 * LossSpec::Bce.derivative(p, y)).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn focal_is_bounded_by_weighted_bce(p in 0.001..0.999f64, y in any::<bool>(), gamma in 0.0..5.0f64) {
        let f = LossSpec::Focal { gamma, alpha: 0.5 }.value(p, y);
        prop_assert!(f >= 0.0);
        prop_assert!(f <= 0.5 * LossSpec::Bce.value(p, y) + 1e-12);
    }
}
