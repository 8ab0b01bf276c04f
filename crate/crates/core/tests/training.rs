use mclnn::data::{concat_delta, synth_generate, Dataset, SynthConfig};
use mclnn::inference::cross_validate;
use mclnn::layers::{PoolMode, TransferKind};
use mclnn::network::{load_model, write_model, ConditionalSpec, MaskConfig, Model, ModelConfig};
use mclnn::optim::{train, Standardizer, TrainConfig};

fn dataset(files_per_class: usize, seed: u64) -> Dataset {
    synth_generate(&SynthConfig {
        classes: 3,
        files_per_class,
        features: 8,
        frames: 40,
        noise: 0.5,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn model_config(seed: u64) -> ModelConfig {
    ModelConfig {
        input_features: 16,
        delta: true,
        conditional_layers: vec![ConditionalSpec {
            width: 24,
            order: 2,
            mask: Some(MaskConfig {
                bandwidth: 8,
                overlap: 4,
            }),
            dropout: 0.0,
        }],
        extra_frames: 8,
        pool: PoolMode::Mean,
        dense_widths: vec![16],
        dense_dropout: Some(vec![0.1]),
        classes: 3,
        transfer: TransferKind::Prelu,
        seed,
    }
}

fn train_config(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        max_epochs,
        patience: 10,
        train_hop: Some(2),
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let data = dataset(10, 1);
    let model = Model::new(model_config(3)).unwrap();
    let before: Vec<Vec<f64>> = model.params().iter().map(|p| p.to_vec()).collect();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        patience: 100,
        ..train_config(5)
    };
    let out = train(
        model,
        &data.files_in_folds(&[1, 2, 3]),
        &data.files_in_folds(&[4]),
        &cfg,
    )
    .unwrap();
    assert_eq!(out.history.records.len(), 5);
    let after: Vec<Vec<f64>> = out.model.params().iter().map(|p| p.to_vec()).collect();
    assert_eq!(before, after);
}

#[test]
fn stalled_training_stops_after_patience() {
    let data = dataset(10, 1);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        patience: 3,
        ..train_config(50)
    };
    let out = train(
        Model::new(model_config(3)).unwrap(),
        &data.files_in_folds(&[1, 2, 3]),
        &data.files_in_folds(&[4]),
        &cfg,
    )
    .unwrap();
    assert_eq!(out.history.records.len(), 4);
    assert_eq!(out.best_epoch, 1);
}

#[test]
fn standardizer_comes_from_training_files_only() {
    let data = dataset(10, 2);
    let train_files = data.files_in_folds(&[1, 2, 3]);
    let out = train(
        Model::new(model_config(3)).unwrap(),
        &train_files,
        &data.files_in_folds(&[4]),
        &train_config(1),
    )
    .unwrap();
    let expanded: Vec<_> = train_files.iter().map(|f| concat_delta(&f.frames)).collect();
    let expected = Standardizer::fit(expanded.iter()).unwrap();
    assert_eq!(out.model.standardizer(), Some(&expected));
    let all: Vec<_> = data.files.iter().map(|f| concat_delta(&f.frames)).collect();
    assert_ne!(Standardizer::fit(all.iter()).unwrap().mean(), expected.mean());
}

#[test]
fn loss_falls_over_first_five_epochs() {
    let data = dataset(20, 3);
    let cfg = TrainConfig {
        patience: 100,
        ..train_config(5)
    };
    let out = train(
        Model::new(model_config(1)).unwrap(),
        &data.files_in_folds(&[1, 2, 3]),
        &data.files_in_folds(&[4]),
        &cfg,
    )
    .unwrap();
    let losses: Vec<f64> = out.history.records.iter().map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 5);
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
}

#[test]
fn reaches_high_validation_accuracy_and_is_reproducible() {
    let data = dataset(30, 4);
    let dir = tempfile::tempdir().unwrap();
    let checkpoint = dir.path().join("best.bin");
    let cfg = TrainConfig {
        checkpoint: Some(checkpoint.clone()),
        ..train_config(100)
    };
    let run = || {
        train(
            Model::new(model_config(6)).unwrap(),
            &data.files_in_folds(&[1, 2, 3]),
            &data.files_in_folds(&[4]),
            &cfg,
        )
        .unwrap()
    };
    let a = run();
    assert!(a.best_val_accuracy >= 0.95, "{}", a.history.to_csv());
    assert_eq!(
        write_model(&load_model(&checkpoint).unwrap()).unwrap(),
        write_model(&a.model).unwrap()
    );
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(a.history.to_csv(), b.history.to_csv());
    assert_eq!(write_model(&a.model).unwrap(), write_model(&b.model).unwrap());
}

#[test]
fn empty_splits_are_errors() {
    let data = dataset(5, 1);
    let model = Model::new(model_config(1)).unwrap();
    let files = data.files_in_folds(&[1]);
    assert!(train(model.clone(), &[], &files, &train_config(1)).is_err());
    assert!(train(model, &files, &[], &train_config(1)).is_err());
}

#[test]
fn five_fold_cross_validation() {
    let data = dataset(25, 8);
    let cfg = TrainConfig {
        max_epochs: 30,
        ..train_config(30)
    };
    let report = cross_validate(&model_config(2), &data, &cfg).unwrap();
    assert_eq!(report.folds.len(), 5);
    let accs: Vec<f64> = report.folds.iter().map(|f| f.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / 5.0;
    assert!((report.mean - mean).abs() < 1e-15);
    assert!(report.mean >= 0.95, "{accs:?}");
    for (i, f) in report.folds.iter().enumerate() {
        assert_eq!(f.test_fold, i + 1);
        assert_eq!(f.validation_fold, (i + 1) % 5 + 1);
        assert_eq!(f.report.files, 15);
    }
    let seeds: std::collections::BTreeSet<u64> = report.folds.iter().map(|f| f.model_seed).collect();
    assert_eq!(seeds.len(), 5);
    // seeds depend only on the base seeds
    let again = cross_validate(&model_config(2), &data, &TrainConfig { max_epochs: 1, ..cfg }).unwrap();
    let s1: Vec<(u64, u64)> = report.folds.iter().map(|f| (f.model_seed, f.train_seed)).collect();
    let s2: Vec<(u64, u64)> = again.folds.iter().map(|f| (f.model_seed, f.train_seed)).collect();
    assert_eq!(s1, s2);
}

#[test]
fn cross_validation_needs_three_folds() {
    let data = synth_generate(&SynthConfig {
        classes: 2,
        files_per_class: 4,
        folds: 2,
        features: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    assert!(cross_validate(&model_config(1), &data, &train_config(1)).is_err());
}
