//! Five-fold cross-validation on a small synthetic dataset.
//!
//! cargo run --release --example cross_validate

use mclnn::data::{synth_generate, SynthConfig};
use mclnn::inference::cross_validate;
use mclnn::network::{ConditionalSpec, MaskConfig};
use mclnn::optim::TrainConfig;
use mclnn::ModelConfig;

fn main() -> mclnn::Result<()> {
    let data = synth_generate(&SynthConfig {
        classes: 3,
        files_per_class: 40,
        features: 8,
        noise: 0.5,
        seed: 3,
        ..SynthConfig::default()
    })?;
    let model = ModelConfig {
        input_features: 16,
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
        dense_widths: vec![16],
        classes: 3,
        ..ModelConfig::table_one(3)
    };
    let train = TrainConfig {
        batch_size: 32,
        max_epochs: 30,
        patience: 10,
        train_hop: Some(2),
        ..TrainConfig::default()
    };
    let report = cross_validate(&model, &data, &train)?;
    for f in &report.folds {
        println!(
            "test fold {} (validation {}): accuracy {:.3} after {} epochs",
            f.test_fold,
            f.validation_fold,
            f.accuracy,
            f.history.records.len()
        );
    }
    println!("mean {:.3} +- {:.3}", report.mean, report.std);
    Ok(())
}
