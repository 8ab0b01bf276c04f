//! Trains an MCLNN on the synthetic temporal-order task and on a copy with
//! the frames of every file shuffled. Only the ordered copy is learnable.
//!
//! cargo run --release --example train_synthetic

use std::time::Instant;

use mclnn::data::{synth_generate, Dataset, SynthConfig};
use mclnn::inference::{evaluate, VotingRule};
use mclnn::layers::PoolMode;
use mclnn::network::{ConditionalSpec, MaskConfig};
use mclnn::optim::{train, TrainConfig};
use mclnn::{Model, ModelConfig};

fn run(name: &str, data: &Dataset) -> mclnn::Result<()> {
    let config = ModelConfig {
        input_features: 40,
        delta: true,
        conditional_layers: vec![ConditionalSpec {
            width: 32,
            order: 2,
            mask: Some(MaskConfig {
                bandwidth: 20,
                overlap: 10,
            }),
            dropout: 0.0,
        }],
        extra_frames: 8,
        pool: PoolMode::Mean,
        dense_widths: vec![32],
        dense_dropout: None,
        classes: 4,
        transfer: Default::default(),
        seed: 1,
    };
    let train_config = TrainConfig {
        batch_size: 32,
        max_epochs: 100,
        patience: 10,
        train_hop: Some(4),
        seed: 1,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train(
        Model::new(config)?,
        &data.files_in_folds(&[1, 2, 3]),
        &data.files_in_folds(&[4]),
        &train_config,
    )?;
    let q = outcome.model.segment_width();
    let report = evaluate(&outcome.model, &data.files_in_folds(&[5]), q, VotingRule::Probability)?;
    println!(
        "{name}: {} epochs in {:.1}s, best validation {:.3}, test accuracy {:.3}",
        outcome.history.records.len(),
        start.elapsed().as_secs_f64(),
        outcome.best_val_accuracy,
        report.accuracy
    );
    print!("{}", report.confusion_table(Some(&data.manifest.classes)));
    Ok(())
}

fn main() -> mclnn::Result<()> {
    let data = synth_generate(&SynthConfig {
        seed: 7,
        ..SynthConfig::default()
    })?;
    run("ordered frames", &data)?;
    run("shuffled frames", &data.shuffled(99))?;
    Ok(())
}
