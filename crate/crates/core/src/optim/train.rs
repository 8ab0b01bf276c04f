use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{concat_delta, default_train_hop, extract_segments, LabeledFile};
use crate::error::{Error, Result};
use crate::inference::{evaluate, VotingRule};
use crate::network::{save_model, Model, ModelGrads};
use crate::numkernel::{Matrix, Rng};
use crate::optim::{cross_entropy, AdamConfig, AdamState, Standardizer};

/// Gradient partial sums per batch. Fixed so the reduction order, and with
/// it every floating-point result, does not depend on the thread count.
const BATCH_SHARDS: usize = 8;

fn default_batch() -> usize {
    64
}
fn default_epochs() -> usize {
    200
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_patience() -> usize {
    20
}

/// Optimiser and loop settings. Field names double as JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    /// Seed for shuffling and dropout.
    #[serde(default)]
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Where to write the best model whenever validation improves.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Hop between training segments; half a segment when unset.
    #[serde(default)]
    pub train_hop: Option<usize>,
    /// Hop between evaluation segments; a full segment when unset.
    #[serde(default)]
    pub eval_hop: Option<usize>,
    #[serde(default)]
    pub voting: VotingRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: default_batch(),
            max_epochs: default_epochs(),
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
            seed: 0,
            patience: default_patience(),
            checkpoint: None,
            train_hop: None,
            eval_hop: None,
            voting: VotingRule::Probability,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::invalid("learning_rate must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("beta1 and beta2 must lie in [0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("epsilon must be > 0"));
        }
        if self.train_hop == Some(0) || self.eval_hop == Some(0) {
            return Err(Error::invalid("segment hops must be >= 1"));
        }
        Ok(())
    }

    pub fn eval_hop_for(&self, q: usize) -> usize {
        self.eval_hop.unwrap_or(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    /// Mean cross-entropy of the voted validation probabilities.
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    /// `epoch,train_loss,val_accuracy` with round-trip exact floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_accuracy\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:?},{:?}", r.epoch, r.train_loss, r.val_accuracy);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub model: Model,
    pub history: History,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Training files shorter than one segment.
    pub skipped_train_files: usize,
}

/// Mini-batch ADAM on shuffled training segments with file-level
/// validation after every epoch.
///
/// The standardizer is fitted on the training files (after delta features)
/// and stored in the returned model. The parameters with the best
/// validation accuracy are kept, ties going to the lower validation loss;
/// training stops after `max_epochs` or `patience` epochs without an
/// improvement in that order.
pub fn train(
    mut model: Model,
    train_files: &[LabeledFile],
    val_files: &[LabeledFile],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_files.is_empty() {
        return Err(Error::invalid("empty training split"));
    }
    if val_files.is_empty() {
        return Err(Error::invalid("empty validation split"));
    }
    let classes = model.classes();
    if let Some(f) = train_files.iter().chain(val_files).find(|f| f.label >= classes) {
        return Err(Error::invalid(format!(
            "{}: label {} out of range for {classes} classes",
            f.id, f.label
        )));
    }
    let raw = model.config().raw_features();
    if let Some(f) = train_files.iter().chain(val_files).find(|f| f.frames.cols() != raw) {
        return Err(Error::shape(format!(
            "{}: {} features per frame, model expects {raw}",
            f.id,
            f.frames.cols()
        )));
    }

    let expanded: Vec<Matrix> = train_files
        .iter()
        .map(|f| {
            if model.config().delta {
                concat_delta(&f.frames)
            } else {
                f.frames.clone()
            }
        })
        .collect();
    model.set_standardizer(None)?;
    model.set_standardizer(Some(Standardizer::fit(expanded.iter())?))?;

    let q = model.segment_width();
    let hop = config.train_hop.unwrap_or_else(|| default_train_hop(q));
    let mut segments: Vec<(Matrix, usize)> = Vec::new();
    let mut skipped = 0;
    for f in train_files {
        let block = model.prepare(&f.frames)?;
        let segs = extract_segments(&block, q, hop)?;
        if segs.is_empty() {
            skipped += 1;
        }
        segments.extend(segs.into_iter().map(|s| (s.block, f.label)));
    }
    if segments.is_empty() {
        return Err(Error::NoSegments(format!(
            "all {} training files are shorter than q = {q} frames",
            train_files.len()
        )));
    }

    let eval_hop = config.eval_hop_for(q);
    let mut adam = AdamState::new(config.adam(), model.params().iter().map(|p| p.len()));
    let mut rng = Rng::new(config.seed);
    let mut history = History::default();
    let mut best: Option<(usize, f64, f64, Model)> = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..segments.len()).collect();

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let seeded: Vec<(usize, u64)> = batch.iter().map(|&i| (i, rng.next_u64())).collect();
            let shard = seeded.len().div_ceil(BATCH_SHARDS);
            let partials: Vec<Result<(f64, ModelGrads)>> = seeded
                .par_chunks(shard)
                .map(|chunk| {
                    let mut acc = ModelGrads::zeros_like(&model);
                    let mut loss = 0.0;
                    for &(i, seed) in chunk {
                        let (block, label) = &segments[i];
                        let (l, g) = model.loss_and_grads(block, *label, true, &mut Rng::new(seed))?;
                        loss += l;
                        acc.add_assign(&g);
                    }
                    Ok((loss, acc))
                })
                .collect();
            let mut grads = ModelGrads::zeros_like(&model);
            for p in partials {
                let (l, g) = p?;
                loss_sum += l;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.params_mut(), &grads)?;
        }

        let report = evaluate(&model, val_files, eval_hop, config.voting)?;
        let mut val_loss = 0.0;
        for p in &report.predictions {
            val_loss += cross_entropy(&p.voted, p.label)?;
        }
        val_loss /= report.predictions.len() as f64;
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / segments.len() as f64,
            val_accuracy: report.accuracy,
            val_loss,
        });
        // accuracy decides; once it saturates, a lower loss on the voted
        // probabilities still counts as progress
        let improved = best
            .as_ref()
            .is_none_or(|(_, acc, loss, _)| report.accuracy > *acc || (report.accuracy == *acc && val_loss < *loss));
        if improved {
            if let Some(path) = &config.checkpoint {
                save_model(&model, path)?;
            }
            best = Some((epoch, report.accuracy, val_loss, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let (best_epoch, best_val_accuracy, _, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_accuracy,
        skipped_train_files: skipped,
    })
}
