//! File-level classification by voting over segment predictions, with
//! accuracy/confusion reporting and fold-wise cross-validation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{extract_segments, Dataset, LabeledFile};
use crate::error::{Error, Result};
use crate::network::{Model, ModelConfig};
use crate::numkernel::{Matrix, Rng};
use crate::optim::{train, History, TrainConfig};

/// Anything that maps a fixed-width segment to class probabilities.
pub trait SegmentClassifier: Sync {
    fn classes(&self) -> usize;

    fn segment_width(&self) -> usize;

    /// Raw frames × features matrix to a features × frames block.
    fn prepare(&self, raw: &Matrix) -> Result<Matrix> {
        Ok(raw.transpose())
    }

    fn predict_segment(&self, segment: &Matrix) -> Result<Vec<f64>>;
}

impl SegmentClassifier for Model {
    fn classes(&self) -> usize {
        Model::classes(self)
    }

    fn segment_width(&self) -> usize {
        Model::segment_width(self)
    }

    fn prepare(&self, raw: &Matrix) -> Result<Matrix> {
        Model::prepare(self, raw)
    }

    fn predict_segment(&self, segment: &Matrix) -> Result<Vec<f64>> {
        self.predict(segment)
    }
}

/// How segment outputs combine into a file decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VotingRule {
    /// Mean of the segment probability vectors.
    #[default]
    Probability,
    /// Share of segments whose argmax is each class.
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilePrediction {
    pub file_id: String,
    pub segment_probs: Vec<Vec<f64>>,
    pub voted: Vec<f64>,
    pub predicted: usize,
}

/// Values this close to the maximum count as tied with it. Averaging the
/// same probabilities in a different order can move a sum by a few ulps;
/// without the tolerance that would decide ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// First index of the maximum; ties (within [`TIE_TOLERANCE`]) go to the
/// lowest class index.
pub fn argmax(v: &[f64]) -> usize {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().position(|&x| x >= max - TIE_TOLERANCE).unwrap_or(0)
}

/// Probability voting: mean of the segment vectors, then argmax.
pub fn vote(segment_probs: &[Vec<f64>]) -> Result<FilePrediction> {
    vote_with(segment_probs, VotingRule::Probability)
}

pub fn vote_with(segment_probs: &[Vec<f64>], rule: VotingRule) -> Result<FilePrediction> {
    let first = segment_probs
        .first()
        .ok_or_else(|| Error::NoSegments("file produced no segments".into()))?;
    let c = first.len();
    if c == 0 || segment_probs.iter().any(|p| p.len() != c) {
        return Err(Error::shape("segment probability vectors differ in length"));
    }
    let n = segment_probs.len() as f64;
    let mut voted = vec![0.0; c];
    match rule {
        VotingRule::Probability => {
            for p in segment_probs {
                for (v, x) in voted.iter_mut().zip(p) {
                    *v += x;
                }
            }
        }
        VotingRule::Majority => {
            for p in segment_probs {
                voted[argmax(p)] += 1.0;
            }
        }
    }
    voted.iter_mut().for_each(|v| *v /= n);
    Ok(FilePrediction {
        file_id: String::new(),
        segment_probs: segment_probs.to_vec(),
        predicted: argmax(&voted),
        voted,
    })
}

/// Segments a raw file, classifies every segment and votes.
pub fn predict_file<C: SegmentClassifier + ?Sized>(
    classifier: &C,
    file_id: &str,
    raw: &Matrix,
    hop: usize,
    rule: VotingRule,
) -> Result<FilePrediction> {
    let block = classifier.prepare(raw)?;
    let q = classifier.segment_width();
    let segments = extract_segments(&block, q, hop)?;
    if segments.is_empty() {
        return Err(Error::NoSegments(format!(
            "{file_id}: {} frames, segment width is {q}",
            block.cols()
        )));
    }
    let probs = segments
        .iter()
        .map(|s| classifier.predict_segment(&s.block))
        .collect::<Result<Vec<_>>>()?;
    let mut p = vote_with(&probs, rule)?;
    p.file_id = file_id.to_string();
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileResult {
    pub file_id: String,
    pub label: usize,
    pub predicted: usize,
    pub voted: Vec<f64>,
}

/// File-level evaluation summary. Confusion rows are true classes,
/// columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: usize,
    pub files: usize,
    pub skipped: usize,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<FileResult>,
}

impl EvalReport {
    pub fn from_results(classes: usize, predictions: Vec<FileResult>, skipped: usize) -> Self {
        let mut confusion = vec![vec![0usize; classes]; classes];
        for p in &predictions {
            confusion[p.label][p.predicted] += 1;
        }
        let total = predictions.len();
        let trace: usize = (0..classes).map(|c| confusion[c][c]).sum();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let recall = (0..classes)
            .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
            .collect();
        let precision = (0..classes)
            .map(|c| ratio(confusion[c][c], confusion.iter().map(|row| row[c]).sum()))
            .collect();
        Self {
            classes,
            files: total,
            skipped,
            accuracy: ratio(trace, total),
            precision,
            recall,
            confusion,
            predictions,
        }
    }

    /// Aligned confusion table with optional class names.
    pub fn confusion_table(&self, names: Option<&[String]>) -> String {
        let labels: Vec<String> = (0..self.classes)
            .map(|c| names.and_then(|n| n.get(c).cloned()).unwrap_or_else(|| c.to_string()))
            .collect();
        let w = labels
            .iter()
            .map(String::len)
            .chain(self.confusion.iter().flatten().map(|v| v.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(4);
        let mut out = String::new();
        let _ = write!(out, "{:>w$}", "true\\pred");
        for l in &labels {
            let _ = write!(out, " {l:>w$}");
        }
        out.push('\n');
        for (row, l) in self.confusion.iter().zip(&labels) {
            let _ = write!(out, "{:>w$}", l, w = w.max(9));
            for v in row {
                let _ = write!(out, " {v:>w$}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "accuracy {:.4} over {} files ({} skipped)",
            self.accuracy, self.files, self.skipped
        );
        out
    }

    /// `file,label,predicted,p0,p1,…`
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("file,label,predicted");
        for c in 0..self.classes {
            let _ = write!(out, ",p{c}");
        }
        out.push('\n');
        for p in &self.predictions {
            let _ = write!(out, "{},{},{}", p.file_id, p.label, p.predicted);
            for v in &p.voted {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Classifies every file by voting and reports file-level metrics. Files
/// too short for one segment are skipped and counted.
pub fn evaluate<C: SegmentClassifier + ?Sized>(
    classifier: &C,
    files: &[LabeledFile],
    hop: usize,
    rule: VotingRule,
) -> Result<EvalReport> {
    if files.is_empty() {
        return Err(Error::invalid("no files to evaluate"));
    }
    let classes = classifier.classes();
    let outcomes: Vec<Result<Option<FileResult>>> = files
        .par_iter()
        .map(|f| {
            if f.label >= classes {
                return Err(Error::invalid(format!("{}: label {} out of range", f.id, f.label)));
            }
            match predict_file(classifier, &f.id, &f.frames, hop, rule) {
                Ok(p) => Ok(Some(FileResult {
                    file_id: p.file_id,
                    label: f.label,
                    predicted: p.predicted,
                    voted: p.voted,
                })),
                Err(Error::NoSegments(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut results = Vec::with_capacity(files.len());
    let mut skipped = 0;
    for o in outcomes {
        match o? {
            Some(r) => results.push(r),
            None => skipped += 1,
        }
    }
    if results.is_empty() {
        return Err(Error::NoSegments(format!(
            "all {} files are shorter than one segment ({} frames)",
            files.len(),
            classifier.segment_width()
        )));
    }
    Ok(EvalReport::from_results(classes, results, skipped))
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub test_fold: usize,
    pub validation_fold: usize,
    pub model_seed: u64,
    pub train_seed: u64,
    pub accuracy: f64,
    pub report: EvalReport,
    pub history: History,
}

#[derive(Debug, Clone)]
pub struct CrossValReport {
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    /// Population standard deviation of the per-fold accuracies.
    pub std: f64,
}

/// The fold held out for validation when `test_fold` is tested: the next
/// fold, wrapping around.
pub fn validation_fold_for(test_fold: usize, folds: usize) -> usize {
    test_fold % folds + 1
}

/// Trains a fresh model per test fold and evaluates it on that fold.
///
/// Fold `f` uses seeds derived from the base seeds and `f`, so every fold
/// differs but the whole run is reproducible.
pub fn cross_validate(
    model_config: &ModelConfig,
    data: &Dataset,
    train_config: &TrainConfig,
) -> Result<CrossValReport> {
    let folds = data.manifest.folds;
    if folds < 3 {
        return Err(Error::invalid(format!(
            "cross-validation needs >= 3 folds (train/validation/test), got {folds}"
        )));
    }
    let mut results = Vec::with_capacity(folds);
    for test_fold in 1..=folds {
        let validation_fold = validation_fold_for(test_fold, folds);
        let train_folds: Vec<usize> = (1..=folds)
            .filter(|&f| f != test_fold && f != validation_fold)
            .collect();
        let model_seed = Rng::derive(model_config.seed, test_fold as u64).next_u64();
        let train_seed = Rng::derive(train_config.seed, test_fold as u64).next_u64();
        let cfg = ModelConfig {
            seed: model_seed,
            ..model_config.clone()
        };
        let tcfg = TrainConfig {
            seed: train_seed,
            checkpoint: None,
            ..train_config.clone()
        };
        let outcome = train(
            Model::new(cfg)?,
            &data.files_in_folds(&train_folds),
            &data.files_in_folds(&[validation_fold]),
            &tcfg,
        )?;
        let q = outcome.model.segment_width();
        let report = evaluate(
            &outcome.model,
            &data.files_in_folds(&[test_fold]),
            tcfg.eval_hop_for(q),
            tcfg.voting,
        )?;
        results.push(FoldResult {
            test_fold,
            validation_fold,
            model_seed,
            train_seed,
            accuracy: report.accuracy,
            report,
            history: outcome.history,
        });
    }
    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.accuracy).sum::<f64>() / n;
    let std = (results.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(CrossValReport {
        folds: results,
        mean,
        std,
    })
}
