//! The `mclnn` command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid input (bad flags, specs or
//! configs), 1 for runtime failures such as unreadable files or a failed
//! gradient check.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{
    build_splits, load_feature_csv, load_manifest, load_split_files, shuffle_frames, synth_generate, write_dataset,
    SynthConfig,
};
use crate::error::{Error, Result};
use crate::gradcheck::{run_all, LayerSizes, FD_TOLERANCE};
use crate::inference::{evaluate, predict_file, VotingRule};
use crate::layers::PoolMode;
use crate::masking::{generate_mask, mask_stats, MaskSpec};
use crate::network::{load_model, save_model, Model, ModelConfig};
use crate::numkernel::Rng;
use crate::optim::{train, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "mclnn", version, about = "Masked conditional neural networks")]
pub struct Cli {
    /// Worker threads for training and evaluation.
    #[arg(long, global = true, env = "MCLNN_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a band mask and write it as CSV or PGM.
    Mask(MaskArgs),
    /// Train a model on a fold split of a manifest.
    Train(TrainArgs),
    /// Evaluate a model on a test fold.
    Eval(EvalArgs),
    /// Classify a single feature file.
    Predict(PredictArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Write the synthetic temporal-order dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskFormat {
    Csv,
    Pgm,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub features: usize,
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub bandwidth: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub overlap: i64,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the extension of --out, then CSV.
    #[arg(long, value_enum)]
    pub format: Option<MaskFormat>,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub test_fold: usize,
    #[arg(long)]
    pub val_fold: usize,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Seeds both weight initialisation and training.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub train_hop: Option<usize>,
    #[arg(long)]
    pub eval_hop: Option<usize>,
    #[arg(long, value_parser = parse_serde::<VotingRule>)]
    pub voting: Option<VotingRule>,
    #[arg(long, value_parser = parse_serde::<PoolMode>)]
    pub pool: Option<PoolMode>,
    #[arg(long)]
    pub extra_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test_fold: usize,
    /// Segment hop; a full segment when unset.
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long, value_parser = parse_serde::<VotingRule>, default_value = "probability")]
    pub voting: VotingRule,
    /// Write the report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write per-file predictions as CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long, value_parser = parse_serde::<VotingRule>, default_value = "probability")]
    pub voting: VotingRule,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Conditional layer sizes as `l,e,n,w`.
    #[arg(long)]
    pub sizes: Option<LayerSizes>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub files_per_class: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub features: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Randomly permute the frames of every file, destroying temporal order.
    #[arg(long)]
    pub shuffle_frames: bool,
}

/// Parses a value through its serde name, so flags accept exactly the
/// spellings used in config files.
fn parse_serde<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(Error::Invalid(format!("--threads {n}: {e}"))),
        },
        None => execute(&cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Mask(a) => cmd_mask(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn cmd_mask(a: &MaskArgs) -> Result<i32> {
    let spec = MaskSpec::new(a.features, a.nodes, a.bandwidth, a.overlap)?;
    let mask = generate_mask(&spec)?;
    let format = a
        .format
        .unwrap_or_else(|| match a.out.extension().and_then(|e| e.to_str()) {
            Some("pgm") => MaskFormat::Pgm,
            _ => MaskFormat::Csv,
        });
    let text = match format {
        MaskFormat::Csv => mask.to_csv(),
        MaskFormat::Pgm => mask.to_pgm(),
    };
    write_text(&a.out, &text)?;
    let stats = mask_stats(&mask);
    let min = stats.ones_per_column.iter().min().copied().unwrap_or(0);
    let max = stats.ones_per_column.iter().max().copied().unwrap_or(0);
    println!(
        "mask {}x{} bandwidth {} overlap {} -> {}",
        a.features,
        a.nodes,
        a.bandwidth,
        a.overlap,
        a.out.display()
    );
    println!("ones {}  density {:.6}", stats.ones_total, stats.density);
    println!("ones per column: min {min} max {max}");
    Ok(0)
}

/// Reads a JSON file into `T`, rejecting unknown keys where `T` does.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

/// Config file values with command-line overrides applied.
pub fn resolve_run_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = read_json(&a.config)?;
    let t = &mut cfg.train;
    if let Some(s) = a.seed {
        t.seed = s;
        cfg.model.seed = s;
    }
    macro_rules! apply {
        ($($flag:ident),*) => { $( if let Some(v) = &a.$flag { t.$flag = v.clone(); } )* };
    }
    apply!(
        batch_size,
        max_epochs,
        learning_rate,
        beta1,
        beta2,
        epsilon,
        patience,
        voting
    );
    if a.checkpoint.is_some() {
        t.checkpoint = a.checkpoint.clone();
    }
    if a.train_hop.is_some() {
        t.train_hop = a.train_hop;
    }
    if a.eval_hop.is_some() {
        t.eval_hop = a.eval_hop;
    }
    if let Some(p) = a.pool {
        cfg.model.pool = p;
    }
    if let Some(k) = a.extra_frames {
        cfg.model.extra_frames = k;
    }
    cfg.model.validate()?;
    cfg.train.validate()?;
    Ok(cfg)
}

pub fn cmd_train(a: &TrainArgs) -> Result<i32> {
    let cfg = resolve_run_config(a)?;
    println!("seed {} (model init {})", cfg.train.seed, cfg.model.seed);
    let manifest = load_manifest(&a.manifest)?;
    if manifest.classes.len() != cfg.model.classes {
        return Err(Error::Invalid(format!(
            "manifest has {} classes, model config {}",
            manifest.classes.len(),
            cfg.model.classes
        )));
    }
    let splits = build_splits(&manifest, a.test_fold, a.val_fold)?;
    let train_files = load_split_files(&manifest, &splits.train)?;
    let val_files = load_split_files(&manifest, &splits.validation)?;
    let model = Model::new(cfg.model.clone())?;
    let q = model.segment_width();
    println!(
        "train {} files, validation {} files, segment width q = {q}",
        train_files.len(),
        val_files.len()
    );
    let outcome = train(model, &train_files, &val_files, &cfg.train)?;
    if outcome.skipped_train_files > 0 {
        println!(
            "skipped {} training files shorter than {q} frames",
            outcome.skipped_train_files
        );
    }
    save_model(&outcome.model, &a.out)?;
    let history_path = a.history.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".history.csv");
        PathBuf::from(p)
    });
    write_text(&history_path, &outcome.history.to_csv())?;
    println!(
        "epochs {}  best epoch {}  final validation accuracy {:.4}",
        outcome.history.records.len(),
        outcome.best_epoch,
        outcome.best_val_accuracy
    );
    println!("model -> {}  history -> {}", a.out.display(), history_path.display());
    Ok(0)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let model = load_model(&a.model)?;
    let manifest = load_manifest(&a.manifest)?;
    if manifest.classes.len() != model.classes() {
        return Err(Error::Invalid(format!(
            "manifest has {} classes, model {}",
            manifest.classes.len(),
            model.classes()
        )));
    }
    if a.test_fold < 1 || a.test_fold > manifest.folds {
        return Err(Error::Invalid(format!(
            "test fold {} outside 1..={}",
            a.test_fold, manifest.folds
        )));
    }
    let entries: Vec<_> = manifest
        .files
        .iter()
        .filter(|e| e.fold == a.test_fold)
        .cloned()
        .collect();
    let files = load_split_files(&manifest, &entries)?;
    let hop = a.hop.unwrap_or(model.segment_width());
    let report = evaluate(&model, &files, hop, a.voting)?;
    print!("{}", report.confusion_table(Some(&manifest.classes)));
    if let Some(p) = &a.report {
        write_text(p, &serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(p) = &a.predictions {
        write_text(p, &report.predictions_csv())?;
    }
    Ok(0)
}

pub fn cmd_predict(a: &PredictArgs) -> Result<i32> {
    let model = load_model(&a.model)?;
    let file = load_feature_csv(&a.file)?;
    let hop = a.hop.unwrap_or(model.segment_width());
    let id = a.file.display().to_string();
    let p = predict_file(&model, &id, &file.frames, hop, a.voting)?;
    let probs: Vec<String> = p.voted.iter().map(|v| format!("{v:.6}")).collect();
    println!("segments {}", p.segment_probs.len());
    println!("probabilities {}", probs.join(" "));
    println!("class {}", p.predicted);
    Ok(0)
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<i32> {
    println!("seed {}", a.seed);
    let reports = run_all(a.seed, a.sizes.unwrap_or_default())?;
    let mut worst: f64 = 0.0;
    for r in &reports {
        println!("{r}");
        worst = worst.max(r.max_rel_err);
    }
    let ok = worst <= FD_TOLERANCE;
    println!(
        "max rel err {worst:.3e} {} {FD_TOLERANCE:e}",
        if ok { "<=" } else { ">" }
    );
    Ok(if ok { 0 } else { 1 })
}

pub fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let cfg = SynthConfig {
        classes: a.classes,
        files_per_class: a.files_per_class,
        features: a.features,
        frames: a.frames,
        folds: a.folds,
        noise: a.noise,
        seed: a.seed,
    };
    println!("seed {}", a.seed);
    let mut ds = synth_generate(&cfg)?;
    if a.shuffle_frames {
        let mut rng = Rng::derive(a.seed, 1);
        for f in &mut ds.files {
            f.frames = shuffle_frames(&f.frames, &mut rng);
        }
    }
    let manifest = write_dataset(&ds, &a.out)?;
    println!(
        "{} files in {} classes, {} folds -> {}",
        ds.files.len(),
        a.classes,
        a.folds,
        manifest.display()
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_negative_overlap() {
        let cli = Cli::try_parse_from([
            "mclnn",
            "mask",
            "--features",
            "9",
            "--nodes",
            "8",
            "--bandwidth",
            "3",
            "--overlap",
            "-1",
            "--out",
            "m.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Mask(m) => assert_eq!(m.overlap, -1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serde_names_parse_as_flags() {
        assert_eq!(parse_serde::<VotingRule>("majority").unwrap(), VotingRule::Majority);
        assert_eq!(parse_serde::<PoolMode>("max").unwrap(), PoolMode::Max);
        assert!(parse_serde::<PoolMode>("median").is_err());
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(run(["mclnn", "gradcheck", "--bogus"]), 2);
    }
}
