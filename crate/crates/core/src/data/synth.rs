use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{save_manifest, write_feature_csv, Dataset, DatasetManifest, LabeledFile, ManifestEntry};
use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Rng};

/// Parameters of the temporal-order dataset.
///
/// Every class is built from the same two frame prototypes `P` and `Q`,
/// used equally often. Class `c` alternates runs of `c + 1` copies of `P`
/// and `c + 1` copies of `Q` (`PQPQ…`, `PPQQ…`, `PPPQQQ…`), starting at a
/// random phase, with Gaussian noise on every value. A single frame says
/// nothing about the class; the run structure across frames does.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub files_per_class: usize,
    pub features: usize,
    pub frames: usize,
    pub folds: usize,
    /// Standard deviation of the additive noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            files_per_class: 200,
            features: 20,
            frames: 40,
            folds: 5,
            noise: 1.0,
            seed: 0,
        }
    }
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.classes < 2 {
        return Err(Error::invalid("synthetic data needs at least 2 classes"));
    }
    if cfg.files_per_class == 0 || cfg.features == 0 || cfg.folds == 0 {
        return Err(Error::invalid("files per class, features and folds must all be >= 1"));
    }
    // the slowest class needs at least one full P-run/Q-run period
    if cfg.frames < 2 * cfg.classes {
        return Err(Error::invalid(format!(
            "{} frames cannot show a full period for {} classes (need >= {})",
            cfg.frames,
            cfg.classes,
            2 * cfg.classes
        )));
    }
    if !cfg.noise.is_finite() || cfg.noise < 0.0 {
        return Err(Error::invalid("noise must be a finite non-negative value"));
    }
    let mut rng = Rng::new(cfg.seed);
    let protos: [Vec<f64>; 2] = [
        (0..cfg.features).map(|_| rng.normal()).collect(),
        (0..cfg.features).map(|_| rng.normal()).collect(),
    ];
    let classes: Vec<String> = (0..cfg.classes).map(|c| format!("run{}", c + 1)).collect();
    let mut entries = Vec::new();
    let mut files = Vec::new();
    for i in 0..cfg.files_per_class {
        for (c, name) in classes.iter().enumerate() {
            let run = c + 1;
            let phase = rng.below(2 * run);
            let mut m = Matrix::zeros(cfg.frames, cfg.features);
            for t in 0..cfg.frames {
                let p = &protos[((t + phase) / run) % 2];
                for (j, &v) in p.iter().enumerate() {
                    m[(t, j)] = v + cfg.noise * rng.normal();
                }
            }
            let path = PathBuf::from(format!("{name}/{i:04}.csv"));
            // round-robin keeps every fold class-balanced
            let fold = i % cfg.folds + 1;
            entries.push(ManifestEntry {
                path: path.clone(),
                label: name.clone(),
                fold,
            });
            files.push(LabeledFile {
                id: path.display().to_string(),
                label: c,
                frames: m,
            });
        }
    }
    Ok(Dataset {
        manifest: DatasetManifest {
            classes,
            folds: cfg.folds,
            files: entries,
            base_dir: PathBuf::new(),
        },
        files,
    })
}

/// Random permutation of the rows (frames) of a frames × features matrix.
pub fn shuffle_frames(frames: &Matrix, rng: &mut Rng) -> Matrix {
    let mut order: Vec<usize> = (0..frames.rows()).collect();
    rng.shuffle(&mut order);
    let mut out = Matrix::zeros(frames.rows(), frames.cols());
    for (dst, &src) in order.iter().enumerate() {
        for j in 0..frames.cols() {
            out[(dst, j)] = frames[(src, j)];
        }
    }
    out
}

/// Writes `manifest.json` plus one CSV per file under `dir`.
pub fn write_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    for (entry, file) in ds.manifest.files.iter().zip(&ds.files) {
        let path = dir.join(&entry.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        write_feature_csv(&file.frames, &path)?;
    }
    let manifest_path = dir.join("manifest.json");
    save_manifest(&ds.manifest, &manifest_path)?;
    Ok(manifest_path)
}
