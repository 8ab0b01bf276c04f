use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_feature_csv, shuffle_frames};
use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Feature CSV, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
    /// Class name, one of [`DatasetManifest::classes`].
    pub label: String,
    /// Fold id in `1..=folds`.
    pub fold: usize,
}

/// `{"classes": [...], "folds": N, "files": [{"path", "label", "fold"}]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub folds: usize,
    pub files: Vec<ManifestEntry>,
    /// Directory relative paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::invalid("manifest needs at least two classes"));
        }
        let mut names = HashSet::new();
        for c in &self.classes {
            if !names.insert(c) {
                return Err(Error::invalid(format!("duplicate class name {c:?}")));
            }
        }
        if self.folds == 0 {
            return Err(Error::invalid("manifest fold count must be >= 1"));
        }
        let mut paths = HashSet::new();
        for f in &self.files {
            if !self.classes.contains(&f.label) {
                return Err(Error::invalid(format!(
                    "{}: label {:?} not in class list",
                    f.path.display(),
                    f.label
                )));
            }
            if f.fold == 0 || f.fold > self.folds {
                return Err(Error::invalid(format!(
                    "{}: fold {} outside 1..={}",
                    f.path.display(),
                    f.fold,
                    self.folds
                )));
            }
            if !paths.insert(&f.path) {
                return Err(Error::invalid(format!("duplicate path {}", f.path.display())));
            }
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::invalid(format!("unknown class {label:?}")))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut m: DatasetManifest = serde_json::from_str(&text)?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    Ok(m)
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(path, json + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Train/validation/test partition of a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<ManifestEntry>,
    pub validation: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
}

/// Test fold and validation fold held out; every other fold trains.
pub fn build_splits(manifest: &DatasetManifest, test_fold: usize, validation_fold: usize) -> Result<Splits> {
    for (name, f) in [("test", test_fold), ("validation", validation_fold)] {
        if f == 0 || f > manifest.folds {
            return Err(Error::invalid(format!(
                "{name} fold {f} outside 1..={}",
                manifest.folds
            )));
        }
    }
    if test_fold == validation_fold {
        return Err(Error::invalid(format!("test and validation fold are both {test_fold}")));
    }
    let mut s = Splits {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for e in &manifest.files {
        let bucket = if e.fold == test_fold {
            &mut s.test
        } else if e.fold == validation_fold {
            &mut s.validation
        } else {
            &mut s.train
        };
        bucket.push(e.clone());
    }
    Ok(s)
}

/// A loaded file with its class index; `frames` is frames × features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFile {
    pub id: String,
    pub label: usize,
    pub frames: Matrix,
}

pub fn load_split_files(manifest: &DatasetManifest, entries: &[ManifestEntry]) -> Result<Vec<LabeledFile>> {
    entries
        .iter()
        .map(|e| {
            let f = load_feature_csv(manifest.resolve(e))?;
            Ok(LabeledFile {
                id: e.path.display().to_string(),
                label: manifest.class_index(&e.label)?,
                frames: f.frames,
            })
        })
        .collect()
}

/// A manifest together with its loaded files, index-aligned.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// Files in manifest order.
    pub files: Vec<LabeledFile>,
}

impl Dataset {
    /// Files in the given folds.
    pub fn files_in_folds(&self, folds: &[usize]) -> Vec<LabeledFile> {
        self.manifest
            .files
            .iter()
            .zip(&self.files)
            .filter(|(e, _)| folds.contains(&e.fold))
            .map(|(_, f)| f.clone())
            .collect()
    }

    /// Copy with the frames of every file randomly permuted in time.
    pub fn shuffled(&self, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        Dataset {
            manifest: self.manifest.clone(),
            files: self
                .files
                .iter()
                .map(|f| LabeledFile {
                    frames: shuffle_frames(&f.frames, &mut rng),
                    ..f.clone()
                })
                .collect(),
        }
    }
}

/// Loads every file listed in the manifest.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    Ok(Dataset {
        manifest: manifest.clone(),
        files: load_split_files(manifest, &manifest.files)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(folds: usize, per_fold: usize) -> DatasetManifest {
        let mut files = Vec::new();
        for fold in 1..=folds {
            for i in 0..per_fold {
                files.push(ManifestEntry {
                    path: format!("f{fold}_{i}.csv").into(),
                    label: if i % 2 == 0 { "a" } else { "b" }.into(),
                    fold,
                });
            }
        }
        DatasetManifest {
            classes: vec!["a".into(), "b".into()],
            folds,
            files,
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn ten_fold_split() {
        let m = manifest(10, 3);
        let s = build_splits(&m, 10, 9).unwrap();
        assert!(s.test.iter().all(|e| e.fold == 10));
        assert!(s.validation.iter().all(|e| e.fold == 9));
        let train_folds: HashSet<usize> = s.train.iter().map(|e| e.fold).collect();
        assert_eq!(train_folds, (1..=8).collect());
        assert_eq!(s.train.len() + s.validation.len() + s.test.len(), m.files.len());
    }

    #[test]
    fn five_fold_partition() {
        let m = manifest(5, 4);
        for t in 1..=5 {
            let v = t % 5 + 1;
            let s = build_splits(&m, t, v).unwrap();
            let mut all: Vec<_> = s
                .train
                .iter()
                .chain(&s.validation)
                .chain(&s.test)
                .map(|e| e.path.clone())
                .collect();
            all.sort();
            let mut expect: Vec<_> = m.files.iter().map(|e| e.path.clone()).collect();
            expect.sort();
            assert_eq!(all, expect);
        }
    }

    #[test]
    fn split_errors() {
        let m = manifest(5, 1);
        assert!(build_splits(&m, 2, 2).is_err());
        assert!(build_splits(&m, 0, 2).is_err());
        assert!(build_splits(&m, 6, 2).is_err());
    }

    #[test]
    fn manifest_validation() {
        let mut m = manifest(3, 2);
        m.validate().unwrap();
        m.files[0].label = "zzz".into();
        assert!(m.validate().is_err());
        let mut m = manifest(3, 2);
        m.files[1].fold = 4;
        assert!(m.validate().is_err());
        let mut m = manifest(3, 2);
        m.files[1].path = m.files[0].path.clone();
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let m: DatasetManifest = serde_json::from_str(
            r#"{"classes":["dog","rain"],"folds":5,"files":[{"path":"a.csv","label":"rain","fold":3}]}"#,
        )
        .unwrap();
        m.validate().unwrap();
        assert_eq!(m.class_index("rain").unwrap(), 1);
    }
}
