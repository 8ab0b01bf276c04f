use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numkernel::Matrix;

/// A spectrogram-like matrix loaded from disk, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub path: PathBuf,
    pub frames: Matrix,
}

impl FeatureFile {
    pub fn frame_count(&self) -> usize {
        self.frames.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.frames.cols()
    }
}

/// Parses headerless numeric CSV text. `path` is only used in messages.
pub fn parse_feature_csv(text: &str, path: &Path) -> Result<Matrix> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("column {}: not a finite number: {cell:?}", c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    line,
                    format!("ragged row: {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "empty feature file".into()));
    }
    Matrix::from_rows(&rows)
}

pub fn load_feature_csv(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(FeatureFile {
        path: path.to_path_buf(),
        frames: parse_feature_csv(&text, path)?,
    })
}

/// Writes one frame per line using the shortest representation that
/// round-trips exactly.
pub fn write_feature_csv(frames: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..frames.rows() {
        for j in 0..frames.cols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:?}", frames[(i, j)]);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// First-order backward difference along time, zero for the first frame.
pub fn compute_delta(frames: &Matrix) -> Matrix {
    let (t, l) = frames.shape();
    let mut delta = Matrix::zeros(t, l);
    for j in 0..l {
        let src = frames.column(j);
        let dst = delta.column_mut(j);
        for i in 1..t {
            dst[i] = src[i] - src[i - 1];
        }
    }
    delta
}

/// `[frames | delta(frames)]`, doubling the feature count.
pub fn concat_delta(frames: &Matrix) -> Matrix {
    let delta = compute_delta(frames);
    let mut data = Vec::with_capacity(frames.len() * 2);
    data.extend_from_slice(frames.as_slice());
    data.extend_from_slice(delta.as_slice());
    Matrix::from_col_major(frames.rows(), frames.cols() * 2, data).expect("sized above")
}
