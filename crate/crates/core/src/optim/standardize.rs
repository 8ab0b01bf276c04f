use crate::error::{Error, Result};
use crate::numkernel::Matrix;

/// Lower bound applied to every per-feature standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-scoring with statistics taken from training frames only.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
    epsilon: f64,
}

impl Standardizer {
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>, epsilon: f64) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::shape("standardizer mean and std differ in length"));
        }
        if std.iter().any(|&s| s.is_nan() || s < epsilon) {
            return Err(Error::invalid("standardizer std below its floor"));
        }
        Ok(Self { mean, std, epsilon })
    }

    /// Population mean and std over all rows (frames) of all matrices.
    pub fn fit<'a>(frames: impl IntoIterator<Item = &'a Matrix>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        let mut mats = Vec::new();
        for m in frames {
            if sum.is_empty() {
                sum = vec![0.0; m.cols()];
            } else if m.cols() != sum.len() {
                return Err(Error::shape(format!(
                    "cannot fit standardizer over {} and {} features",
                    sum.len(),
                    m.cols()
                )));
            }
            for (j, s) in sum.iter_mut().enumerate() {
                *s += m.column(j).iter().sum::<f64>();
            }
            n += m.rows();
            mats.push(m);
        }
        if n < 2 || sum.is_empty() {
            return Err(Error::invalid("standardizer needs at least 2 training frames"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        // second pass on centred values
        sq.resize(mean.len(), 0.0);
        for m in mats {
            for (j, acc) in sq.iter_mut().enumerate() {
                *acc += m.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>();
            }
        }
        let std = sq.iter().map(|s| (s / n as f64).sqrt().max(STD_FLOOR)).collect();
        Ok(Self {
            mean,
            std,
            epsilon: STD_FLOOR,
        })
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `(x - mean) / std` per feature on a frames × features matrix.
    pub fn apply(&self, frames: &Matrix) -> Result<Matrix> {
        if frames.cols() != self.mean.len() {
            return Err(Error::shape(format!(
                "standardizer fitted on {} features, got {}",
                self.mean.len(),
                frames.cols()
            )));
        }
        let mut out = frames.clone();
        for j in 0..frames.cols() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            out.column_mut(j).iter_mut().for_each(|v| *v = (*v - mu) / sd);
        }
        Ok(out)
    }
}
