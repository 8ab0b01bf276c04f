use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Matrix;

/// Feature-wise reduction over the frames that survive the conditional stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    #[default]
    Mean,
    Max,
    /// Concatenate the frames (column by column).
    Flatten,
}

impl PoolMode {
    pub fn output_len(&self, features: usize, frames: usize) -> usize {
        match self {
            PoolMode::Mean | PoolMode::Max => features,
            PoolMode::Flatten => features * frames,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pooled {
    pub out: Vec<f64>,
    /// Winning frame per feature for max pooling.
    pub argmax: Option<Vec<usize>>,
}

pub fn temporal_pool(block: &Matrix, mode: PoolMode) -> Result<Pooled> {
    let (e, k) = block.shape();
    if k == 0 {
        return Err(Error::invalid("cannot pool over zero frames"));
    }
    Ok(match mode {
        PoolMode::Mean => {
            let mut out = vec![0.0; e];
            for col in block.columns() {
                for (o, v) in out.iter_mut().zip(col) {
                    *o += v;
                }
            }
            out.iter_mut().for_each(|o| *o /= k as f64);
            Pooled { out, argmax: None }
        }
        PoolMode::Max => {
            let mut out = block.column(0).to_vec();
            let mut argmax = vec![0; e];
            for t in 1..k {
                for (i, &v) in block.column(t).iter().enumerate() {
                    if v > out[i] {
                        out[i] = v;
                        argmax[i] = t;
                    }
                }
            }
            Pooled {
                out,
                argmax: Some(argmax),
            }
        }
        PoolMode::Flatten => Pooled {
            out: block.as_slice().to_vec(),
            argmax: None,
        },
    })
}

/// Gradient of the pooled vector wrt the `features × frames` block.
pub fn pool_backward(features: usize, frames: usize, mode: PoolMode, pooled: &Pooled, grad: &[f64]) -> Result<Matrix> {
    if grad.len() != mode.output_len(features, frames) {
        return Err(Error::shape("pool gradient length mismatch"));
    }
    let mut g = Matrix::zeros(features, frames);
    match mode {
        PoolMode::Mean => {
            let scale = 1.0 / frames as f64;
            for t in 0..frames {
                for (dst, src) in g.column_mut(t).iter_mut().zip(grad) {
                    *dst = src * scale;
                }
            }
        }
        PoolMode::Max => {
            let argmax = pooled
                .argmax
                .as_ref()
                .ok_or_else(|| Error::invalid("max pooling backward needs argmax"))?;
            for (i, &t) in argmax.iter().enumerate() {
                g[(i, t)] = grad[i];
            }
        }
        PoolMode::Flatten => g.as_mut_slice().copy_from_slice(grad),
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_frame_passthrough() {
        let block = Matrix::from_columns(&[[1.0, -2.0, 3.0]]).unwrap();
        for mode in [PoolMode::Mean, PoolMode::Max] {
            assert_eq!(temporal_pool(&block, mode).unwrap().out, vec![1.0, -2.0, 3.0]);
        }
    }

    #[test]
    fn mean_max_flatten() {
        let block = Matrix::from_rows(&[[1.0, 3.0], [2.0, 4.0]]).unwrap();
        assert_eq!(temporal_pool(&block, PoolMode::Mean).unwrap().out, vec![2.0, 3.0]);
        let max = temporal_pool(&block, PoolMode::Max).unwrap();
        assert_eq!(max.out, vec![3.0, 4.0]);
        assert_eq!(max.argmax, Some(vec![1, 1]));
        assert_eq!(
            temporal_pool(&block, PoolMode::Flatten).unwrap().out,
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert!(temporal_pool(&Matrix::zeros(2, 0), PoolMode::Mean).is_err());
    }

    #[test]
    fn max_backward_routes_to_argmax() {
        let block = Matrix::from_rows(&[[0.3, 1.7, -0.2], [2.5, 0.1, 0.4]]).unwrap();
        let pooled = temporal_pool(&block, PoolMode::Max).unwrap();
        let g = pool_backward(2, 3, PoolMode::Max, &pooled, &[1.5, -2.0]).unwrap();
        let h = 1e-5;
        let weights = [1.5, -2.0];
        let f = |b: &Matrix| -> f64 {
            let p = temporal_pool(b, PoolMode::Max).unwrap().out;
            p.iter().zip(&weights).map(|(a, w)| a * w).sum()
        };
        for i in 0..2 {
            for t in 0..3 {
                let mut plus = block.clone();
                let mut minus = block.clone();
                plus[(i, t)] += h;
                minus[(i, t)] -= h;
                let num = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!((num - g[(i, t)]).abs() < 1e-9, "({i},{t}) {num} vs {}", g[(i, t)]);
            }
        }
        assert_eq!(g[(0, 0)], 0.0);
        assert_eq!(g[(0, 1)], 1.5);
        assert_eq!(g[(1, 0)], -2.0);
    }
}
