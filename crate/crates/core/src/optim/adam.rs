use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ModelGrads, ParamMut};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates per parameter tensor, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    /// Fresh state for tensors of the given lengths.
    pub fn new(config: AdamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        Self {
            config,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    /// One bias-corrected update of every tensor in `params`.
    ///
    /// Masked tensors have their parameters and both moments multiplied by
    /// the mask after the update, so masked positions stay exactly zero.
    pub fn step(&mut self, params: &mut [ParamMut<'_>], grads: &ModelGrads) -> Result<()> {
        if params.len() != self.m.len() || grads.tensors.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam state holds {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.tensors.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(&grads.tensors).zip(&self.m) {
            if p.values.len() != g.len() || g.len() != m.len() {
                return Err(Error::shape("adam: tensor size mismatch"));
            }
        }
        self.t += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(&grads.tensors).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            if let Some(mask) = p.mask {
                for (i, &k) in mask.iter().enumerate() {
                    if k == 0.0 {
                        p.values[i] = 0.0;
                        m[i] = 0.0;
                        v[i] = 0.0;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Single-tensor ADAM update, for use outside a [`Model`](crate::Model).
pub fn adam_step(params: &mut [f64], grads: &[f64], mask: Option<&[f64]>, state: &mut AdamState) -> Result<()> {
    let mut views = [ParamMut { values: params, mask }];
    state.step(
        &mut views,
        &ModelGrads {
            tensors: vec![grads.to_vec()],
        },
    )
}
