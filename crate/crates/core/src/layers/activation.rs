use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Rng;

/// Initial PReLU slope.
pub const DEFAULT_PRELU_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    #[default]
    Prelu,
    Identity,
}

/// Per-layer transfer function. PReLU carries one learnable slope per neuron.
#[derive(Debug, Clone, PartialEq)]
pub enum Transfer {
    Prelu { slope: Vec<f64> },
    Identity,
}

impl Transfer {
    pub fn new(kind: TransferKind, width: usize) -> Self {
        match kind {
            TransferKind::Prelu => Transfer::Prelu {
                slope: vec![DEFAULT_PRELU_SLOPE; width],
            },
            TransferKind::Identity => Transfer::Identity,
        }
    }

    pub fn kind(&self) -> TransferKind {
        match self {
            Transfer::Prelu { .. } => TransferKind::Prelu,
            Transfer::Identity => TransferKind::Identity,
        }
    }

    pub fn slope(&self) -> Option<&[f64]> {
        match self {
            Transfer::Prelu { slope } => Some(slope),
            Transfer::Identity => None,
        }
    }

    pub fn slope_mut(&mut self) -> Option<&mut Vec<f64>> {
        match self {
            Transfer::Prelu { slope } => Some(slope),
            Transfer::Identity => None,
        }
    }

    /// Applies the transfer to `pre`, laid out as consecutive vectors of
    /// neuron width (a column-major `width × frames` block works directly).
    pub fn apply(&self, pre: &[f64]) -> Vec<f64> {
        match self {
            Transfer::Identity => pre.to_vec(),
            Transfer::Prelu { slope } => pre
                .iter()
                .enumerate()
                .map(|(i, &x)| prelu(x, slope[i % slope.len()]))
                .collect(),
        }
    }

    /// Gradient wrt the pre-activation, accumulating the slope gradient into
    /// `grad_slope` when the transfer is PReLU.
    pub fn backward(&self, pre: &[f64], grad_out: &[f64], grad_slope: Option<&mut [f64]>) -> Vec<f64> {
        match self {
            Transfer::Identity => grad_out.to_vec(),
            Transfer::Prelu { slope } => {
                let w = slope.len();
                let mut gs = grad_slope;
                pre.iter()
                    .zip(grad_out)
                    .enumerate()
                    .map(|(i, (&x, &g))| {
                        let j = i % w;
                        if x > 0.0 {
                            g
                        } else {
                            if let Some(gs) = gs.as_deref_mut() {
                                gs[j] += g * x;
                            }
                            g * slope[j]
                        }
                    })
                    .collect()
            }
        }
    }
}

#[inline]
fn prelu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// `y = x` for positive inputs, `slope · x` otherwise.
pub fn prelu_forward(x: &[f64], slope: &[f64]) -> Result<Vec<f64>> {
    if x.len() != slope.len() {
        return Err(Error::shape(format!(
            "prelu: {} inputs, {} slopes",
            x.len(),
            slope.len()
        )));
    }
    Ok(x.iter().zip(slope).map(|(&x, &a)| prelu(x, a)).collect())
}

/// Returns `(grad_x, grad_slope)`.
pub fn prelu_backward(x: &[f64], slope: &[f64], grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != slope.len() || x.len() != grad_out.len() {
        return Err(Error::shape("prelu_backward: length mismatch"));
    }
    let t = Transfer::Prelu { slope: slope.to_vec() };
    let mut gs = vec![0.0; slope.len()];
    let gx = t.backward(x, grad_out, Some(&mut gs));
    Ok((gx, gs))
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// Inverted dropout. Returns the output and the per-unit scale factors
/// (0 or `1 / (1 - rate)`) needed by [`dropout_backward`]. At inference, or
/// with `rate == 0`, the input passes through unchanged and no random draws
/// are made.
pub fn dropout(x: &[f64], rate: f64, rng: &mut Rng, training: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok((x.to_vec(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = x.iter().map(|_| if rng.bernoulli(rate) { 0.0 } else { keep }).collect();
    let y = x.iter().zip(&scale).map(|(v, s)| v * s).collect();
    Ok((y, Some(scale)))
}

pub fn dropout_backward(grad_out: &[f64], scale: Option<&[f64]>) -> Vec<f64> {
    match scale {
        None => grad_out.to_vec(),
        Some(s) => grad_out.iter().zip(s).map(|(g, s)| g * s).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prelu_values() {
        assert_eq!(prelu_forward(&[5.0], &[0.25]).unwrap(), vec![5.0]);
        assert_eq!(prelu_forward(&[-2.0], &[0.25]).unwrap(), vec![-0.5]);
        assert!(prelu_forward(&[1.0, 2.0], &[0.25]).is_err());
    }

    #[test]
    fn prelu_gradient_matches_finite_differences() {
        let x = [1.3, -0.7, 2.2, -1.9];
        let a = [0.25, 0.1, -0.3, 0.6];
        let g = [0.5, -1.0, 2.0, 0.75];
        let (gx, ga) = prelu_backward(&x, &a, &g).unwrap();
        let h = 1e-5;
        let f = |x: &[f64], a: &[f64]| -> f64 { prelu_forward(x, a).unwrap().iter().zip(&g).map(|(y, g)| y * g).sum() };
        for i in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let num = (f(&xp, &a) - f(&xm, &a)) / (2.0 * h);
            assert!((num - gx[i]).abs() / num.abs().max(gx[i].abs()) <= 1e-8);
            let mut ap = a;
            let mut am = a;
            ap[i] += h;
            am[i] -= h;
            let num = (f(&x, &ap) - f(&x, &am)) / (2.0 * h);
            let denom = num.abs().max(ga[i].abs());
            if denom == 0.0 {
                assert_eq!(ga[i], 0.0);
            } else {
                assert!((num - ga[i]).abs() / denom <= 1e-8, "{num} vs {}", ga[i]);
            }
        }
    }

    #[test]
    fn softmax_symmetry_and_stability() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softmax(&[1000.0, 1000.0]), vec![0.5, 0.5]);
        let p = softmax(&[-3.0, 0.5, 7.25, 1e3]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dropout_behaviour() {
        let mut rng = Rng::new(1);
        let x = vec![1.0; 1000];
        let (y, s) = dropout(&x, 0.0, &mut rng, true).unwrap();
        assert_eq!(y, x);
        assert!(s.is_none());
        let (y, _) = dropout(&x, 0.5, &mut rng, false).unwrap();
        assert_eq!(y, x);
        let (y, s) = dropout(&x, 0.5, &mut rng, true).unwrap();
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = y.iter().filter(|&&v| v > 0.0).count();
        assert!((400..600).contains(&kept));
        assert_eq!(dropout_backward(&x, s.as_deref()), y);
        assert!(dropout(&x, 1.0, &mut rng, true).is_err());
        assert!(dropout(&x, -0.1, &mut rng, true).is_err());
    }
}
