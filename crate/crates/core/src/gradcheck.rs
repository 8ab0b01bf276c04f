//! Central finite-difference checks for every differentiable unit.
//!
//! Each check evaluates a scalar function of a flat parameter vector at
//! `x ± h` and compares `(f(x+h) - f(x-h)) / 2h` with the analytic
//! gradient. Along with the value, the function reports its activation
//! pattern (PReLU signs, max-pool winners). Coordinates whose perturbation
//! changes that pattern straddle a kink where the derivative does not exist;
//! they are skipped and counted rather than compared.

use std::fmt;

use crate::error::{Error, Result};
use crate::layers::{
    pool_backward, softmax, temporal_pool, ConditionalLayer, DenseLayer, PoolMode, Transfer, TransferKind,
};
use crate::masking::{generate_mask, MaskSpec};
use crate::network::{ConditionalSpec, MaskConfig, Model, ModelConfig};
use crate::numkernel::{Matrix, Rng};
use crate::optim::cross_entropy;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const FD_TOLERANCE: f64 = 1e-6;
/// Magnitude below which the relative error is measured against this floor
/// instead of the gradient itself.
pub const REL_ERR_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Result of checking one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitReport {
    pub unit: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
    /// Index, analytic and numeric value of the worst coordinate.
    pub worst: Option<(usize, f64, f64)>,
}

impl UnitReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= FD_TOLERANCE
    }
}

impl fmt::Display for UnitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} checked {:>5}  skipped {:>3}  max rel err {:.3e}  {}",
            self.unit,
            self.checked,
            self.skipped,
            self.max_rel_err,
            if self.passed() { "ok" } else { "FAIL" }
        )
    }
}

/// Compares `analytic` against central differences of `eval` around `x`.
/// `eval` returns the scalar value and the activation pattern.
pub fn check_gradient<F>(unit: &str, x: &[f64], analytic: &[f64], eval: F) -> Result<UnitReport>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<usize>)>,
{
    if x.len() != analytic.len() {
        return Err(Error::shape(format!(
            "{unit}: {} parameters, {} gradient entries",
            x.len(),
            analytic.len()
        )));
    }
    let (_, base_pattern) = eval(x)?;
    let mut report = UnitReport {
        unit: unit.to_string(),
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let (fp, pp) = eval(&probe)?;
        probe[i] = x[i] - FD_STEP;
        let (fm, pm) = eval(&probe)?;
        probe[i] = x[i];
        if pp != base_pattern || pm != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * FD_STEP);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if err > report.max_rel_err || report.worst.is_none() {
            report.max_rel_err = report.max_rel_err.max(err);
            report.worst = Some((i, analytic[i], numeric));
        }
    }
    Ok(report)
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_col_major(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).expect("sized")
}

fn random_slopes(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 0.05 + 0.4 * rng.next_f64()).collect()
}

fn sign_pattern(v: &[f64]) -> Vec<usize> {
    v.iter().map(|&x| (x > 0.0) as usize).collect()
}

fn weighted_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Layer dimensions for the conditional-layer checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSizes {
    pub features: usize,
    pub nodes: usize,
    pub order: usize,
    pub frames: usize,
}

impl Default for LayerSizes {
    fn default() -> Self {
        Self {
            features: 8,
            nodes: 6,
            order: 2,
            frames: 7,
        }
    }
}

impl std::str::FromStr for LayerSizes {
    type Err = Error;

    /// `l,e,n,w`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("sizes {s:?}: {e}")))?;
        match parts.as_slice() {
            &[features, nodes, order, frames] => {
                if features == 0 || nodes == 0 || order == 0 || frames < 2 * order + 1 {
                    return Err(Error::invalid(format!(
                        "sizes {s:?}: need l, e, n >= 1 and w >= 2n + 1"
                    )));
                }
                Ok(Self {
                    features,
                    nodes,
                    order,
                    frames,
                })
            }
            _ => Err(Error::invalid(format!("sizes {s:?}: expected l,e,n,w"))),
        }
    }
}

fn conditional_flat(layer: &ConditionalLayer, input: &Matrix) -> Vec<f64> {
    let mut x: Vec<f64> = layer.weights().iter().flat_map(|w| w.as_slice().to_vec()).collect();
    x.extend_from_slice(layer.bias());
    x.extend_from_slice(layer.transfer().slope().unwrap_or(&[]));
    x.extend_from_slice(input.as_slice());
    x
}

fn conditional_unflat(template: &ConditionalLayer, input: &Matrix, x: &[f64]) -> (ConditionalLayer, Matrix) {
    let mut layer = template.clone();
    let mut pos = 0;
    for w in layer.weights_mut() {
        let n = w.len();
        w.as_mut_slice().copy_from_slice(&x[pos..pos + n]);
        pos += n;
    }
    let e = layer.nodes();
    layer.bias_mut().copy_from_slice(&x[pos..pos + e]);
    pos += e;
    if let Some(s) = layer.transfer_mut().slope_mut() {
        s.copy_from_slice(&x[pos..pos + e]);
        pos += e;
    }
    let input = Matrix::from_col_major(input.rows(), input.cols(), x[pos..].to_vec()).expect("sized");
    (layer, input)
}

/// Conditional layer (optionally masked): weights, bias, slopes and input.
pub fn check_conditional(sizes: LayerSizes, masked: bool, rng: &mut Rng) -> Result<UnitReport> {
    let LayerSizes {
        features: l,
        nodes: e,
        order: n,
        frames: w,
    } = sizes;
    let mask = if masked {
        let bw = l.min(3);
        Some(generate_mask(&MaskSpec::new(l, e, bw, -1)?)?)
    } else {
        None
    };
    let mut layer = ConditionalLayer::init(l, e, n, TransferKind::Prelu, None, rng)?;
    // fill masked positions too: the check must show they get no gradient
    layer.set_mask(mask)?;
    for b in layer.bias_mut() {
        *b = 0.3 * rng.normal();
    }
    if let Some(s) = layer.transfer_mut().slope_mut() {
        *s = random_slopes(rng, e);
    }
    let input = random_matrix(rng, l, w);
    let upstream = random_matrix(rng, e, w - 2 * n);

    let cache = layer.forward(&input)?;
    let g = layer.backward(&input, &cache, &upstream)?;
    let mut analytic: Vec<f64> = g.weights.iter().flat_map(|m| m.as_slice().to_vec()).collect();
    analytic.extend(&g.bias);
    analytic.extend(g.slope.unwrap_or_default());
    analytic.extend_from_slice(g.input.as_slice());

    let x = conditional_flat(&layer, &input);
    let name = if masked { "mclnn layer" } else { "clnn layer" };
    check_gradient(name, &x, &analytic, |x| {
        let (layer, input) = conditional_unflat(&layer, &input, x);
        let out = layer.forward(&input)?;
        Ok((
            weighted_sum(out.out.as_slice(), upstream.as_slice()),
            sign_pattern(out.pre.as_slice()),
        ))
    })
}

/// Dense layer with PReLU: weights, bias, slopes and input.
pub fn check_dense(inputs: usize, outputs: usize, rng: &mut Rng) -> Result<UnitReport> {
    let mut layer = DenseLayer::init(inputs, outputs, TransferKind::Prelu, rng);
    for b in layer.bias_mut() {
        *b = 0.3 * rng.normal();
    }
    if let Some(s) = layer.transfer_mut().slope_mut() {
        *s = random_slopes(rng, outputs);
    }
    let x_in: Vec<f64> = (0..inputs).map(|_| rng.normal()).collect();
    let upstream: Vec<f64> = (0..outputs).map(|_| rng.normal()).collect();
    let cache = layer.forward(&x_in)?;
    let g = layer.backward(&x_in, &cache, &upstream)?;
    let mut analytic = g.weights.as_slice().to_vec();
    analytic.extend(&g.bias);
    analytic.extend(g.slope.unwrap_or_default());
    analytic.extend(&g.input);

    let mut x = layer.weights().as_slice().to_vec();
    x.extend_from_slice(layer.bias());
    x.extend_from_slice(layer.transfer().slope().unwrap_or(&[]));
    x.extend(&x_in);
    let nw = inputs * outputs;
    check_gradient("dense layer", &x, &analytic, |x| {
        let w = Matrix::from_col_major(inputs, outputs, x[..nw].to_vec())?;
        let b = x[nw..nw + outputs].to_vec();
        let slope = x[nw + outputs..nw + 2 * outputs].to_vec();
        let layer = DenseLayer::from_parts(w, b, Transfer::Prelu { slope })?;
        let out = layer.forward(&x[nw + 2 * outputs..])?;
        Ok((weighted_sum(&out.out, &upstream), sign_pattern(&out.pre)))
    })
}

/// Standalone PReLU: inputs and slopes.
pub fn check_prelu(width: usize, rng: &mut Rng) -> Result<UnitReport> {
    let x_in: Vec<f64> = (0..width).map(|_| rng.normal()).collect();
    let slope = random_slopes(rng, width);
    let upstream: Vec<f64> = (0..width).map(|_| rng.normal()).collect();
    let (gx, gs) = crate::layers::prelu_backward(&x_in, &slope, &upstream)?;
    let mut x = x_in.clone();
    x.extend(&slope);
    let mut analytic = gx;
    analytic.extend(gs);
    check_gradient("prelu", &x, &analytic, |x| {
        let y = crate::layers::prelu_forward(&x[..width], &x[width..])?;
        Ok((weighted_sum(&y, &upstream), sign_pattern(&x[..width])))
    })
}

/// Temporal pooling in the given mode.
pub fn check_pool(mode: PoolMode, features: usize, frames: usize, rng: &mut Rng) -> Result<UnitReport> {
    let block = random_matrix(rng, features, frames);
    let upstream: Vec<f64> = (0..mode.output_len(features, frames)).map(|_| rng.normal()).collect();
    let pooled = temporal_pool(&block, mode)?;
    let g = pool_backward(features, frames, mode, &pooled, &upstream)?;
    let name = match mode {
        PoolMode::Mean => "pool mean",
        PoolMode::Max => "pool max",
        PoolMode::Flatten => "pool flatten",
    };
    check_gradient(name, block.as_slice(), g.as_slice(), |x| {
        let b = Matrix::from_col_major(features, frames, x.to_vec())?;
        let p = temporal_pool(&b, mode)?;
        Ok((weighted_sum(&p.out, &upstream), p.argmax.unwrap_or_default()))
    })
}

/// Softmax followed by cross-entropy, wrt the logits.
pub fn check_softmax_xent(classes: usize, rng: &mut Rng) -> Result<UnitReport> {
    let logits: Vec<f64> = (0..classes).map(|_| 2.0 * rng.normal()).collect();
    let target = rng.below(classes);
    let mut analytic = softmax(&logits);
    analytic[target] -= 1.0;
    check_gradient("softmax+xent", &logits, &analytic, |x| {
        Ok((cross_entropy(&softmax(x), target)?, Vec::new()))
    })
}

/// The small masked model used for end-to-end checks: six input features,
/// one order-1 layer of five nodes, two extra frames, three classes.
pub fn small_model_config(seed: u64, pool: PoolMode) -> ModelConfig {
    ModelConfig {
        input_features: 6,
        delta: false,
        conditional_layers: vec![ConditionalSpec {
            width: 5,
            order: 1,
            mask: Some(MaskConfig {
                bandwidth: 3,
                overlap: 1,
            }),
            dropout: 0.0,
        }],
        extra_frames: 2,
        pool,
        dense_widths: vec![4],
        dense_dropout: Some(vec![0.5]),
        classes: 3,
        transfer: TransferKind::Prelu,
        seed,
    }
}

/// Full model: cross-entropy loss wrt every parameter tensor.
pub fn check_model(config: ModelConfig, rng: &mut Rng) -> Result<UnitReport> {
    let mut model = Model::new(config)?;
    // non-trivial biases and slopes so every path carries gradient
    for p in model.params_mut() {
        if p.mask.is_none() && p.values.len() < 8 {
            for v in p.values.iter_mut() {
                *v = 0.1 + 0.3 * rng.next_f64();
            }
        }
    }
    let q = model.segment_width();
    let segment = random_matrix(rng, model.config().input_features, q);
    let target = rng.below(model.classes());
    let (_, grads) = model.loss_and_grads(&segment, target, false, rng)?;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let x: Vec<f64> = model.params().concat();
    let analytic: Vec<f64> = grads.tensors.concat();
    let template = model.clone();
    let masked = template.conditional_layers().iter().any(|l| l.mask().is_some());
    let name = format!(
        "{}model, {:?} pool",
        if masked { "masked " } else { "" },
        template.config().pool
    )
    .to_lowercase();
    check_gradient(&name, &x, &analytic, |x| {
        let mut m = template.clone();
        let mut tensors = Vec::with_capacity(sizes.len());
        let mut pos = 0;
        for &n in &sizes {
            tensors.push(x[pos..pos + n].to_vec());
            pos += n;
        }
        m.load_params(&tensors)?;
        let trace = m.forward_trace(&segment, false, &mut Rng::new(0))?;
        Ok((
            cross_entropy(trace.probabilities(), target)?,
            trace.activation_pattern(),
        ))
    })
}

/// Every unit check at the given layer sizes.
pub fn run_all(seed: u64, sizes: LayerSizes) -> Result<Vec<UnitReport>> {
    let mut rng = Rng::new(seed);
    let mut out = vec![
        check_conditional(sizes, false, &mut rng.split())?,
        check_conditional(sizes, true, &mut rng.split())?,
        check_dense(7, 5, &mut rng.split())?,
        check_prelu(16, &mut rng.split())?,
    ];
    for mode in [PoolMode::Mean, PoolMode::Max, PoolMode::Flatten] {
        out.push(check_pool(mode, 6, 4, &mut rng.split())?);
    }
    out.push(check_softmax_xent(5, &mut rng.split())?);
    for pool in [PoolMode::Mean, PoolMode::Max] {
        let cfg = small_model_config(rng.next_u64(), pool);
        out.push(check_model(cfg, &mut rng.split())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_definition() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0) - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let x = [1.0, 2.0];
        let r = check_gradient("square", &x, &[2.0, 4.0], |x| Ok((x[0] * x[0] + x[1] * x[1], vec![]))).unwrap();
        assert!(r.passed(), "{r}");
        let r = check_gradient("square", &x, &[2.0, 4.1], |x| Ok((x[0] * x[0] + x[1] * x[1], vec![]))).unwrap();
        assert!(!r.passed());
        assert_eq!(r.worst.unwrap().0, 1);
    }

    #[test]
    fn skips_kinks() {
        // |x| at x = 0 straddles a kink
        let r = check_gradient("abs", &[0.0], &[0.0], |x| Ok((x[0].abs(), vec![(x[0] > 0.0) as usize]))).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.checked, 0);
    }

    #[test]
    fn parses_sizes() {
        let s: LayerSizes = "8,6,2,7".parse().unwrap();
        assert_eq!(s, LayerSizes::default());
        assert!("8,6,2".parse::<LayerSizes>().is_err());
        assert!("8,6,3,6".parse::<LayerSizes>().is_err());
    }

    #[test]
    fn default_suite_passes() {
        for r in run_all(1, LayerSizes::default()).unwrap() {
            assert!(r.passed(), "{r}");
            assert!(r.checked > 0, "{r}");
        }
    }
}
