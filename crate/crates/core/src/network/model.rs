use crate::data::concat_delta;
use crate::error::{Error, Result};
use crate::layers::{
    dropout, dropout_backward, pool_backward, softmax, temporal_pool, ConditionalLayer, ConditionalOutput, DenseLayer,
    DenseOutput, Pooled, Transfer, TransferKind,
};
use crate::masking::{generate_mask, MaskSpec};
use crate::network::{ModelConfig, SegmentGeometry};
use crate::numkernel::{Matrix, Rng};
use crate::optim::{cross_entropy, Standardizer};

/// A conditional stack, temporal pool, dense hidden layers and a softmax
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    geometry: SegmentGeometry,
    conditional: Vec<ConditionalLayer>,
    dense: Vec<DenseLayer>,
    output: DenseLayer,
    standardizer: Option<Standardizer>,
}

/// Name, shape and masking of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub masked: bool,
}

/// Mutable view of one parameter tensor with its mask, if any.
pub struct ParamMut<'a> {
    pub values: &'a mut [f64],
    pub mask: Option<&'a [f64]>,
}

/// Gradients for every parameter tensor, in [`Model::param_layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub tensors: Vec<Vec<f64>>,
}

impl ModelGrads {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            tensors: model
                .param_layout()
                .iter()
                .map(|p| vec![0.0; p.rows * p.cols])
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Everything a backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input of each conditional layer (the segment, then each dropped-out output).
    cond_inputs: Vec<Matrix>,
    cond_outputs: Vec<ConditionalOutput>,
    cond_dropout: Vec<Option<Vec<f64>>>,
    pool_input: Matrix,
    pooled: Pooled,
    dense_inputs: Vec<Vec<f64>>,
    dense_outputs: Vec<DenseOutput>,
    dense_dropout: Vec<Option<Vec<f64>>>,
    output_input: Vec<f64>,
    output: DenseOutput,
    probabilities: Vec<f64>,
}

impl ForwardTrace {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn logits(&self) -> &[f64] {
        &self.output.pre
    }

    /// Frames that reached the pooling layer.
    pub fn pool_frames(&self) -> usize {
        self.pool_input.cols()
    }

    /// Sign pattern of every PReLU input and every max-pool winner. Finite
    /// differences are only meaningful where this pattern does not change.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut p = Vec::new();
        for c in &self.cond_outputs {
            p.extend(c.pre.as_slice().iter().map(|&v| (v > 0.0) as usize));
        }
        if let Some(a) = &self.pooled.argmax {
            p.extend(a.iter().copied());
        }
        for d in &self.dense_outputs {
            p.extend(d.pre.iter().map(|&v| (v > 0.0) as usize));
        }
        p
    }
}

impl Model {
    /// Builds and initialises a model from its configuration, drawing every
    /// weight from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let mut rng = Rng::new(config.seed);
        Self::build(config, Some(&mut rng))
    }

    /// Same architecture with every parameter zero (PReLU slopes stay at
    /// their initial value).
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        Self::build(config, None)
    }

    fn build(config: ModelConfig, mut rng: Option<&mut Rng>) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry()?;
        let kind = config.transfer;
        let mut features = config.input_features;
        let mut conditional = Vec::with_capacity(config.conditional_layers.len());
        for spec in &config.conditional_layers {
            let mask = spec
                .mask
                .map(|m| generate_mask(&MaskSpec::new(features, spec.width, m.bandwidth, m.overlap)?))
                .transpose()?;
            let layer = match rng.as_deref_mut() {
                Some(rng) => ConditionalLayer::init(features, spec.width, spec.order, kind, mask, rng)?,
                None => {
                    let mut l = ConditionalLayer::zeros(features, spec.width, spec.order, kind)?;
                    l.set_mask(mask)?;
                    l
                }
            };
            conditional.push(layer);
            features = spec.width;
        }
        let mut width = config.pool.output_len(features, config.extra_frames);
        let mut dense = Vec::with_capacity(config.dense_widths.len());
        for &w in &config.dense_widths {
            dense.push(match rng.as_deref_mut() {
                Some(rng) => DenseLayer::init(width, w, kind, rng),
                None => DenseLayer::zeros(width, w, kind),
            });
            width = w;
        }
        let output = match rng {
            Some(rng) => DenseLayer::init(width, config.classes, TransferKind::Identity, rng),
            None => DenseLayer::zeros(width, config.classes, TransferKind::Identity),
        };
        Ok(Self {
            config,
            geometry,
            conditional,
            dense,
            output,
            standardizer: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn geometry(&self) -> &SegmentGeometry {
        &self.geometry
    }

    pub fn segment_width(&self) -> usize {
        self.geometry.width()
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    pub fn conditional_layers(&self) -> &[ConditionalLayer] {
        &self.conditional
    }

    pub fn conditional_layers_mut(&mut self) -> &mut [ConditionalLayer] {
        &mut self.conditional
    }

    pub fn dense_layers(&self) -> &[DenseLayer] {
        &self.dense
    }

    pub fn dense_layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.dense
    }

    pub fn output_layer(&self) -> &DenseLayer {
        &self.output
    }

    pub fn output_layer_mut(&mut self) -> &mut DenseLayer {
        &mut self.output
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn set_standardizer(&mut self, s: Option<Standardizer>) -> Result<()> {
        if let Some(s) = &s {
            if s.features() != self.config.input_features {
                return Err(Error::shape(format!(
                    "standardizer covers {} features, model input has {}",
                    s.features(),
                    self.config.input_features
                )));
            }
        }
        self.standardizer = s;
        Ok(())
    }

    /// Raw frames-by-features matrix to the model's feature-by-frame input:
    /// appends deltas if configured, then applies the stored standardizer.
    pub fn prepare(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.cols() != self.config.raw_features() {
            return Err(Error::shape(format!(
                "feature file has {} features per frame, model expects {}",
                raw.cols(),
                self.config.raw_features()
            )));
        }
        let frames = if self.config.delta {
            concat_delta(raw)
        } else {
            raw.clone()
        };
        let frames = match &self.standardizer {
            Some(s) => s.apply(&frames)?,
            None => frames,
        };
        Ok(frames.transpose())
    }

    /// Parameter tensors in canonical order: per conditional layer its `2n+1`
    /// weight matrices, bias and (PReLU) slopes; then per dense layer its
    /// weights, bias and slopes; then the output weights and bias.
    pub fn param_layout(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        let info = |name: String, rows, cols, masked| ParamInfo {
            name,
            rows,
            cols,
            masked,
        };
        for (b, layer) in self.conditional.iter().enumerate() {
            let n = layer.order() as i64;
            for (u, w) in layer.weights().iter().enumerate() {
                out.push(info(
                    format!("conditional[{b}].weight[{}]", u as i64 - n),
                    w.rows(),
                    w.cols(),
                    layer.mask().is_some(),
                ));
            }
            out.push(info(format!("conditional[{b}].bias"), layer.nodes(), 1, false));
            if let Some(s) = layer.transfer().slope() {
                out.push(info(format!("conditional[{b}].slope"), s.len(), 1, false));
            }
        }
        for (b, layer) in self.dense.iter().enumerate() {
            out.push(info(
                format!("dense[{b}].weight"),
                layer.inputs(),
                layer.outputs(),
                false,
            ));
            out.push(info(format!("dense[{b}].bias"), layer.outputs(), 1, false));
            if let Some(s) = layer.transfer().slope() {
                out.push(info(format!("dense[{b}].slope"), s.len(), 1, false));
            }
        }
        out.push(info(
            "output.weight".into(),
            self.output.inputs(),
            self.output.outputs(),
            false,
        ));
        out.push(info("output.bias".into(), self.output.outputs(), 1, false));
        out
    }

    /// Read-only parameter tensors in [`Model::param_layout`] order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.conditional {
            out.extend(layer.weights().iter().map(|w| w.as_slice()));
            out.push(layer.bias());
            if let Some(s) = layer.transfer().slope() {
                out.push(s);
            }
        }
        for layer in &self.dense {
            out.push(layer.weights().as_slice());
            out.push(layer.bias());
            if let Some(s) = layer.transfer().slope() {
                out.push(s);
            }
        }
        out.push(self.output.weights().as_slice());
        out.push(self.output.bias());
        out
    }

    /// Mutable parameter tensors in [`Model::param_layout`] order.
    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        for layer in &mut self.conditional {
            let (weights, bias, slope, mask) = layer.parts_mut();
            let mask = mask.map(|m| m.matrix().as_slice());
            for w in weights.iter_mut() {
                out.push(ParamMut {
                    values: w.as_mut_slice(),
                    mask,
                });
            }
            out.push(ParamMut {
                values: bias,
                mask: None,
            });
            if let Some(s) = slope {
                out.push(ParamMut { values: s, mask: None });
            }
        }
        for layer in &mut self.dense {
            let (w, bias, slope) = layer.parts_mut();
            out.push(ParamMut {
                values: w.as_mut_slice(),
                mask: None,
            });
            out.push(ParamMut {
                values: bias,
                mask: None,
            });
            if let Some(s) = slope {
                out.push(ParamMut { values: s, mask: None });
            }
        }
        let (w, bias, _) = self.output.parts_mut();
        out.push(ParamMut {
            values: w.as_mut_slice(),
            mask: None,
        });
        out.push(ParamMut {
            values: bias,
            mask: None,
        });
        out
    }

    /// Class probabilities for one `l × q` segment.
    pub fn forward(&self, segment: &Matrix, training: bool, rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(self.forward_trace(segment, training, rng)?.probabilities)
    }

    /// Inference-mode probabilities (no dropout, no randomness).
    pub fn predict(&self, segment: &Matrix) -> Result<Vec<f64>> {
        // rng is never drawn from when training is false
        self.forward(segment, false, &mut Rng::new(0))
    }

    pub fn forward_trace(&self, segment: &Matrix, training: bool, rng: &mut Rng) -> Result<ForwardTrace> {
        let q = self.segment_width();
        if segment.cols() != q {
            return Err(Error::shape(format!(
                "segment has {} frames, model geometry expects q = {q}",
                segment.cols()
            )));
        }
        if segment.rows() != self.config.input_features {
            return Err(Error::shape(format!(
                "segment has {} features, model expects {}",
                segment.rows(),
                self.config.input_features
            )));
        }
        let mut cond_inputs = Vec::with_capacity(self.conditional.len());
        let mut cond_outputs = Vec::with_capacity(self.conditional.len());
        let mut cond_dropout = Vec::with_capacity(self.conditional.len());
        let mut x = segment.clone();
        for (layer, spec) in self.conditional.iter().zip(&self.config.conditional_layers) {
            let out = layer.forward(&x)?;
            let (dropped, scale) = dropout(out.out.as_slice(), spec.dropout, rng, training)?;
            cond_inputs.push(x);
            x = Matrix::from_col_major(out.out.rows(), out.out.cols(), dropped)?;
            cond_outputs.push(out);
            cond_dropout.push(scale);
        }
        debug_assert_eq!(x.cols(), self.geometry.extra_frames());
        let pooled = temporal_pool(&x, self.config.pool)?;
        let pool_input = x;

        let rates = self.config.dense_dropout_rates();
        let mut v = pooled.out.clone();
        let mut dense_inputs = Vec::with_capacity(self.dense.len());
        let mut dense_outputs = Vec::with_capacity(self.dense.len());
        let mut dense_dropout = Vec::with_capacity(self.dense.len());
        for (layer, &rate) in self.dense.iter().zip(&rates) {
            let out = layer.forward(&v)?;
            let (dropped, scale) = dropout(&out.out, rate, rng, training)?;
            dense_inputs.push(v);
            v = dropped;
            dense_outputs.push(out);
            dense_dropout.push(scale);
        }
        let output = self.output.forward(&v)?;
        let probabilities = softmax(&output.pre);
        debug_assert!(probabilities.iter().all(|p| p.is_finite()));
        Ok(ForwardTrace {
            cond_inputs,
            cond_outputs,
            cond_dropout,
            pool_input,
            pooled,
            dense_inputs,
            dense_outputs,
            dense_dropout,
            output_input: v,
            output,
            probabilities,
        })
    }

    /// Cross-entropy loss and its gradient for every parameter.
    pub fn backward(&self, trace: &ForwardTrace, target: usize) -> Result<(f64, ModelGrads)> {
        let loss = cross_entropy(&trace.probabilities, target)?;
        let mut grad: Vec<f64> = trace.probabilities.clone();
        grad[target] -= 1.0;

        let out_g = self.output.backward(&trace.output_input, &trace.output, &grad)?;
        let mut dense_grads = Vec::with_capacity(self.dense.len());
        let mut g = out_g.input.clone();
        for i in (0..self.dense.len()).rev() {
            let g_pre_drop = dropout_backward(&g, trace.dense_dropout[i].as_deref());
            let dg = self.dense[i].backward(&trace.dense_inputs[i], &trace.dense_outputs[i], &g_pre_drop)?;
            g = dg.input.clone();
            dense_grads.push(dg);
        }
        dense_grads.reverse();

        let (e, k) = trace.pool_input.shape();
        let mut g_block = pool_backward(e, k, self.config.pool, &trace.pooled, &g)?;
        let mut cond_grads = Vec::with_capacity(self.conditional.len());
        for i in (0..self.conditional.len()).rev() {
            let gd = dropout_backward(g_block.as_slice(), trace.cond_dropout[i].as_deref());
            let gd = Matrix::from_col_major(g_block.rows(), g_block.cols(), gd)?;
            let cg = self.conditional[i].backward(&trace.cond_inputs[i], &trace.cond_outputs[i], &gd)?;
            g_block = cg.input.clone();
            cond_grads.push(cg);
        }
        cond_grads.reverse();

        let mut tensors = Vec::new();
        for cg in cond_grads {
            tensors.extend(cg.weights.into_iter().map(Matrix::into_vec));
            tensors.push(cg.bias);
            if let Some(s) = cg.slope {
                tensors.push(s);
            }
        }
        for dg in dense_grads {
            tensors.push(dg.weights.into_vec());
            tensors.push(dg.bias);
            if let Some(s) = dg.slope {
                tensors.push(s);
            }
        }
        tensors.push(out_g.weights.into_vec());
        tensors.push(out_g.bias);
        Ok((loss, ModelGrads { tensors }))
    }

    /// Forward then backward on one labelled segment.
    pub fn loss_and_grads(
        &self,
        segment: &Matrix,
        target: usize,
        training: bool,
        rng: &mut Rng,
    ) -> Result<(f64, ModelGrads)> {
        if target >= self.classes() {
            return Err(Error::invalid(format!(
                "target class {target} out of range for {} classes",
                self.classes()
            )));
        }
        let trace = self.forward_trace(segment, training, rng)?;
        self.backward(&trace, target)
    }

    /// Loss only, inference mode.
    pub fn loss(&self, segment: &Matrix, target: usize) -> Result<f64> {
        cross_entropy(&self.predict(segment)?, target)
    }

    /// Overwrites every parameter with values from `tensors` (layout order).
    pub fn load_params(&mut self, tensors: &[Vec<f64>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != tensors.len() {
            return Err(Error::shape(format!(
                "expected {} parameter tensors, got {}",
                params.len(),
                tensors.len()
            )));
        }
        for (p, t) in params.iter_mut().zip(tensors) {
            if p.values.len() != t.len() {
                return Err(Error::shape("parameter tensor size mismatch"));
            }
            p.values.copy_from_slice(t);
        }
        Ok(())
    }

    /// Transfer of each conditional and dense layer, for inspection.
    pub fn transfers(&self) -> Vec<&Transfer> {
        self.conditional
            .iter()
            .map(|l| l.transfer())
            .chain(self.dense.iter().map(|l| l.transfer()))
            .collect()
    }
}
