use crate::error::{Error, Result};
use crate::layers::{glorot, Transfer, TransferKind};
use crate::masking::{mask_weights, BinaryMask};
use crate::numkernel::{Matrix, Rng};

/// Window of `2n + 1` frames centred on the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGeometry {
    pub order: usize,
}

impl WindowGeometry {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("conditional order must be at least 1"));
        }
        Ok(Self { order })
    }

    pub fn width(&self) -> usize {
        2 * self.order + 1
    }
}

/// A conditional layer: one `l × e` weight matrix per window position plus a
/// shared bias, optionally masked.
///
/// Without a mask this is a CLNN layer; with one, every weight matrix is
/// multiplied element-wise by the mask on each forward pass (MCLNN). The bias
/// is never masked.
/// Weights, bias, PReLU slopes and mask, borrowed for an optimiser step.
pub(crate) type LayerPartsMut<'a> = (
    &'a mut [Matrix],
    &'a mut [f64],
    Option<&'a mut Vec<f64>>,
    Option<&'a BinaryMask>,
);

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLayer {
    geometry: WindowGeometry,
    /// `weights[u + n]` is the matrix for window offset `u ∈ [-n, n]`.
    weights: Vec<Matrix>,
    bias: Vec<f64>,
    transfer: Transfer,
    mask: Option<BinaryMask>,
}

/// Forward results kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConditionalOutput {
    /// Pre-activations, `e × (w - 2n)`.
    pub pre: Matrix,
    /// Activations, `e × (w - 2n)`.
    pub out: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGrads {
    pub weights: Vec<Matrix>,
    pub bias: Vec<f64>,
    pub slope: Option<Vec<f64>>,
    pub input: Matrix,
}

impl ConditionalLayer {
    /// Builds a layer from explicit parameters.
    pub fn from_parts(
        weights: Vec<Matrix>,
        bias: Vec<f64>,
        transfer: Transfer,
        mask: Option<BinaryMask>,
    ) -> Result<Self> {
        if weights.len().is_multiple_of(2) || weights.len() < 3 {
            return Err(Error::invalid(format!(
                "need 2n+1 weight matrices with n >= 1, got {}",
                weights.len()
            )));
        }
        let shape = weights[0].shape();
        if weights.iter().any(|w| w.shape() != shape) {
            return Err(Error::shape("conditional weight matrices differ in shape"));
        }
        if bias.len() != shape.1 {
            return Err(Error::shape(format!(
                "bias has {} entries for {} hidden nodes",
                bias.len(),
                shape.1
            )));
        }
        if let Some(s) = transfer.slope() {
            if s.len() != shape.1 {
                return Err(Error::shape("PReLU slope count differs from hidden width"));
            }
        }
        if let Some(m) = &mask {
            if m.shape() != shape {
                return Err(Error::shape(format!(
                    "mask is {:?}, weights are {:?}",
                    m.shape(),
                    shape
                )));
            }
        }
        Ok(Self {
            geometry: WindowGeometry::new(weights.len() / 2)?,
            weights,
            bias,
            transfer,
            mask,
        })
    }

    /// All-zero layer.
    pub fn zeros(features: usize, nodes: usize, order: usize, transfer: TransferKind) -> Result<Self> {
        let geometry = WindowGeometry::new(order)?;
        Self::from_parts(
            vec![Matrix::zeros(features, nodes); geometry.width()],
            vec![0.0; nodes],
            Transfer::new(transfer, nodes),
            None,
        )
    }

    /// Glorot-initialised layer with `fan_in = l · (2n + 1)`; masked
    /// positions are zeroed right after drawing.
    pub fn init(
        features: usize,
        nodes: usize,
        order: usize,
        transfer: TransferKind,
        mask: Option<BinaryMask>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let geometry = WindowGeometry::new(order)?;
        let fan_in = features * geometry.width();
        let mut weights: Vec<Matrix> = (0..geometry.width())
            .map(|_| glorot(features, nodes, fan_in, nodes, rng))
            .collect();
        if let Some(m) = &mask {
            for w in &mut weights {
                *w = mask_weights(w, m)?;
            }
        }
        Self::from_parts(weights, vec![0.0; nodes], Transfer::new(transfer, nodes), mask)
    }

    pub fn order(&self) -> usize {
        self.geometry.order
    }

    pub fn window_width(&self) -> usize {
        self.geometry.width()
    }

    pub fn features(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn nodes(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn transfer(&self) -> &Transfer {
        &self.transfer
    }

    pub fn transfer_mut(&mut self) -> &mut Transfer {
        &mut self.transfer
    }

    pub fn mask(&self) -> Option<&BinaryMask> {
        self.mask.as_ref()
    }

    pub fn set_mask(&mut self, mask: Option<BinaryMask>) -> Result<()> {
        if let Some(m) = &mask {
            if m.shape() != self.weights[0].shape() {
                return Err(Error::shape("mask shape differs from weight shape"));
            }
        }
        self.mask = mask;
        Ok(())
    }

    /// Mutable views used by the optimiser: (weights, bias, slope, mask).
    pub(crate) fn parts_mut(&mut self) -> LayerPartsMut<'_> {
        (
            &mut self.weights,
            &mut self.bias,
            self.transfer.slope_mut(),
            self.mask.as_ref(),
        )
    }

    /// Weights actually used in the forward pass.
    pub fn effective_weights(&self) -> Vec<Matrix> {
        match &self.mask {
            None => self.weights.clone(),
            Some(m) => self
                .weights
                .iter()
                .map(|w| mask_weights(w, m).expect("shape checked at construction"))
                .collect(),
        }
    }

    /// Output vector for a single `l × (2n + 1)` window.
    pub fn forward_window(&self, window: &Matrix) -> Result<Vec<f64>> {
        if window.cols() != self.window_width() {
            return Err(Error::shape(format!(
                "window has {} frames, order {} needs {}",
                window.cols(),
                self.order(),
                self.window_width()
            )));
        }
        Ok(self.forward(window)?.out.into_vec())
    }

    /// Slides the window over an `l × w` segment, producing `e × (w - 2n)`.
    pub fn forward(&self, input: &Matrix) -> Result<ConditionalOutput> {
        self.check_input(input)?;
        let d = self.window_width();
        let out_w = input.cols() + 1 - d;
        let eff = self.effective_weights();
        let mut pre = Matrix::zeros(self.nodes(), out_w);
        for t in 0..out_w {
            let col = pre.column_mut(t);
            col.copy_from_slice(&self.bias);
            for (u, w) in eff.iter().enumerate() {
                w.vec_mul_acc(input.column(t + u), col);
            }
        }
        let out = Matrix::from_col_major(pre.rows(), pre.cols(), self.transfer.apply(pre.as_slice()))?;
        debug_assert!(out.is_finite());
        Ok(ConditionalOutput { pre, out })
    }

    /// Exact gradients given the forward input, its cached output and the
    /// upstream gradient. Weight gradients are masked like the weights.
    pub fn backward(&self, input: &Matrix, cache: &ConditionalOutput, grad_out: &Matrix) -> Result<ConditionalGrads> {
        self.check_input(input)?;
        if grad_out.shape() != cache.pre.shape() {
            return Err(Error::shape(format!(
                "upstream gradient is {:?}, layer output is {:?}",
                grad_out.shape(),
                cache.pre.shape()
            )));
        }
        let (e, out_w) = cache.pre.shape();
        if out_w != input.cols() + 1 - self.window_width() || e != self.nodes() {
            return Err(Error::shape("cached output does not match this input"));
        }
        let mut slope = self.transfer.slope().map(|s| vec![0.0; s.len()]);
        let dz = self
            .transfer
            .backward(cache.pre.as_slice(), grad_out.as_slice(), slope.as_deref_mut());
        let dz = Matrix::from_col_major(e, out_w, dz)?;

        let mut bias = vec![0.0; e];
        for col in dz.columns() {
            for (b, g) in bias.iter_mut().zip(col) {
                *b += g;
            }
        }

        let eff = self.effective_weights();
        let mut weights = vec![Matrix::zeros(self.features(), e); self.window_width()];
        let mut grad_input = Matrix::zeros(input.rows(), input.cols());
        for t in 0..out_w {
            let g = dz.column(t);
            for u in 0..self.window_width() {
                weights[u].add_outer(input.column(t + u), g);
                eff[u].mul_vec_acc(g, grad_input.column_mut(t + u));
            }
        }
        if let Some(m) = &self.mask {
            for w in &mut weights {
                *w = mask_weights(w, m)?;
            }
        }
        Ok(ConditionalGrads {
            weights,
            bias,
            slope,
            input: grad_input,
        })
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.rows() != self.features() {
            return Err(Error::shape(format!(
                "input frames have {} features, layer expects {}",
                input.rows(),
                self.features()
            )));
        }
        if input.cols() < self.window_width() {
            return Err(Error::shape(format!(
                "segment too short for order {}: {} frames, need at least {}",
                self.order(),
                input.cols(),
                self.window_width()
            )));
        }
        Ok(())
    }
}
