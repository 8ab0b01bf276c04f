use crate::error::{Error, Result};
use crate::layers::{glorot, Transfer, TransferKind};
use crate::numkernel::{Matrix, Rng};

/// Fully connected layer, `y = f(x · W + b)` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    transfer: Transfer,
}

#[derive(Debug, Clone)]
pub struct DenseOutput {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub slope: Option<Vec<f64>>,
    pub input: Vec<f64>,
}

impl DenseLayer {
    pub fn from_parts(weights: Matrix, bias: Vec<f64>, transfer: Transfer) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::shape(format!(
                "dense bias has {} entries for {} outputs",
                bias.len(),
                weights.cols()
            )));
        }
        if transfer.slope().is_some_and(|s| s.len() != weights.cols()) {
            return Err(Error::shape("PReLU slope count differs from dense width"));
        }
        Ok(Self {
            weights,
            bias,
            transfer,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, transfer: TransferKind) -> Self {
        Self {
            weights: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
            transfer: Transfer::new(transfer, outputs),
        }
    }

    pub fn init(inputs: usize, outputs: usize, transfer: TransferKind, rng: &mut Rng) -> Self {
        Self {
            weights: glorot(inputs, outputs, inputs, outputs, rng),
            bias: vec![0.0; outputs],
            transfer: Transfer::new(transfer, outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
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

    pub(crate) fn parts_mut(&mut self) -> (&mut Matrix, &mut [f64], Option<&mut Vec<f64>>) {
        (&mut self.weights, &mut self.bias, self.transfer.slope_mut())
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseOutput> {
        if x.len() != self.inputs() {
            return Err(Error::shape(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs(),
                x.len()
            )));
        }
        let mut pre = self.bias.clone();
        self.weights.vec_mul_acc(x, &mut pre);
        let out = self.transfer.apply(&pre);
        Ok(DenseOutput { pre, out })
    }

    pub fn backward(&self, x: &[f64], cache: &DenseOutput, grad_out: &[f64]) -> Result<DenseGrads> {
        if x.len() != self.inputs() || grad_out.len() != self.outputs() || cache.pre.len() != self.outputs() {
            return Err(Error::shape("dense backward: shape mismatch"));
        }
        let mut slope = self.transfer.slope().map(|s| vec![0.0; s.len()]);
        let dz = self.transfer.backward(&cache.pre, grad_out, slope.as_deref_mut());
        let mut weights = Matrix::zeros(self.inputs(), self.outputs());
        weights.add_outer(x, &dz);
        let mut input = vec![0.0; self.inputs()];
        self.weights.mul_vec_acc(&dz, &mut input);
        Ok(DenseGrads {
            weights,
            bias: dz,
            slope,
            input,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_affine_then_transfer() {
        let w = Matrix::from_rows(&[[1.0, -1.0], [2.0, 0.5]]).unwrap();
        let layer = DenseLayer::from_parts(w, vec![0.5, -3.0], Transfer::new(TransferKind::Prelu, 2)).unwrap();
        let out = layer.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(out.pre, vec![3.5, -3.5]);
        assert_eq!(out.out, vec![3.5, -0.875]);
        assert!(layer.forward(&[1.0]).is_err());
    }

    #[test]
    fn backward_shapes() {
        let mut rng = Rng::new(4);
        let layer = DenseLayer::init(5, 3, TransferKind::Prelu, &mut rng);
        let x = [0.1, -0.2, 0.3, 0.4, -0.5];
        let cache = layer.forward(&x).unwrap();
        let g = layer.backward(&x, &cache, &[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(g.weights.shape(), (5, 3));
        assert_eq!(g.input.len(), 5);
        assert_eq!(g.slope.unwrap().len(), 3);
    }
}
